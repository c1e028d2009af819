import numpy as np
import pytest

from .synth import HMD_SAMPLE

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when != "call" and not (rep.when == "setup" and rep.outcome != "passed"):
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "outcomes": [], "details": []})
    entry["outcomes"].append(rep.outcome)
    entry["details"] += [f"{item.name.removeprefix('test_')}: {v}" for k, v in item.user_properties
                         if k == "detail"]
    if rep.outcome == "skipped" and isinstance(rep.longrepr, tuple):
        entry["details"].append(rep.longrepr[2].removeprefix("Skipped: "))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        outs = entry["outcomes"]
        if "failed" in outs:
            status = "FAIL"
        elif all(o == "skipped" for o in outs):
            status = "SKIP"
        else:
            status = "PASS"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(
            f"criterion {number:>2} {status:<4} {entry['title']}" + (f" [{detail}]" if detail else ""))


@pytest.fixture
def hmd_text():
    return HMD_SAMPLE


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
