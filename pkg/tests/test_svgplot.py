import xml.etree.ElementTree as ET

import pytest

from cohortgeom.svgplot import Line, line_chart, nice_ticks


def test_nice_ticks():
    assert nice_ticks(0, 10) == [0, 2, 4, 6, 8, 10]
    assert nice_ticks(1900, 1960) == [1900, 1920, 1940, 1960]
    assert nice_ticks(3, 3) == [3]
    ticks = nice_ticks(-0.3, 0.3)
    assert 0.0 in ticks and all(-0.3 <= v <= 0.3 for v in ticks)


def test_well_formed_and_deterministic():
    lines = [Line("LC", [1, 2, 3], [0.5, -1, 2], dashed=True, markers=True),
             Line("a<b & c", [1, 2, 3], [0, 0, float("nan")])]
    svg = line_chart(lines, title="k-value", xlabel="year", ylabel="k")
    assert svg == line_chart(lines, title="k-value", xlabel="year", ylabel="k")
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}polyline")) == 2
    assert len(root.findall(f"{ns}circle")) == 3
    assert "a&lt;b &amp; c" in svg
    # non-finite points are dropped from the polyline
    second = root.findall(f"{ns}polyline")[1].get("points").split()
    assert len(second) == 2


def test_constant_and_empty():
    ET.fromstring(line_chart([Line("flat", [1, 2], [4.0, 4.0])]))
    ET.fromstring(line_chart([]))
