"""Command-line front end.

Subcommands ``ingest``, ``cei``, ``fit``, ``forecast`` and ``report`` each
write their artifacts into ``--out``.  Exit codes: 0 success, 2 input or
configuration error, 3 numeric or model error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cohort_index as ci
from .errors import InputError, NumericError
from .geometry import curvature_field, write_field_csv
from .mlc import MLCFit, mlc_fit, mlc_forecast
from .models import (apc_csv_blocks, apc_fit, apc_forecast, fit_metrics, forecast_csv,
                     forecast_path_csv, lc_csv_blocks, lc_fit, lc_forecast)
from .surface_io import SERIES, MortalitySurface, load_surface, write_surface_csv
from .svgplot import Line, line_chart

MIN_AGE_SPAN = 60
MODELS = ("lc", "mlc", "apc")


@dataclass
class RunConfig:
    input: str | None = None
    series: str = "total"
    years: tuple[int, int] | None = None
    ages: tuple[int, int] | None = None
    pad: str = "zero"
    cei: str = "sum"
    min_support: int | None = None
    max_birth_year: int | None = None
    model: tuple[str, ...] = ("lc",)
    horizon: int = 1
    actuals: str | None = None
    age_band: tuple[int, int] = (20, 50)
    out: str = "."
    scale_t: float = 1.0
    scale_x: float = 1.0
    scale_z: float = 1.0
    include_open_age: bool = False
    plateau_window: int = 3
    plateau_quantile: float = 0.9

    def validate(self) -> None:
        for name in ("years", "ages", "age_band"):
            w = getattr(self, name)
            if w is not None and w[0] > w[1]:
                raise InputError(f"--{name.replace('_', '-')} {w[0]}..{w[1]} is not well ordered")
        if self.horizon < 0:
            raise InputError("--horizon must be >= 0")
        if min(self.scale_t, self.scale_x, self.scale_z) <= 0:
            raise InputError("axis scale factors must be > 0")
        if self.series not in SERIES:
            raise InputError(f"--series must be one of {SERIES}")
        if self.pad not in ("zero", "none"):
            raise InputError("--pad must be zero or none")
        if self.cei not in ("sum", "mean"):
            raise InputError("--cei must be sum or mean")
        bad = [m for m in self.model if m not in MODELS]
        if bad or not self.model:
            raise InputError(f"--model must be a comma list drawn from {MODELS}")

    @property
    def scale(self) -> tuple[float, float, float]:
        return self.scale_t, self.scale_x, self.scale_z


# --- parsing ---------------------------------------------------------------

def parse_window(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise InputError(f"expected a range like 1950..2009, got {text!r}") from None


def _convert(name: str, value: str):
    if name in ("years", "ages", "age_band"):
        return parse_window(value)
    if name == "model":
        return tuple(m.strip() for m in value.split(",") if m.strip())
    if name in ("min_support", "max_birth_year", "horizon", "plateau_window"):
        try:
            return int(value)
        except ValueError:
            raise InputError(f"{name} must be an integer, got {value!r}") from None
    if name in ("scale_t", "scale_x", "scale_z", "plateau_quantile"):
        try:
            return float(value)
        except ValueError:
            raise InputError(f"{name} must be a number, got {value!r}") from None
    if name == "include_open_age":
        return value.strip().lower() in ("1", "true", "yes", "on")
    return value


def read_config_file(path: str) -> dict:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in known:
                raise InputError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _convert(key, value)
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--input", help="HMD Mx_1x1 file or surface CSV")
    common.add_argument("--series", choices=SERIES)
    common.add_argument("--years", help="inclusive year window A..B")
    common.add_argument("--ages", help="inclusive age window A..B (HMD default 0..100)")
    common.add_argument("--include-open-age", action="store_const", const="true", default=None)
    common.add_argument("--pad", choices=("zero", "none"))
    common.add_argument("--cei", choices=("sum", "mean"))
    common.add_argument("--min-support", help="drop cohorts with fewer grid points")
    common.add_argument("--max-birth-year", help="drop cohorts born after this year")
    common.add_argument("--plateau-window")
    common.add_argument("--plateau-quantile")
    common.add_argument("--model", help="comma list of lc, mlc, apc")
    common.add_argument("--horizon")
    common.add_argument("--actuals", help="observed rates for the forecast years")
    common.add_argument("--age-band", help="ages compared against actuals (default 20..50)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--scale-t")
    common.add_argument("--scale-x")
    common.add_argument("--scale-z")

    parser = argparse.ArgumentParser(
        prog="cohortgeom",
        description="Cohort effects in mortality surfaces via discrete normal curvature.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="HMD file -> surface CSV")
    sub.add_parser("cei", parents=[common], help="cohort effect index series and plot")
    sub.add_parser("fit", parents=[common], help="fit lc / mlc / apc")
    sub.add_parser("forecast", parents=[common], help="project log rates")
    sub.add_parser("report", parents=[common], help="CEI, LC, MLC and APC in one run")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            values[f.name] = _convert(f.name, raw)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# --- helpers ---------------------------------------------------------------

def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load(cfg: RunConfig) -> MortalitySurface:
    if not cfg.input:
        raise InputError("--input is required")
    path = Path(cfg.input)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    try:
        return load_surface(path, cfg.series, cfg.years, cfg.ages, cfg.include_open_age)
    except InputError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def _span_warning(surface: MortalitySurface) -> None:
    span = int(surface.ages[-1] - surface.ages[0])
    if span < MIN_AGE_SPAN:
        print(f"warning: age span {span} years is below {MIN_AGE_SPAN}; "
              "cohort effect estimates from short age ranges are unreliable",
              file=sys.stderr)


def _policy(cfg: RunConfig, surface: MortalitySurface) -> ci.TruncationPolicy:
    default = ci.TruncationPolicy.default_for(int(surface.years[-1]))
    return ci.TruncationPolicy(
        cfg.min_support if cfg.min_support is not None else default.min_support,
        cfg.max_birth_year if cfg.max_birth_year is not None else default.max_birth_year)


def _summary(surface: MortalitySurface) -> str:
    y, a = surface.years, surface.ages
    return (f"years {y[0]}..{y[-1]} ({len(y)}), ages {a[0]}..{a[-1]} ({len(a)}), "
            f"series {surface.series}, masked cells {surface.masked_count}")


def compute_cei(surface: MortalitySurface, cfg: RunConfig):
    field = curvature_field(surface, padding=cfg.pad, scale=cfg.scale)
    full = ci.cei_mean_series(field) if cfg.cei == "mean" else ci.cei_series(field)
    truncated = ci.truncate_series(full, _policy(cfg, surface))
    return field, full, truncated


# --- commands --------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> int:
    surface = _load(cfg)
    _write(_outdir(cfg) / "surface.csv", write_surface_csv(surface))
    print(_summary(surface))
    return 0


def cmd_cei(cfg: RunConfig) -> int:
    surface = _load(cfg)
    _span_warning(surface)
    field, full, truncated = compute_cei(surface, cfg)
    out = _outdir(cfg)
    _write(out / "cei.csv", ci.write_cei_csv(full, truncated))
    _write(out / "curvature_field.csv", write_field_csv(field))
    plateaus = ci.detect_plateaus(truncated, cfg.plateau_window, cfg.plateau_quantile)
    _write(out / "plateaus.txt", ci.format_plateaus(plateaus))
    _write(out / "cei.svg", line_chart(
        [Line(f"CEI ({cfg.cei})", truncated.cohorts, truncated.cei, markers=True)],
        title="Series of cohort effect", xlabel="birth year", ylabel="CEI"))
    peak = int(truncated.cohorts[np.argmax(truncated.cei)])
    print(f"{len(truncated)} cohorts {truncated.cohorts[0]}..{truncated.cohorts[-1]} "
          f"retained of {len(full)}; peak at {peak}; {len(plateaus)} plateau(s)")
    return 0


def _fit_models(surface: MortalitySurface, cfg: RunConfig, models: Sequence[str]) -> dict:
    fits = {}
    for m in models:
        if m == "lc":
            fits[m] = lc_fit(surface)
        elif m == "mlc":
            fits[m] = mlc_fit(surface, padding=cfg.pad, policy=_policy(cfg, surface),
                              scale_axes=cfg.scale)
        else:
            fits[m] = apc_fit(surface)
    return fits


def _write_fit(out: Path, tag: str, fit, surface: MortalitySurface) -> None:
    if tag == "apc":
        for name, text in apc_csv_blocks(fit).items():
            _write(out / f"apc_{name}.csv", text)
        print("apc constraints: " + "; ".join(fit.constraint_record))
        return
    lc = fit.lc if isinstance(fit, MLCFit) else fit
    for name, text in lc_csv_blocks(lc).items():
        _write(out / f"{tag}_{name}.csv", text)
    if isinstance(fit, MLCFit):
        _write(out / "mlc_scale.txt",
               f"scale={fit.scale!r}\nscale_defined={int(fit.scale_defined)}\n")
        _write(out / "mlc_cei.csv", ci.write_cei_csv(fit.cei))
        _write(out / "mlc_adjusted_surface.csv", write_surface_csv(fit.adjusted))
        print(f"mlc scale {fit.scale:.6g}" + ("" if fit.scale_defined else " (undefined, set to 0)"))


def _metrics_csv(rows: list[tuple]) -> str:
    lines = ["model,rmse,mae,explained_ratio"]
    lines += [f"{m},{r!r},{a!r},{e!r}" for m, r, a, e in rows]
    return "\n".join(lines) + "\n"


def cmd_fit(cfg: RunConfig) -> int:
    surface = _load(cfg)
    if "mlc" in cfg.model:
        _span_warning(surface)
    fits = _fit_models(surface, cfg, cfg.model)
    out = _outdir(cfg)
    rows = []
    for tag, fit in fits.items():
        _write_fit(out, tag, fit, surface)
        met = fit_metrics(fit, surface)
        rows.append((tag, met.rmse, met.mae, met.explained_ratio))
        print(f"{tag}: rmse {met.rmse:.6g} mae {met.mae:.6g} explained {met.explained_ratio:.6g}")
    _write(out / "fit_metrics.csv", _metrics_csv(rows))

    lc_like = [(t, f.lc if isinstance(f, MLCFit) else f) for t, f in fits.items() if t != "apc"]
    if lc_like:
        _write(out / "k.svg", line_chart(
            [Line(t.upper(), f.years, f.k, dashed=(t == "lc"), markers=(t == "lc"))
             for t, f in lc_like], title="k-value", xlabel="year", ylabel="k"))
        _write(out / "beta.svg", line_chart(
            [Line(t.upper(), f.ages, f.beta, dashed=(t == "lc"), markers=(t == "lc"))
             for t, f in lc_like], title="beta-value", xlabel="age", ylabel="beta"))
    return 0


def _forecast(tag: str, fit, horizon: int):
    if tag == "lc":
        return lc_forecast(fit, horizon)
    if tag == "mlc":
        return mlc_forecast(fit, horizon)
    return apc_forecast(fit, horizon)


def cmd_forecast(cfg: RunConfig) -> int:
    surface = _load(cfg)
    band = cfg.age_band
    if band[0] < surface.ages[0] or band[1] > surface.ages[-1]:
        raise InputError(f"age band {band[0]}..{band[1]} outside surface ages "
                         f"{surface.ages[0]}..{surface.ages[-1]}")
    if cfg.horizon == 0:
        print("horizon 0: nothing to forecast")
        return 0
    if "mlc" in cfg.model:
        _span_warning(surface)
    fits = _fit_models(surface, cfg, cfg.model)
    out = _outdir(cfg)
    forecasts = {tag: _forecast(tag, fit, cfg.horizon) for tag, fit in fits.items()}
    for tag, fc in forecasts.items():
        _write(out / f"{tag}_forecast.csv", forecast_csv(fc))
        _write(out / f"{tag}_forecast_k.csv", forecast_path_csv(fc))
        print(f"{tag}: drift {fc.drift:.6g}, years {fc.years[0]}..{fc.years[-1]}")

    if cfg.actuals:
        _compare_actuals(cfg, surface, forecasts, out)
    return 0


def _compare_actuals(cfg: RunConfig, surface: MortalitySurface, forecasts: dict, out: Path) -> None:
    path = Path(cfg.actuals)
    if not path.is_file():
        raise InputError(f"actuals file not found: {path}")
    actual = load_surface(path, cfg.series, None, None, cfg.include_open_age)
    band = np.arange(cfg.age_band[0], cfg.age_band[1] + 1)
    if band[0] < actual.ages[0] or band[-1] > actual.ages[-1]:
        raise InputError(f"age band {cfg.age_band[0]}..{cfg.age_band[1]} outside actuals ages")
    any_fc = next(iter(forecasts.values()))
    years = [int(y) for y in any_fc.years if actual.years[0] <= y <= actual.years[-1]]
    if not years:
        raise InputError("actuals file shares no years with the forecast")

    a_idx = band - actual.ages[0]
    f_idx = band - any_fc.ages[0]
    rows = []
    for tag, fc in forecasts.items():
        diffs = []
        for y in years:
            obs = actual.z[y - actual.years[0], a_idx]
            pred = fc.log_rates[f_idx, y - int(fc.years[0])]
            diffs.append(pred - obs)
        d = np.concatenate(diffs)
        rmse, mae = float(np.sqrt(np.mean(d ** 2))), float(np.mean(np.abs(d)))
        rows.append((tag, rmse, mae))
        print(f"{tag} vs actuals, ages {band[0]}..{band[-1]}: rmse {rmse:.6g} mae {mae:.6g}")
    lines = ["model,rmse,mae"] + [f"{t},{r!r},{m!r}" for t, r, m in rows]
    _write(out / "forecast_metrics.csv", "\n".join(lines) + "\n")

    for y in years:
        chart = [Line(f"actual {y}", band, actual.z[y - actual.years[0], a_idx])]
        for tag, fc in forecasts.items():
            chart.append(Line(tag.upper(), band, fc.log_rates[f_idx, y - int(fc.years[0])],
                              dashed=True, markers=True))
        _write(out / f"forecast_{y}.svg", line_chart(
            chart, title=f"Prediction of mortality, {y}", xlabel="age", ylabel="ln rate"))


def cmd_report(cfg: RunConfig) -> int:
    surface = _load(cfg)
    _span_warning(surface)
    out = _outdir(cfg)
    field, full, truncated = compute_cei(surface, cfg)
    _write(out / "cei.csv", ci.write_cei_csv(full, truncated))
    plateaus = ci.detect_plateaus(truncated, cfg.plateau_window, cfg.plateau_quantile)
    fits = _fit_models(surface, cfg, MODELS)
    lines = [f"surface: {_summary(surface)}",
             f"padding: {cfg.pad}; cei variant: {cfg.cei}",
             f"truncation: min_support={_policy(cfg, surface).min_support} "
             f"max_birth_year={_policy(cfg, surface).max_birth_year}",
             f"cohorts retained: {len(truncated)} of {len(full)}",
             f"cei peak: {int(truncated.cohorts[np.argmax(truncated.cei)])}",
             f"mlc scale: {fits['mlc'].scale!r} (defined={fits['mlc'].scale_defined})",
             "", "plateaus:", ci.format_plateaus(plateaus).rstrip(), "",
             "model,rmse,mae,explained_ratio"]
    for tag, fit in fits.items():
        _write_fit(out, tag, fit, surface)
        met = fit_metrics(fit, surface)
        lines.append(f"{tag},{met.rmse!r},{met.mae!r},{met.explained_ratio!r}")
    _write(out / "report.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


COMMANDS = {"ingest": cmd_ingest, "cei": cmd_cei, "fit": cmd_fit,
            "forecast": cmd_forecast, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
