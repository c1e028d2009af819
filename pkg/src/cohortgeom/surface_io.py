"""Human Mortality Database ingestion and the log-mortality surface.

HMD ``Mx_1x1`` files look like::

    United Kingdom, Death rates (period 1x1)  Last modified: ...

      Year          Age             Female            Male           Total
      1922            0           0.068804        0.088947        0.079134
      ...
      1922          110+          .               0.593416        0.548611

A surface is stored year-major: ``z[i, j] = ln(rate)`` for ``years[i]`` and
``ages[j]``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Literal, TextIO

import numpy as np

from .errors import DataQualityError, ParseError, StructureError

Series = Literal["female", "male", "total"]
SERIES: tuple[str, ...] = ("female", "male", "total")

DEFAULT_AGE_WINDOW = (0, 100)
MAX_MASKED_FRACTION = 0.20


@dataclass(frozen=True)
class MortalityRow:
    year: int
    age: int
    female: float | None
    male: float | None
    total: float | None

    def rate(self, series: str) -> float | None:
        return getattr(self, series)


@dataclass(frozen=True)
class MortalityTable:
    rows: tuple[MortalityRow, ...]
    open_age: int | None = None  # age of the "110+" group when present

    @property
    def years(self) -> tuple[int, int]:
        return self.rows[0].year, self.rows[-1].year

    def ages_for(self, year: int) -> tuple[int, int]:
        ages = [r.age for r in self.rows if r.year == year]
        return min(ages), max(ages)


@dataclass(frozen=True, eq=False)
class MortalitySurface:
    """Rectangular grid of log central death rates.

    ``mask`` marks cells that were missing, zero, or non-finite before
    imputation; the corresponding ``z`` entries are interpolated values.
    """

    years: np.ndarray
    ages: np.ndarray
    z: np.ndarray
    mask: np.ndarray = None  # type: ignore[assignment]
    series: str = "total"

    def __post_init__(self):
        years = np.asarray(self.years, dtype=int)
        ages = np.asarray(self.ages, dtype=int)
        z = np.array(self.z, dtype=float)
        mask = (np.zeros(z.shape, dtype=bool) if self.mask is None
                else np.array(self.mask, dtype=bool))
        if years.ndim != 1 or ages.ndim != 1 or len(years) == 0 or len(ages) == 0:
            raise StructureError("years and ages must be non-empty 1-d sequences")
        if z.shape != (len(years), len(ages)):
            raise StructureError(
                f"z has shape {z.shape}, expected {(len(years), len(ages))}")
        if mask.shape != z.shape:
            raise StructureError("mask shape differs from z")
        for name, axis in (("years", years), ("ages", ages)):
            if len(axis) > 1 and not np.all(np.diff(axis) == 1):
                raise StructureError(f"{name} must be strictly increasing with unit step")
        if not np.all(np.isfinite(z[~mask])):
            raise DataQualityError("surface has non-finite unmasked cells")
        for arr in (years, ages, z, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.z.shape

    @property
    def masked_count(self) -> int:
        return int(self.mask.sum())

    def cohort_grid(self) -> np.ndarray:
        """Birth year ``year - age`` of every cell."""
        return self.years[:, None] - self.ages[None, :]

    def with_z(self, z: np.ndarray) -> "MortalitySurface":
        return MortalitySurface(self.years, self.ages, z, self.mask, self.series)

    def equals(self, other: "MortalitySurface") -> bool:
        return (np.array_equal(self.years, other.years)
                and np.array_equal(self.ages, other.ages)
                and np.array_equal(self.z, other.z)
                and self.series == other.series)


def _parse_rate(token: str, lineno: int) -> float | None:
    if token == ".":
        return None
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"malformed rate {token!r}", lineno) from None
    if not math.isfinite(value) or value < 0:
        raise ParseError(f"rate must be finite and non-negative, got {token!r}", lineno)
    return value


def _is_int(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True


def parse_hmd_mx(text: str | TextIO) -> MortalityTable:
    """Parse an HMD period death-rate file (``Mx_1x1`` layout)."""
    if not isinstance(text, str):
        text = text.read()
    rows: list[MortalityRow] = []
    open_age = None
    in_body = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if not in_body:
            # Header: title line(s) and the "Year Age Female Male Total" line.
            if not _is_int(tokens[0]):
                continue
            in_body = True
        if len(tokens) != 5:
            raise ParseError(f"expected 5 columns, found {len(tokens)}", lineno)
        year_tok, age_tok = tokens[0], tokens[1]
        if not _is_int(year_tok):
            raise ParseError(f"malformed year {year_tok!r}", lineno)
        is_open = age_tok.endswith("+")
        age_str = age_tok[:-1] if is_open else age_tok
        if not _is_int(age_str):
            raise ParseError(f"malformed age {age_tok!r}", lineno)
        age = int(age_str)
        if is_open:
            if open_age is not None and open_age != age:
                raise StructureError(f"inconsistent open age groups {open_age}+ and {age}+")
            open_age = age
        female, male, total = (_parse_rate(tok, lineno) for tok in tokens[2:])
        rows.append(MortalityRow(int(year_tok), age, female, male, total))

    if not rows:
        raise StructureError("no data rows after header")
    _check_coverage(rows)
    return MortalityTable(tuple(rows), open_age)


def _check_coverage(rows: list[MortalityRow]) -> None:
    expected_year = rows[0].year
    expected_age = 0
    for r in rows:
        if r.year != expected_year:
            if r.year != expected_year + 1 or r.age != 0 or expected_age == 0:
                raise StructureError(
                    f"non-contiguous coverage at year {r.year} age {r.age}")
            expected_year = r.year
            expected_age = 0
        if r.age != expected_age:
            raise StructureError(
                f"non-contiguous ages in year {r.year}: expected {expected_age}, got {r.age}")
        expected_age += 1


def read_hmd_mx(path) -> MortalityTable:
    with open(path, encoding="utf-8") as fh:
        return parse_hmd_mx(fh.read())


def _impute_along_ages(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = z.copy()
    idx = np.arange(z.shape[1])
    for i in range(z.shape[0]):
        bad = mask[i]
        if not bad.any():
            continue
        if bad.all():
            raise DataQualityError(f"row {i} has no valid rates to interpolate from")
        # np.interp holds end values constant outside the valid range.
        out[i, bad] = np.interp(idx[bad], idx[~bad], z[i, ~bad])
    return out


def build_surface(table: MortalityTable, series: Series = "total",
                  year_window: tuple[int, int] | None = None,
                  age_window: tuple[int, int] | None = None,
                  include_open_age: bool = False) -> MortalitySurface:
    """Select one sex series over a window and take logs.

    The default age window is 0-100, cut below the open age group.  An
    explicit window ending exactly at the open age drops that group unless
    ``include_open_age`` is set.

    Zero or missing rates are masked and their log value imputed by linear
    interpolation along age within the same year.
    """
    if series not in SERIES:
        raise StructureError(f"unknown series {series!r}; choose from {SERIES}")
    first_year, last_year = table.years
    y0, y1 = year_window if year_window is not None else (first_year, last_year)
    top = max(r.age for r in table.rows if r.year == first_year)
    if table.open_age is not None and not include_open_age:
        top = table.open_age - 1
    if age_window is None:
        a0, a1 = DEFAULT_AGE_WINDOW[0], min(DEFAULT_AGE_WINDOW[1], top)
    else:
        a0, a1 = age_window
        if table.open_age is not None and not include_open_age and a1 == table.open_age:
            a1 = top
    if y0 > y1 or a0 > a1:
        raise StructureError(f"empty window years={y0}..{y1} ages={a0}..{a1}")
    if y0 < first_year or y1 > last_year:
        raise StructureError(
            f"year window {y0}..{y1} outside coverage {first_year}..{last_year}")

    lookup = {(r.year, r.age): r for r in table.rows}
    years = np.arange(y0, y1 + 1)
    ages = np.arange(a0, a1 + 1)
    rates = np.full((len(years), len(ages)), np.nan)
    for i, y in enumerate(years):
        for j, a in enumerate(ages):
            row = lookup.get((int(y), int(a)))
            if row is None:
                raise StructureError(f"age window {a0}..{a1} outside coverage in year {y}")
            value = row.rate(series)
            if value is not None:
                rates[i, j] = value

    mask = ~(np.isfinite(rates) & (rates > 0))
    if mask.mean() > MAX_MASKED_FRACTION:
        raise DataQualityError(
            f"{int(mask.sum())} of {mask.size} cells missing or zero "
            f"(limit {MAX_MASKED_FRACTION:.0%})")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.log(rates)
    z = _impute_along_ages(np.where(mask, np.nan, z), mask)
    return MortalitySurface(years, ages, z, mask, series)


# --- surface CSV -----------------------------------------------------------

def write_surface_csv(surface: MortalitySurface) -> str:
    buf = io.StringIO()
    y, a = surface.years, surface.ages
    buf.write(f"# years={y[0]}..{y[-1]} ages={a[0]}..{a[-1]} series={surface.series}\n")
    buf.write("year," + ",".join(str(int(v)) for v in a) + "\n")
    for year, row in zip(y, surface.z):
        buf.write(str(int(year)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def _parse_range(token: str, lineno: int) -> tuple[int, int]:
    try:
        lo, hi = token.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise ParseError(f"malformed range {token!r}", lineno) from None


def read_surface_csv(text: str | TextIO) -> MortalitySurface:
    if not isinstance(text, str):
        text = text.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3 or not lines[0].startswith("#"):
        raise ParseError("surface CSV needs a '# years=.. ages=..' line, a header and a body", 1)
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    if "years" not in meta or "ages" not in meta:
        raise ParseError("metadata line lacks years= or ages=", 1)
    y0, y1 = _parse_range(meta["years"], 1)
    a0, a1 = _parse_range(meta["ages"], 1)
    series = meta.get("series", "total")

    header = lines[1].split(",")
    if header[0].strip() != "year":
        raise ParseError("header must start with 'year'", 2)
    try:
        ages = [int(h) for h in header[1:]]
    except ValueError:
        raise ParseError("non-integer age label in header", 2) from None
    if ages != list(range(a0, a1 + 1)):
        raise ParseError("header ages disagree with metadata", 2)

    body = lines[2:]
    if len(body) != y1 - y0 + 1:
        raise ParseError(f"expected {y1 - y0 + 1} body rows, found {len(body)}", 3)
    years, z = [], []
    for k, line in enumerate(body):
        lineno = k + 3
        cells = line.split(",")
        if len(cells) != len(ages) + 1:
            raise ParseError(f"expected {len(ages) + 1} fields, found {len(cells)}", lineno)
        try:
            years.append(int(cells[0]))
            row = [float(c) for c in cells[1:]]
        except ValueError:
            raise ParseError("non-numeric cell", lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite cell", lineno)
        z.append(row)
    if years != list(range(y0, y1 + 1)):
        raise ParseError("body years disagree with metadata")
    return MortalitySurface(np.array(years), np.array(ages), np.array(z), series=series)


def load_surface(path, series: Series = "total",
                 year_window: tuple[int, int] | None = None,
                 age_window: tuple[int, int] | None = None,
                 include_open_age: bool = False) -> MortalitySurface:
    """Load either a surface CSV or an HMD ``Mx_1x1`` file.

    Windows are applied to HMD input at build time (ages default to 0-100)
    and to surface CSVs by slicing (default: everything).
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("# years="):
        surface = read_surface_csv(text)
        return window_surface(surface, year_window, age_window)
    table = parse_hmd_mx(text)
    return build_surface(table, series, year_window, age_window, include_open_age)


def window_surface(surface: MortalitySurface, year_window=None, age_window=None) -> MortalitySurface:
    y0, y1 = year_window or (int(surface.years[0]), int(surface.years[-1]))
    a0, a1 = age_window or (int(surface.ages[0]), int(surface.ages[-1]))
    if y0 > y1 or a0 > a1:
        raise StructureError(f"empty window years={y0}..{y1} ages={a0}..{a1}")
    if (y0 < surface.years[0] or y1 > surface.years[-1]
            or a0 < surface.ages[0] or a1 > surface.ages[-1]):
        raise StructureError(
            f"window years={y0}..{y1} ages={a0}..{a1} outside surface coverage")
    yi = slice(y0 - int(surface.years[0]), y1 - int(surface.years[0]) + 1)
    ai = slice(a0 - int(surface.ages[0]), a1 - int(surface.ages[0]) + 1)
    return MortalitySurface(surface.years[yi], surface.ages[ai], surface.z[yi, ai],
                            surface.mask[yi, ai], surface.series)

