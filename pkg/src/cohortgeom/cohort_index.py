"""Cohort Effect Index: curvature disagreement aggregated along birth cohorts.

For every covered grid point the contribution is ``|NC1 - NC2|``, the gap
between the normal curvature along the cohort diagonal and across it.  A
cohort is the diagonal ``year - age = m``.
"""

from __future__ import annotations

import io
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Callable, Literal

import numpy as np

from .errors import NumericError, StructureError
from .geometry import CurvatureField

DEFAULT_MIN_SUPPORT = 30
DEFAULT_BIRTH_YEAR_LAG = 40


@dataclass(frozen=True)
class TruncationPolicy:
    min_support: int = 0
    max_birth_year: int | None = None

    @classmethod
    def default_for(cls, last_year: int) -> "TruncationPolicy":
        return cls(DEFAULT_MIN_SUPPORT, last_year - DEFAULT_BIRTH_YEAR_LAG)


@dataclass(frozen=True)
class TruncationRecord:
    policy: TruncationPolicy
    removed_head: tuple[int, ...]
    removed_tail: tuple[int, ...]
    removed_other: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class CEISeries:
    cohorts: np.ndarray
    cei: np.ndarray
    support: np.ndarray
    variant: Literal["sum", "mean"] = "sum"
    truncation: TruncationRecord | None = None

    def __len__(self) -> int:
        return len(self.cohorts)

    def as_dict(self) -> dict[int, float]:
        return {int(m): float(v) for m, v in zip(self.cohorts, self.cei)}

    def value(self, cohort: int, default: float = 0.0) -> float:
        k = np.searchsorted(self.cohorts, cohort)
        if k < len(self.cohorts) and self.cohorts[k] == cohort:
            return float(self.cei[k])
        return default

    def lookup(self, cohorts: np.ndarray, default: float = 0.0) -> np.ndarray:
        """Vectorized ``value`` for an array of birth years."""
        cohorts = np.asarray(cohorts)
        if len(self.cohorts) == 0:
            return np.full(cohorts.shape, default, dtype=float)
        k = np.clip(np.searchsorted(self.cohorts, cohorts), 0, len(self.cohorts) - 1)
        hit = self.cohorts[k] == cohorts
        return np.where(hit, self.cei[k], default)


def cei_series(field: CurvatureField) -> CEISeries:
    """Sum of ``|NC1 - NC2|`` over each cohort diagonal of the field."""
    ny, nx = field.shape
    if ny == 0 or nx == 0:
        raise StructureError("empty curvature field")
    gap = np.abs(field.nc[0] - field.nc[1])
    cohorts = field.cohorts()
    groups: dict[int, list[float]] = defaultdict(list)
    for m, g in zip(cohorts.ravel().tolist(), gap.ravel().tolist()):
        groups[m].append(g)
    keys = sorted(groups)
    # fsum is exactly rounded, so the result does not depend on visiting order.
    return CEISeries(
        cohorts=np.array(keys, dtype=int),
        cei=np.array([math.fsum(groups[m]) for m in keys]),
        support=np.array([len(groups[m]) for m in keys], dtype=int),
        variant="sum",
    )


def cei_mean_series(field: CurvatureField) -> CEISeries:
    """Support-normalized CEI: the average gap per grid point of the cohort."""
    s = cei_series(field)
    keep = s.support > 0
    return CEISeries(s.cohorts[keep], s.cei[keep] / s.support[keep], s.support[keep],
                     variant="mean")


def truncate_series(series: CEISeries, policy: TruncationPolicy) -> CEISeries:
    """Drop cohorts with too little support or born too late."""
    keep = series.support >= policy.min_support
    if policy.max_birth_year is not None:
        keep &= series.cohorts <= policy.max_birth_year
    if not keep.any():
        raise StructureError(f"truncation policy {policy} removes every cohort")
    kept_idx = np.flatnonzero(keep)
    first, last = kept_idx[0], kept_idx[-1]
    removed = series.cohorts[~keep]
    record = TruncationRecord(
        policy=policy,
        removed_head=tuple(int(m) for m in series.cohorts[:first]),
        removed_tail=tuple(int(m) for m in series.cohorts[last + 1:]),
        removed_other=tuple(int(m) for m in removed
                            if series.cohorts[first] < m < series.cohorts[last]),
    )
    return replace(series, cohorts=series.cohorts[keep], cei=series.cei[keep],
                   support=series.support[keep], truncation=record)


def detect_plateaus(series: CEISeries, window: int = 1,
                    quantile: float = 0.9) -> list[tuple[int, int, float]]:
    """Maximal runs of consecutive cohorts whose CEI is strictly above the
    series' ``quantile``, at least ``window`` cohorts long."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    if len(series) == 0:
        return []
    threshold = np.quantile(series.cei, quantile)
    above = series.cei > threshold
    runs: list[tuple[int, int, float]] = []

    def close(start: int, stop: int) -> None:
        if stop - start >= window:
            runs.append((int(series.cohorts[start]), int(series.cohorts[stop - 1]),
                         float(np.mean(series.cei[start:stop]))))

    start = None
    for k in range(len(series)):
        if not above[k]:
            if start is not None:
                close(start, k)
            start = None
        elif start is None:
            start = k
        elif series.cohorts[k] != series.cohorts[k - 1] + 1:
            close(start, k)
            start = k
    if start is not None:
        close(start, len(series))
    return runs


# --- output ----------------------------------------------------------------

def write_cei_csv(series: CEISeries, retained: CEISeries | None = None) -> str:
    """``birth_year,cei,support,truncated_flag``; the flag marks cohorts of
    ``series`` absent from ``retained``."""
    kept = set(int(m) for m in (retained.cohorts if retained is not None else series.cohorts))
    buf = io.StringIO()
    buf.write("birth_year,cei,support,truncated_flag\n")
    for m, v, s in zip(series.cohorts, series.cei, series.support):
        buf.write(f"{int(m)},{float(v)!r},{int(s)},{int(int(m) not in kept)}\n")
    return buf.getvalue()


def format_plateaus(plateaus: list[tuple[int, int, float]]) -> str:
    lines = [f"{'start':>6} {'end':>6} {'length':>6} {'mean_cei':>14}"]
    for a, b, v in plateaus:
        lines.append(f"{a:>6} {b:>6} {b - a + 1:>6} {v:>14.6g}")
    return "\n".join(lines) + "\n"


# --- smooth-surface oracle -------------------------------------------------

Derivatives = Callable[[float, float], tuple[float, float, float, float, float]]


def _fd_derivatives(f: Callable[[float, float], float], step: float = 1e-4) -> Derivatives:
    def d(t, x):
        h = step
        f0 = f(t, x)
        ft = (f(t + h, x) - f(t - h, x)) / (2 * h)
        fx = (f(t, x + h) - f(t, x - h)) / (2 * h)
        ftt = (f(t + h, x) - 2 * f0 + f(t - h, x)) / (h * h)
        fxx = (f(t, x + h) - 2 * f0 + f(t, x - h)) / (h * h)
        ftx = (f(t + h, x + h) - f(t + h, x - h) - f(t - h, x + h) + f(t - h, x - h)) / (4 * h * h)
        return ft, fx, ftt, ftx, fxx
    return d


def smooth_normal_curvatures(derivs: Derivatives, t: float, x: float) -> tuple[float, float, float]:
    """Normal curvatures of the graph ``z = f(t, x)`` at ``(t, x)`` along the
    cohort direction and along the tangent-plane direction orthogonal to it.

    Returns ``(nc_cohort, nc_orthogonal, speed)`` where ``speed`` is the
    arc-length rate of the surface curve ``u -> (t + u, x + u, f)``.
    """
    ft, fx, ftt, ftx, fxx = derivs(t, x)
    if not all(math.isfinite(v) for v in (ft, fx, ftt, ftx, fxx)):
        raise NumericError(f"non-finite derivative at ({t}, {x})")
    w = math.sqrt(1.0 + ft * ft + fx * fx)
    normal = np.array([-ft, -fx, 1.0]) / w

    def kappa(a: float, b: float) -> float:
        first = a * a + b * b + (ft * a + fx * b) ** 2
        second = (ftt * a * a + 2 * ftx * a * b + fxx * b * b) / w
        return second / first

    tangent = np.array([1.0, 1.0, ft + fx])
    ortho = np.cross(normal, tangent)
    # A tangent vector's (t, x) components are its parameter-plane direction.
    return kappa(1.0, 1.0), kappa(ortho[0], ortho[1]), float(np.linalg.norm(tangent))


def smooth_cei_oracle(f: Callable[[float, float], float], origin: tuple[float, float],
                      interval: tuple[float, float], steps: int = 1000,
                      derivatives: Derivatives | None = None) -> float:
    """Arc-length integral of ``|NC_T - NC_N|`` along the cohort line
    ``(t0 + u, x0 + u)`` for ``u`` in ``interval``, by composite trapezoid.

    ``derivatives(t, x)`` returns ``(f_t, f_x, f_tt, f_tx, f_xx)``; central
    differences of ``f`` are used when it is omitted.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    d = derivatives or _fd_derivatives(f)
    t0, x0 = origin
    a, b = interval
    u = np.linspace(a, b, steps + 1)
    vals = np.empty_like(u)
    for k, uk in enumerate(u):
        nt, nn, speed = smooth_normal_curvatures(d, t0 + uk, x0 + uk)
        vals[k] = abs(nt - nn) * speed
    return float(np.sum((vals[1:] + vals[:-1]) * np.diff(u)) / 2.0)
