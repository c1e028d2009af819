"""Discrete differential geometry on a mortality surface.

Every grid point ``p_ij = (t_i, x_j, z_ij)`` gets four short three-point
curves through it:

    l1  (i-1, j-1) -> (i, j) -> (i+1, j+1)    cohort diagonal
    l2  (i-1, j+1) -> (i, j) -> (i+1, j-1)    anti-diagonal
    l3  (i-1, j)   -> (i, j) -> (i+1, j)      period direction
    l4  (i, j-1)   -> (i, j) -> (i, j+1)      age direction

For each curve we estimate a unit tangent and a curvature vector from a
chord-length parameterization ``s0 = 0 < s1 < s2 = 1``.  The surface normal
is the unit vector least aligned with the four tangents, and the normal
curvature along curve ``k`` is the projection of its curvature vector on
that normal.

All curve functions accept points of shape ``(..., 3)`` so that the same
code evaluates a single curve or a whole grid at once.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateCurveError, NumericError, StructureError
from .surface_io import MortalitySurface

Padding = Literal["zero", "none"]

DEGENERATE_GAP = 1e-9

# (di, dj) offsets of the first and last point of l1..l4; the middle point is (0, 0).
CURVE_OFFSETS = (
    ((-1, -1), (1, 1)),
    ((-1, 1), (1, -1)),
    ((-1, 0), (1, 0)),
    ((0, -1), (0, 1)),
)
# Alternative skewed l4 (p[i, j+1], p[i, j], p[i+1, j-1]); it is not a straight
# grid line and is kept only for comparison runs.
SKEWED_L4_OFFSETS = ((0, 1), (1, -1))


class Curve3(NamedTuple):
    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray


def _as_curve(c) -> Curve3:
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in c)
    return Curve3(p0, p1, p2)


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def _unit(v: np.ndarray) -> np.ndarray:
    n = _norm(v)
    if np.any(n == 0):
        raise DegenerateCurveError("zero-length tangent")
    return v / n[..., None]


def _ls_derivative(sa, s1, sb, fa, f1, fb):
    """Least-squares slope of a line through ``(s1, f1)`` fitted to the two
    neighbouring samples; ``s`` arguments broadcast against ``f[..., 0]``."""
    a = np.asarray(sa - s1)[..., None]
    b = np.asarray(sb - s1)[..., None]
    return (a * (fa - f1) + b * (fb - f1)) / (a * a + b * b)


def discrete_parameters(c) -> tuple:
    """Chord-length parameters ``(0, s1, 1)`` of a three-point curve."""
    p0, p1, p2 = _as_curve(c)
    d0 = _norm(p1 - p0)
    d1 = _norm(p2 - p1)
    if np.any(d0 == 0) or np.any(d1 == 0):
        raise DegenerateCurveError("curve has a zero-length segment")
    s1 = d0 / (d0 + d1)
    return np.zeros_like(s1), s1, np.ones_like(s1)


def tangent_mid(c) -> np.ndarray:
    """Unnormalized tangent at the middle point."""
    p0, p1, p2 = _as_curve(c)
    s0, s1, s2 = discrete_parameters((p0, p1, p2))
    return _ls_derivative(s0, s1, s2, p0, p1, p2)


def tangent_endpoint(c, which: Literal["start", "end"]) -> np.ndarray:
    """One-sided difference quotient on the first or second segment."""
    p0, p1, p2 = _as_curve(c)
    s0, s1, s2 = discrete_parameters((p0, p1, p2))
    if which == "start":
        return (p1 - p0) / (s1 - s0)[..., None]
    if which == "end":
        return (p2 - p1) / (s2 - s1)[..., None]
    raise ValueError(f"which must be 'start' or 'end', not {which!r}")


def curvature_vector(c) -> np.ndarray:
    """Derivative of the unit tangent divided by the speed at the middle point.

    The unit tangent is sampled three times: the two one-sided quotients,
    each located at the parameter midpoint of its own segment (where a
    difference quotient is second-order accurate), and the least-squares
    tangent at ``s1``.  The same least-squares slope formula then
    differentiates that vector-valued sample.
    """
    p0, p1, p2 = _as_curve(c)
    s0, s1, s2 = discrete_parameters((p0, p1, p2))
    t_mid = _ls_derivative(s0, s1, s2, p0, p1, p2)
    speed = _norm(t_mid)
    if np.any(speed == 0):
        raise DegenerateCurveError("zero-length tangent")
    v_start = _unit((p1 - p0) / (s1 - s0)[..., None])
    v_end = _unit((p2 - p1) / (s2 - s1)[..., None])
    v_mid = t_mid / speed[..., None]
    dv = _ls_derivative(0.5 * (s0 + s1), s1, 0.5 * (s1 + s2), v_start, v_mid, v_end)
    return dv / speed[..., None]


class NormalEstimate(NamedTuple):
    normal: np.ndarray
    residual: np.ndarray | float
    degenerate: np.ndarray | bool


def _orient(n: np.ndarray) -> np.ndarray:
    """Flip so z >= 0; exact ties fall back to t >= 0, then x >= 0."""
    t, x, z = n[..., 0], n[..., 1], n[..., 2]
    flip = (z < 0) | ((z == 0) & ((t < 0) | ((t == 0) & (x < 0))))
    return np.where(flip[..., None], -n, n)


def estimate_normal(tangents) -> NormalEstimate:
    """Unit vector minimizing ``sum_k (N . V_k)^2``.

    ``tangents`` has shape ``(..., 4, 3)``.  The minimizer is the eigenvector
    of ``M = sum_k V_k V_k^T`` for its smallest eigenvalue, which is also the
    minimum value (returned as ``residual``).
    """
    v = np.asarray(tangents, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NumericError("non-finite tangent vector")
    m = np.einsum("...ki,...kj->...ij", v, v)
    w, vecs = np.linalg.eigh(m)
    n = _orient(vecs[..., :, 0])
    residual = np.maximum(w[..., 0], 0.0)
    degenerate = (w[..., 1] - w[..., 0]) < DEGENERATE_GAP
    if n.ndim == 1:
        return NormalEstimate(n, float(residual), bool(degenerate))
    return NormalEstimate(n, residual, degenerate)


def normal_curvature(normal, cv) -> np.ndarray | float:
    out = np.sum(np.asarray(normal, dtype=float) * np.asarray(cv, dtype=float), axis=-1)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite normal curvature")
    return out


# --- grids -----------------------------------------------------------------

def _embed(t: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return np.stack([tt, xx, z], axis=-1)


def _pad_points(t: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Embedded grid with one ring of ghost points at z = 0 whose (t, x)
    coordinates continue the grid spacing."""
    def extend(a):
        if len(a) > 1:
            lo, hi = a[0] - (a[1] - a[0]), a[-1] + (a[-1] - a[-2])
        else:
            lo, hi = a[0] - 1.0, a[0] + 1.0
        return np.concatenate([[lo], a, [hi]])
    zp = np.zeros((z.shape[0] + 2, z.shape[1] + 2))
    zp[1:-1, 1:-1] = z
    return _embed(extend(t), extend(x), zp)


def _curve_offsets(skewed_l4: bool):
    return CURVE_OFFSETS[:3] + (SKEWED_L4_OFFSETS,) if skewed_l4 else CURVE_OFFSETS


def neighborhood_curves(surface: MortalitySurface, i: int, j: int, padding: bool = False,
                        skewed_l4: bool = False,
                        scale: Sequence[float] = (1.0, 1.0, 1.0)) -> tuple[Curve3, ...]:
    """The four curves l1..l4 through grid point ``(i, j)``.

    With ``padding`` the boundary points are allowed and refer to zero-z
    ghost points outside the grid.
    """
    ny, nx = surface.shape
    t = surface.years.astype(float) * scale[0]
    x = surface.ages.astype(float) * scale[1]
    z = surface.z * scale[2]
    if padding:
        if not (0 <= i < ny and 0 <= j < nx):
            raise IndexError(f"({i}, {j}) outside a {ny}x{nx} grid")
        pts, oi, oj = _pad_points(t, x, z), i + 1, j + 1
    else:
        if not (1 <= i <= ny - 2 and 1 <= j <= nx - 2):
            raise IndexError(f"({i}, {j}) is not an interior point of a {ny}x{nx} grid")
        pts, oi, oj = _embed(t, x, z), i, j
    return tuple(
        Curve3(pts[oi + a[0], oj + a[1]], pts[oi, oj], pts[oi + b[0], oj + b[1]])
        for a, b in _curve_offsets(skewed_l4))


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Normal curvatures NC1..NC4 on the covered grid points.

    Arrays are year-major like the surface: ``nc[k, i, j]`` is curve ``k+1``
    at ``years[i]``, ``ages[j]``.  ``tangents`` and ``curvature_vectors`` have
    shape ``(ny, nx, 4, 3)``; ``normals`` ``(ny, nx, 3)``.
    """

    years: np.ndarray
    ages: np.ndarray
    nc: np.ndarray
    tangents: np.ndarray
    curvature_vectors: np.ndarray
    normals: np.ndarray
    residual: np.ndarray
    degenerate: np.ndarray
    padding: str = "zero"

    @property
    def shape(self) -> tuple[int, int]:
        return self.nc.shape[1:]

    def cohorts(self) -> np.ndarray:
        return self.years[:, None] - self.ages[None, :]


def grid_curvature(t, x, z, padding: Padding = "zero", skewed_l4: bool = False) -> dict:
    """Frames and normal curvatures on a rectangular grid with coordinates
    ``t`` (rows) and ``x`` (columns) and heights ``z``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] < 3 or z.shape[1] < 3:
        raise StructureError(f"curvature needs at least a 3x3 grid, got shape {z.shape}")
    if padding == "zero":
        pts = _pad_points(t, x, z)
    elif padding == "none":
        pts = _embed(t, x, z)
    else:
        raise ValueError(f"padding must be 'zero' or 'none', not {padding!r}")
    ny, nx = pts.shape[0] - 2, pts.shape[1] - 2
    centre = pts[1:-1, 1:-1]

    tangents, cvs = [], []
    for (a, b) in _curve_offsets(skewed_l4):
        p0 = pts[1 + a[0]:1 + a[0] + ny, 1 + a[1]:1 + a[1] + nx]
        p2 = pts[1 + b[0]:1 + b[0] + ny, 1 + b[1]:1 + b[1] + nx]
        curve = (p0, centre, p2)
        tangents.append(_unit(tangent_mid(curve)))
        cvs.append(curvature_vector(curve))
    tangents = np.stack(tangents, axis=-2)
    cvs = np.stack(cvs, axis=-2)
    est = estimate_normal(tangents)
    nc = np.einsum("...kd,...d->k...", cvs, est.normal)
    if not np.all(np.isfinite(nc)):
        raise NumericError("non-finite normal curvature")
    return dict(nc=nc, tangents=tangents, curvature_vectors=cvs, normals=est.normal,
                residual=np.asarray(est.residual), degenerate=np.asarray(est.degenerate))


def curvature_field(surface: MortalitySurface, padding: Padding = "zero",
                    scale: Sequence[float] = (1.0, 1.0, 1.0),
                    skewed_l4: bool = False) -> CurvatureField:
    """Normal curvatures of ``surface``.

    ``padding="zero"`` covers every grid point using zero-height ghost cells;
    ``padding="none"`` covers interior points only.  ``scale`` multiplies the
    (year, age, log-rate) axes before embedding.
    """
    st, sx, sz = (float(s) for s in scale)
    if min(st, sx, sz) <= 0:
        raise ValueError("axis scale factors must be positive")
    ny, nx = surface.shape
    if ny < 3 or nx < 3:
        raise StructureError(f"curvature needs at least a 3x3 surface, got {ny}x{nx}")
    res = grid_curvature(surface.years * st, surface.ages * sx, surface.z * sz,
                         padding, skewed_l4)
    years, ages = surface.years, surface.ages
    if padding == "none":
        years, ages = years[1:-1], ages[1:-1]
    return CurvatureField(years=years, ages=ages, padding=padding, **res)


def write_field_csv(field: CurvatureField) -> str:
    buf = io.StringIO()
    buf.write("year,age,nc1,nc2,nc3,nc4,residual,degenerate_flag\n")
    for i, y in enumerate(field.years):
        for j, a in enumerate(field.ages):
            nc = field.nc[:, i, j]
            buf.write(f"{int(y)},{int(a)},{float(nc[0])!r},{float(nc[1])!r},{float(nc[2])!r},{float(nc[3])!r},"
                      f"{float(field.residual[i, j])!r},{int(field.degenerate[i, j])}\n")
    return buf.getvalue()
