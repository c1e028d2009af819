"""Modified Lee-Carter: strip a rescaled CEI along cohort diagonals, then fit
classical Lee-Carter to what is left."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .cohort_index import CEISeries, TruncationPolicy, cei_series, truncate_series
from .geometry import CurvatureField, Padding, curvature_field
from .models import Forecast, LeeCarterFit, lc_fit, lc_forecast
from .surface_io import MortalitySurface


ZERO_CEI_RMS = 1e-12


class ScaleEstimate(NamedTuple):
    scale: float
    defined: bool


def _double_demean(a: np.ndarray) -> np.ndarray:
    return a - a.mean(axis=0, keepdims=True) - a.mean(axis=1, keepdims=True) + a.mean()


def cohort_matrix(surface: MortalitySurface, cei: CEISeries) -> np.ndarray:
    """CEI broadcast onto the surface grid by birth year; absent cohorts are 0."""
    return cei.lookup(surface.cohort_grid(), default=0.0)


def estimate_scale(surface: MortalitySurface, cei: CEISeries) -> ScaleEstimate:
    """Least-squares factor ``c`` regressing the doubly demeaned surface on
    the doubly demeaned cohort-broadcast CEI.

    When the demeaned CEI matrix is numerically zero (RMS below
    ``ZERO_CEI_RMS``) the scale is undefined; 0 is returned with
    ``defined=False``.
    """
    r = _double_demean(surface.z)
    c = _double_demean(cohort_matrix(surface, cei))
    cc = float(np.sum(c * c))
    if cc <= ZERO_CEI_RMS ** 2 * c.size:
        return ScaleEstimate(0.0, False)
    return ScaleEstimate(float(np.sum(r * c) / cc), True)


def remove_cohort_effect(surface: MortalitySurface, cei: CEISeries,
                         scale: float) -> MortalitySurface:
    if scale == 0:
        return surface
    return surface.with_z(surface.z - scale * cohort_matrix(surface, cei))


@dataclass(frozen=True, eq=False)
class MLCFit:
    scale: float
    scale_defined: bool
    cei: CEISeries
    lc: LeeCarterFit
    adjustment: np.ndarray  # [year, age], subtracted from the surface
    adjusted: MortalitySurface
    field: CurvatureField | None = None

    def fitted(self) -> np.ndarray:
        """Fitted log rates ``[age, year]`` with the cohort effect restored."""
        return self.lc.fitted() + self.adjustment.T


def mlc_fit(surface: MortalitySurface, padding: Padding = "zero",
            policy: TruncationPolicy | None = None,
            scale_axes: Sequence[float] = (1.0, 1.0, 1.0),
            cei: CEISeries | None = None) -> MLCFit:
    """Curvature field, truncated sum-CEI, scale, polished surface, Lee-Carter.

    Passing ``cei`` skips the geometry stage and uses that series as given.
    """
    field = None
    if cei is None:
        field = curvature_field(surface, padding=padding, scale=scale_axes)
        policy = policy or TruncationPolicy.default_for(int(surface.years[-1]))
        cei = truncate_series(cei_series(field), policy)
    scale, defined = estimate_scale(surface, cei)
    adjustment = scale * cohort_matrix(surface, cei)
    adjusted = remove_cohort_effect(surface, cei, scale)
    return MLCFit(scale=scale, scale_defined=defined, cei=cei, lc=lc_fit(adjusted),
                  adjustment=adjustment, adjusted=adjusted, field=field)


def mlc_forecast(fit: MLCFit, horizon: int) -> Forecast:
    """Lee-Carter forecast of the polished surface with ``scale * CEI`` added
    back for cohorts that have a CEI value."""
    fc = lc_forecast(fit.lc, horizon)
    cohorts = fc.years[None, :] - fc.ages[:, None]
    log_rates = fc.log_rates
    if fit.scale != 0:
        log_rates = log_rates + fit.scale * fit.cei.lookup(cohorts, default=0.0)
    return Forecast(ages=fc.ages, years=fc.years, k_path=fc.k_path, drift=fc.drift,
                    log_rates=log_rates, model_tag="mlc")
