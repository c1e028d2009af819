"""Lee-Carter and additive age-period-cohort models on a log-mortality surface.

Model parameters and residual matrices are age-major (``[age, year]``), the
usual orientation for ``ln mu_x(t)``; surfaces themselves are year-major.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ModelError, StructureError
from .surface_io import MortalitySurface


@dataclass(frozen=True, eq=False)
class LeeCarterFit:
    ages: np.ndarray
    years: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    k: np.ndarray
    residuals: np.ndarray
    sigma2: float
    explained_ratio: float

    def fitted(self) -> np.ndarray:
        """Fitted log rates, ``[age, year]``."""
        return self.alpha[:, None] + np.outer(self.beta, self.k)


@dataclass(frozen=True, eq=False)
class APCFit:
    ages: np.ndarray
    years: np.ndarray
    cohorts: np.ndarray
    m: float
    alpha_age: np.ndarray
    beta_period: np.ndarray
    gamma_cohort: np.ndarray
    residuals: np.ndarray
    constraint_record: tuple[str, ...] = field(default=())

    def gamma_for(self, cohorts: np.ndarray) -> np.ndarray:
        """Cohort effects for arbitrary birth years; unseen cohorts get 0."""
        cohorts = np.asarray(cohorts)
        idx = cohorts - self.cohorts[0]
        seen = (idx >= 0) & (idx < len(self.cohorts))
        return np.where(seen, self.gamma_cohort[np.clip(idx, 0, len(self.cohorts) - 1)], 0.0)

    def fitted(self) -> np.ndarray:
        c = self.years[None, :] - self.ages[:, None]
        return (self.m + self.alpha_age[:, None] + self.beta_period[None, :]
                + self.gamma_for(c))


@dataclass(frozen=True, eq=False)
class Forecast:
    ages: np.ndarray
    years: np.ndarray  # forecast years
    k_path: np.ndarray
    drift: float
    log_rates: np.ndarray  # [age, horizon]
    model_tag: Literal["lc", "mlc", "apc"]

    @property
    def horizon(self) -> int:
        return len(self.years)


def _check_complete(surface: MortalitySurface, min_years: int, min_ages: int) -> np.ndarray:
    if surface.mask.any():
        raise StructureError(
            f"surface has {surface.masked_count} imputed cells; models need a complete surface")
    ny, nx = surface.shape
    if ny < min_years or nx < min_ages:
        raise StructureError(
            f"surface {ny} years x {nx} ages is too small (need {min_years} x {min_ages})")
    z = surface.z.T  # [age, year]
    if not np.all(np.isfinite(z)):
        raise ModelError("surface has non-finite cells")
    return z


def lc_fit(surface: MortalitySurface) -> LeeCarterFit:
    """Classical Lee-Carter by SVD of the age-demeaned log surface."""
    z = _check_complete(surface, min_years=3, min_ages=2)
    alpha = z.mean(axis=1)
    centred = z - alpha[:, None]
    u, s, vt = np.linalg.svd(centred, full_matrices=False)
    total = float(np.sum(s * s))
    if s[0] <= 1e-14 * max(1.0, np.abs(z).max()):
        raise ModelError("age-demeaned surface is zero; beta is undefined")
    beta = u[:, 0] * s[0]
    k = vt[0].copy()
    scale = beta.sum()
    if abs(scale) < 1e-12 * np.abs(beta).sum():
        raise ModelError("leading age loading sums to zero; cannot normalize sum(beta) = 1")
    beta = beta / scale
    k = k * scale
    # Centring k moves its level into alpha.
    k_mean = k.mean()
    k = k - k_mean
    alpha = alpha + beta * k_mean
    residuals = z - alpha[:, None] - np.outer(beta, k)
    return LeeCarterFit(
        ages=surface.ages.copy(), years=surface.years.copy(),
        alpha=alpha, beta=beta, k=k, residuals=residuals,
        sigma2=float(np.mean(residuals ** 2)),
        explained_ratio=float(s[0] ** 2 / total),
    )


def _drift(path: np.ndarray) -> float:
    if len(path) < 2:
        raise ModelError("drift needs at least two fitted years")
    return float((path[-1] - path[0]) / (len(path) - 1))


def random_walk_path(path: np.ndarray, horizon: int) -> tuple[np.ndarray, float]:
    """Random walk with drift ``(k_T - k_1) / (T - 1)`` from the last value."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    d = _drift(path)
    return path[-1] + d * np.arange(1, horizon + 1), d


def lc_forecast(fit: LeeCarterFit, horizon: int) -> Forecast:
    k_path, d = random_walk_path(fit.k, horizon)
    return Forecast(
        ages=fit.ages, years=fit.years[-1] + np.arange(1, horizon + 1),
        k_path=k_path, drift=d,
        log_rates=fit.alpha[:, None] + np.outer(fit.beta, k_path),
        model_tag="lc")


# --- age-period-cohort -----------------------------------------------------

APC_CONSTRAINTS = (
    "sum(alpha_age) = 0",
    "sum(beta_period) = 0",
    "sum(gamma_cohort) = 0",
    "sum((c - mean(c)) * gamma_cohort) = 0",
)


def _apc_design(n_ages: int, n_years: int) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix over cells in ``[age, year]`` row-major order and the
    constraint matrix, for parameters ``(m, alpha, beta, gamma)``."""
    n_coh = n_ages + n_years - 1
    p = 1 + n_ages + n_years + n_coh
    xi, ti = np.meshgrid(np.arange(n_ages), np.arange(n_years), indexing="ij")
    xi, ti = xi.ravel(), ti.ravel()
    ci = ti - xi + (n_ages - 1)
    rows = np.arange(xi.size)
    design = np.zeros((xi.size, p))
    design[:, 0] = 1.0
    design[rows, 1 + xi] = 1.0
    design[rows, 1 + n_ages + ti] = 1.0
    design[rows, 1 + n_ages + n_years + ci] = 1.0

    k = np.zeros((4, p))
    k[0, 1:1 + n_ages] = 1.0
    k[1, 1 + n_ages:1 + n_ages + n_years] = 1.0
    k[2, 1 + n_ages + n_years:] = 1.0
    c = np.arange(n_coh, dtype=float)
    k[3, 1 + n_ages + n_years:] = c - c.mean()
    return design, k


def apc_fit(surface: MortalitySurface) -> APCFit:
    """Least squares for ``m + alpha_x + beta_t + gamma_(t-x)`` under zero-sum
    constraints on each effect and a zero linear trend on the cohort effect.

    The constrained problem is solved through the KKT system
    ``[[X'X, K'], [K, 0]] [theta, lambda] = [X'y, 0]``.
    """
    z = _check_complete(surface, min_years=3, min_ages=3)
    n_ages, n_years = z.shape
    design, cons = _apc_design(n_ages, n_years)
    p = design.shape[1]
    kkt = np.zeros((p + 4, p + 4))
    kkt[:p, :p] = design.T @ design
    kkt[:p, p:] = cons.T
    kkt[p:, :p] = cons
    rhs = np.concatenate([design.T @ z.ravel(), np.zeros(4)])
    if np.linalg.matrix_rank(kkt) < p + 4:
        raise ModelError("APC design is rank deficient beyond the age-period-cohort collinearity")
    theta = np.linalg.solve(kkt, rhs)[:p]

    alpha = theta[1:1 + n_ages]
    beta = theta[1 + n_ages:1 + n_ages + n_years]
    gamma = theta[1 + n_ages + n_years:]
    residuals = z - (design @ theta).reshape(n_ages, n_years)
    return APCFit(
        ages=surface.ages.copy(), years=surface.years.copy(),
        cohorts=np.arange(surface.years[0] - surface.ages[-1],
                          surface.years[-1] - surface.ages[0] + 1),
        m=float(theta[0]), alpha_age=alpha, beta_period=beta, gamma_cohort=gamma,
        residuals=residuals, constraint_record=APC_CONSTRAINTS)


def apc_forecast(fit: APCFit, horizon: int) -> Forecast:
    """Period effect by random walk with drift; observed cohorts keep their
    fitted effect, cohorts born after the data get 0."""
    beta_path, d = random_walk_path(fit.beta_period, horizon)
    years = fit.years[-1] + np.arange(1, horizon + 1)
    gamma = fit.gamma_for(years[None, :] - fit.ages[:, None])
    log_rates = fit.m + fit.alpha_age[:, None] + beta_path[None, :] + gamma
    return Forecast(ages=fit.ages, years=years, k_path=beta_path, drift=d,
                    log_rates=log_rates, model_tag="apc")


# --- diagnostics & export --------------------------------------------------

@dataclass(frozen=True)
class FitMetrics:
    rmse: float
    mae: float
    explained_ratio: float


def fitted_values(fit) -> np.ndarray:
    """Fitted log rates ``[age, year]`` of any model fit (LC, APC or MLC)."""
    return fit.fitted()


def fit_metrics(fit, surface: MortalitySurface) -> FitMetrics:
    """Residual summaries on the log scale.

    ``explained_ratio`` is ``1 - SS_res / SS`` where ``SS`` is the sum of
    squares of the surface around its per-age means; for Lee-Carter it equals
    the leading singular value's energy share.
    """
    z = surface.z.T
    fitted = fitted_values(fit)
    if fitted.shape != z.shape:
        raise StructureError(f"fit shape {fitted.shape} does not match surface {z.shape}")
    r = z - fitted
    ss = float(np.sum((z - z.mean(axis=1, keepdims=True)) ** 2))
    ss_res = float(np.sum(r ** 2))
    ratio = 1.0 if ss == 0 else 1.0 - ss_res / ss
    return FitMetrics(rmse=float(np.sqrt(np.mean(r ** 2))), mae=float(np.mean(np.abs(r))),
                      explained_ratio=ratio)


def _csv(header: str, *columns) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in zip(*columns):
        buf.write(",".join(str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))
                           for v in row) + "\n")
    return buf.getvalue()


def lc_csv_blocks(fit: LeeCarterFit) -> dict[str, str]:
    return {
        "age_alpha_beta": _csv("age,alpha,beta", fit.ages, fit.alpha, fit.beta),
        "year_k": _csv("year,k", fit.years, fit.k),
    }


def apc_csv_blocks(fit: APCFit) -> dict[str, str]:
    return {
        "age_alpha": _csv("age,alpha", fit.ages, fit.alpha_age),
        "year_beta": _csv("year,beta", fit.years, fit.beta_period),
        "cohort_gamma": _csv("cohort,gamma", fit.cohorts, fit.gamma_cohort),
        "m": f"m\n{fit.m!r}\n",
    }


def forecast_csv(fc: Forecast) -> str:
    buf = io.StringIO()
    buf.write("year,age,log_rate,rate\n")
    for h, year in enumerate(fc.years):
        for a, age in enumerate(fc.ages):
            v = float(fc.log_rates[a, h])
            buf.write(f"{int(year)},{int(age)},{v!r},{float(np.exp(v))!r}\n")
    return buf.getvalue()


def forecast_path_csv(fc: Forecast) -> str:
    return _csv("year,k", fc.years, fc.k_path)
