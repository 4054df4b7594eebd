"""Synthetic data-generating processes, their true conditional laws, and oracles.

Four regression scenarios (asymmetric, bimodal, heteroscedastic,
homoscedastic) and one multiclass logistic scenario.  Each exposes exact
conditional densities/CDFs for oracle bands and conditional-coverage
metrics, plus oracle density models that plug into the calibration
pipelines in place of fitted estimators.

Parameter conventions (the generating formulas leave both open):
``Gamma(a, b)`` is read as shape ``a`` and rate ``b``; the second
argument of ``N(mu, v)`` is read as a *variance* by default, with the
standard-deviation reading available via ``noise_param="sd"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .core import Band, Sample, YGrid
from .estimators import CdfCurve, DensityCurve, _cdf_rows
from .cd_split import threshold_band

__all__ = [
    "REGRESSION_KINDS",
    "CLASSIFICATION_KIND",
    "SCENARIO_KINDS",
    "DEFAULT_BETA",
    "Scenario",
    "TrueConditional",
    "OracleCde",
    "sample_scenario",
    "sample_targets",
    "true_density",
    "true_cdf",
    "oracle_interval",
    "oracle_hpd_band",
    "true_label_probs",
    "default_grid",
    "stream_seed",
]

REGRESSION_KINDS = ("asymmetric", "bimodal", "heteroscedastic", "homoscedastic")
CLASSIFICATION_KIND = "logistic-classification"
SCENARIO_KINDS = REGRESSION_KINDS + (CLASSIFICATION_KIND,)

DEFAULT_BETA = (-6.0, -5.0, -1.5, 0.0, 1.5, 5.0, 6.0)

# Covariate ranges of the uniform designs; the classification design is
# standard normal.
_COVARIATE_RANGE = {
    "asymmetric": (-5.0, 5.0),
    "bimodal": (-1.5, 1.5),
    "heteroscedastic": (-5.0, 5.0),
    "homoscedastic": (-5.0, 5.0),
}

_GRID_SPAN = {
    "asymmetric": (-30.0, 30.0),
    "bimodal": (-12.0, 12.0),
    "heteroscedastic": (-33.0, 33.0),
    "homoscedastic": (-33.0, 33.0),
}


@dataclass(frozen=True)
class Scenario:
    """A data-generating process: scenario kind plus design dimensions."""

    kind: str
    d: int = 1
    n_classes: int = 7
    beta: tuple[float, ...] = DEFAULT_BETA
    noise_param: str = "variance"  # reading of N(mu, .): "variance" or "sd"

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind: {self.kind!r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.noise_param not in ("variance", "sd"):
            raise ValueError("noise_param must be 'variance' or 'sd'")
        if self.is_classification and len(self.beta) != self.n_classes:
            raise ValueError("beta must have one entry per class")

    @property
    def is_classification(self) -> bool:
        return self.kind == CLASSIFICATION_KIND


def stream_seed(master: int, *path: int) -> int:
    """Deterministic child seed derived from a master seed and a path.

    Uses the splitmix-style hashing of ``numpy.random.SeedSequence`` so
    replicate streams are independent and order-free: the seed for a given
    path never depends on which other paths were drawn.
    """
    state = np.random.SeedSequence([int(master), *[int(p) for p in path]])
    return int(state.generate_state(1, np.uint64)[0])


def _scale(scenario: Scenario, second_param: float) -> float:
    if scenario.noise_param == "sd":
        return second_param
    return math.sqrt(second_param)


def _bimodal_parts(x1: float) -> tuple[float, float, float]:
    f = (x1 - 1.0) ** 2 * (x1 + 1.0)
    g = 2.0 * math.sqrt(x1 + 0.5) if x1 >= -0.5 else 0.0
    sigma2 = 0.25 + abs(x1)
    return f, g, sigma2


def sample_scenario(scenario: Scenario, n: int, seed: int) -> list[Sample]:
    """Draw n i.i.d. samples from the scenario; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if scenario.is_classification:
        X = rng.standard_normal((n, scenario.d))
        probs = _label_prob_rows(X[:, 0], np.asarray(scenario.beta))
        u = rng.random(n)
        y = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
        return [Sample(X[i], float(y[i])) for i in range(n)]
    lo, hi = _COVARIATE_RANGE[scenario.kind]
    X = rng.uniform(lo, hi, size=(n, scenario.d))
    y = _draw_targets(scenario, X[:, 0], rng)
    return [Sample(X[i], y[i]) for i in range(n)]


def sample_targets(scenario: Scenario, x, n: int, seed: int) -> np.ndarray:
    """Draw n targets from the conditional law at a fixed feature vector."""
    if scenario.is_classification:
        raise ValueError("conditional target sampling is for regression scenarios")
    x1 = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
    rng = np.random.default_rng(seed)
    return _draw_targets(scenario, np.full(n, x1), rng)


def _draw_targets(scenario: Scenario, x1: np.ndarray, rng) -> np.ndarray:
    kind = scenario.kind
    if kind == "homoscedastic":
        return rng.normal(x1, _scale(scenario, 1.0))
    if kind == "heteroscedastic":
        sds = np.asarray([_scale(scenario, 1.0 + abs(v)) for v in x1])
        return rng.normal(x1, sds)
    if kind == "asymmetric":
        a = 1.0 + 2.0 * np.abs(x1)
        return 5.0 * x1 + rng.gamma(shape=a, scale=1.0 / a)
    if kind == "bimodal":
        parts = [_bimodal_parts(v) for v in x1]
        f = np.asarray([p[0] for p in parts])
        g = np.asarray([p[1] for p in parts])
        sd = np.asarray([_scale(scenario, p[2]) for p in parts])
        sign = np.where(rng.random(x1.size) < 0.5, -1.0, 1.0)
        return rng.normal(f + sign * g, sd)
    raise ValueError(f"unknown scenario kind: {kind!r}")


def _label_prob_rows(x1: np.ndarray, beta: np.ndarray) -> np.ndarray:
    logits = np.outer(x1, beta)
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def true_label_probs(x, beta=DEFAULT_BETA) -> np.ndarray:
    """Exact class probabilities of the logistic design at a feature vector.

    Class i has logit ``beta[i] * x1``; probabilities are their softmax.
    """
    x1 = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
    return _label_prob_rows(np.asarray([x1]), np.asarray(beta, dtype=float))[0]


class TrueConditional:
    """Exact conditional law of the target at a fixed feature vector.

    Exposes the density, CDF and quantile function for regression
    scenarios, and class probabilities for the classification scenario.
    """

    def __init__(self, scenario: Scenario, x):
        self.scenario = scenario
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        self.x1 = float(self.x[0])

    def _require_regression(self):
        if self.scenario.is_classification:
            raise ValueError("density/CDF queries require a regression scenario")

    def pdf(self, y) -> np.ndarray:
        self._require_regression()
        y = np.asarray(y, dtype=float)
        kind = self.scenario.kind
        x1 = self.x1
        if kind == "homoscedastic":
            return stats.norm.pdf(y, loc=x1, scale=_scale(self.scenario, 1.0))
        if kind == "heteroscedastic":
            return stats.norm.pdf(
                y, loc=x1, scale=_scale(self.scenario, 1.0 + abs(x1))
            )
        if kind == "asymmetric":
            a = 1.0 + 2.0 * abs(x1)
            return stats.gamma.pdf(y - 5.0 * x1, a, scale=1.0 / a)
        f, g, sigma2 = _bimodal_parts(x1)
        sd = _scale(self.scenario, sigma2)
        return 0.5 * stats.norm.pdf(y, f - g, sd) + 0.5 * stats.norm.pdf(
            y, f + g, sd
        )

    def cdf(self, y) -> np.ndarray:
        self._require_regression()
        y = np.asarray(y, dtype=float)
        kind = self.scenario.kind
        x1 = self.x1
        if kind == "homoscedastic":
            return stats.norm.cdf(y, loc=x1, scale=_scale(self.scenario, 1.0))
        if kind == "heteroscedastic":
            return stats.norm.cdf(
                y, loc=x1, scale=_scale(self.scenario, 1.0 + abs(x1))
            )
        if kind == "asymmetric":
            a = 1.0 + 2.0 * abs(x1)
            return stats.gamma.cdf(y - 5.0 * x1, a, scale=1.0 / a)
        f, g, sigma2 = _bimodal_parts(x1)
        sd = _scale(self.scenario, sigma2)
        return 0.5 * stats.norm.cdf(y, f - g, sd) + 0.5 * stats.norm.cdf(
            y, f + g, sd
        )

    def ppf(self, p: float) -> float:
        self._require_regression()
        if not 0.0 < p < 1.0:
            raise ValueError("p must be in (0, 1)")
        kind = self.scenario.kind
        x1 = self.x1
        if kind == "homoscedastic":
            return float(stats.norm.ppf(p, loc=x1, scale=_scale(self.scenario, 1.0)))
        if kind == "heteroscedastic":
            return float(
                stats.norm.ppf(p, loc=x1, scale=_scale(self.scenario, 1.0 + abs(x1)))
            )
        if kind == "asymmetric":
            a = 1.0 + 2.0 * abs(x1)
            return float(5.0 * x1 + stats.gamma.ppf(p, a, scale=1.0 / a))
        lo, hi = _GRID_SPAN["bimodal"]
        return float(brentq(lambda y: self.cdf(y) - p, lo, hi))

    def label_probs(self) -> np.ndarray:
        if not self.scenario.is_classification:
            raise ValueError("label probabilities require the classification scenario")
        return true_label_probs(self.x, self.scenario.beta)


def default_grid(scenario: Scenario, size: int = 1000) -> YGrid:
    """Default target grid wide enough to hold all of a scenario's mass."""
    if scenario.is_classification:
        raise ValueError("the classification scenario has no target grid")
    lo, hi = _GRID_SPAN[scenario.kind]
    return YGrid.uniform(lo, hi, size)


def true_density(scenario: Scenario, x, grid: YGrid) -> DensityCurve:
    """Exact conditional density evaluated on (and normalized to) a grid."""
    pdf = TrueConditional(scenario, x).pdf(grid.points)
    return DensityCurve.from_raw(grid, pdf)


def true_cdf(scenario: Scenario, x, grid: YGrid) -> CdfCurve:
    """Exact conditional CDF on a grid, normalized to the grid's span."""
    truth = TrueConditional(scenario, x)
    vals = truth.cdf(grid.points)
    lo, span = vals[0], vals[-1] - vals[0]
    if span <= 0:
        raise ValueError("grid carries no probability mass")
    return CdfCurve(grid, (vals - lo) / span)


def oracle_interval(scenario: Scenario, x, alpha: float) -> Band:
    """Central interval of the true law: its alpha/2 and 1 - alpha/2 quantiles."""
    truth = TrueConditional(scenario, x)
    return Band(((truth.ppf(alpha / 2.0), truth.ppf(1.0 - alpha / 2.0)),))


def oracle_hpd_band(scenario: Scenario, x, alpha: float, grid: YGrid) -> Band:
    """Smallest grid-thresholded band holding mass at least 1 - alpha.

    Bisects the density cutoff: the returned band thresholds the true
    density at the largest cutoff whose level set still carries the
    requested mass (so the band's mass overshoots 1 - alpha by at most
    the mass of the boundary grid cells).
    """
    density = true_density(scenario, x, grid)
    vals = density.values
    total = vals.sum()
    target = 1.0 - alpha

    def mass(t: float) -> float:
        return vals[vals >= t].sum() / total

    t_lo, t_hi = 0.0, float(vals.max())
    if mass(t_hi) >= target:
        t_lo = t_hi
    for _ in range(80):
        mid = (t_lo + t_hi) / 2.0
        if mass(mid) >= target:
            t_lo = mid
        else:
            t_hi = mid
    return threshold_band(density, t_lo)


class OracleCde:
    """Oracle density model: exact conditional laws behind the estimator API.

    Drop-in replacement for :class:`~cdbands.estimators.CdeModel` in the
    calibration pipelines, used to study the methods with estimation
    error removed.
    """

    def __init__(self, scenario: Scenario, grid: YGrid | None = None):
        if scenario.is_classification:
            raise ValueError("oracle density models require a regression scenario")
        self.scenario = scenario
        self.grid = grid if grid is not None else default_grid(scenario)

    def density_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        rows = np.empty((X.shape[0], self.grid.size))
        for i in range(X.shape[0]):
            rows[i] = true_density(self.scenario, X[i], self.grid).values
        return rows

    def density(self, x) -> DensityCurve:
        return DensityCurve(self.grid, self.density_matrix(x)[0])

    def cdf_matrix(self, X) -> np.ndarray:
        return _cdf_rows(self.density_matrix(X), self.grid.points)

    def cdf(self, x) -> CdfCurve:
        return CdfCurve(self.grid, self.cdf_matrix(x)[0])
