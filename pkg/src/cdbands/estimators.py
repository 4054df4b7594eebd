"""Pluggable conditional estimators shared by every band method.

All estimators are built on the same k-nearest-neighbour machinery so the
methods that consume them can be compared fairly: a Gaussian-kernel
conditional density estimator (with derived CDF and inverse CDF), k-NN
regression / absolute-deviation / quantile estimators, and a multinomial
logistic classifier fitted by plain gradient descent.

Models are immutable after fitting; all prediction operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.spatial import cKDTree

from .core import (
    InsufficientDataError,
    Sample,
    YGrid,
    empirical_quantile,
    features_matrix,
    labels,
    targets,
)

__all__ = [
    "DensityCurve",
    "CdfCurve",
    "CdeModel",
    "KnnRegression",
    "KnnMad",
    "KnnQuantile",
    "SoftmaxClassifier",
    "fit_cde",
    "cde_density",
    "cde_cdf",
    "cdf_inverse",
    "cdf_value",
    "fit_regression",
    "predict_regression",
    "fit_mad",
    "predict_mad",
    "fit_quantile",
    "predict_quantile",
    "fit_classifier",
    "predict_probs",
    "default_neighbor_count",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_MIN_BANDWIDTH = 1e-6
MAD_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class DensityCurve:
    """A conditional density evaluated on a fixed target grid.

    Values are nonnegative and the trapezoid integral over the grid is 1
    (within 1e-6); build from unnormalized values with :meth:`from_raw`.
    """

    grid: YGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.points.shape:
            raise ValueError("values must match the grid shape")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite and nonnegative")
        total = np.trapezoid(vals, self.grid.points)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"density must integrate to 1, got {total}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_raw(cls, grid: YGrid, raw) -> "DensityCurve":
        raw = np.asarray(raw, dtype=float)
        total = np.trapezoid(raw, grid.points)
        if not np.isfinite(total) or total <= 0:
            raise ValueError("cannot normalize: nonpositive total mass")
        return cls(grid, raw / total)


@dataclass(frozen=True, eq=False)
class CdfCurve:
    """A conditional CDF on a fixed target grid: nondecreasing, ending at 1."""

    grid: YGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.points.shape:
            raise ValueError("values must match the grid shape")
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError("CDF values must be nondecreasing")
        if vals[0] < -1e-12 or abs(vals[-1] - 1.0) > 1e-6:
            raise ValueError("CDF must start at >= 0 and end at 1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def _cdf_rows(dens_rows: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid of density rows, clamped monotone, rescaled to 1."""
    cdf = cumulative_trapezoid(dens_rows, points, axis=-1, initial=0.0)
    cdf = np.maximum.accumulate(cdf, axis=-1)
    last = cdf[..., -1:]
    if np.any(last <= 0):
        raise ValueError("density has no mass on the grid")
    return cdf / last


def cde_cdf(density: DensityCurve) -> CdfCurve:
    """Integrate a density curve into its CDF curve."""
    vals = _cdf_rows(density.values[None, :], density.grid.points)[0]
    return CdfCurve(density.grid, vals)


def cdf_value(cdf: CdfCurve, y: float) -> float:
    """Grid-interpolated CDF at ``y``; clamps to 0 / 1 outside the grid."""
    return float(
        np.interp(y, cdf.grid.points, cdf.values, left=cdf.values[0], right=1.0)
    )


def cdf_inverse(cdf: CdfCurve, p: float) -> float:
    """Smallest grid-interpolated y with ``CDF(y) >= p``.

    ``p <= CDF(min)`` returns the grid minimum and ``p >= 1`` the grid
    maximum; in between the bracketing grid cell is interpolated linearly,
    so flat CDF stretches resolve to their left edge.
    """
    pts = cdf.grid.points
    vals = cdf.values
    if p <= vals[0]:
        return float(pts[0])
    if p >= vals[-1]:
        return float(pts[-1])
    i = int(np.searchsorted(vals, p, side="left"))
    # vals[i-1] < p <= vals[i], hence vals[i] > vals[i-1]
    frac = (p - vals[i - 1]) / (vals[i] - vals[i - 1])
    return float(pts[i - 1] + frac * (pts[i] - pts[i - 1]))


def default_neighbor_count(n: int) -> int:
    """Default neighborhood size: ceil(sqrt(n))."""
    return int(math.ceil(math.sqrt(n)))


def _check_train(x: np.ndarray, k: int) -> None:
    n = x.shape[0]
    if n == 0:
        raise InsufficientDataError("empty training set")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")


class _KnnBase:
    """Shared neighbor lookup over training features."""

    def __init__(self, x_train: np.ndarray, k: int):
        _check_train(x_train, k)
        self._x = x_train
        self.k = int(k)
        self._tree = cKDTree(x_train)

    @property
    def dim(self) -> int:
        return self._x.shape[1]

    def _check_query(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ValueError(
                f"query dimension {X.shape[1]} != training dimension {self.dim}"
            )
        return X

    def _neighbors(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training points per query row."""
        _, idx = self._tree.query(self._check_query(X), k=self.k)
        if self.k == 1:
            idx = np.atleast_1d(idx)[:, None]
        return np.atleast_2d(idx)


class CdeModel(_KnnBase):
    """k-NN Gaussian-kernel conditional density estimator on a fixed grid.

    The density at ``x`` averages Gaussian kernels centered at the targets
    of the k nearest training points in Euclidean feature distance, then
    renormalizes on the grid.  With ``bandwidth=None`` the kernel width is
    chosen per query as ``0.9 * std(neighbor targets) * k**(-1/5)``
    (floored at 1e-6); a fixed positive bandwidth overrides the rule.
    """

    def __init__(self, x_train, y_train, k: int, bandwidth: float | None, grid: YGrid):
        super().__init__(x_train, k)
        if bandwidth is not None and bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
        self._y = y_train
        self.bandwidth = bandwidth
        self.grid = grid

    def _bandwidths(self, neigh_y: np.ndarray) -> np.ndarray:
        if self.bandwidth is not None:
            return np.full(neigh_y.shape[0], float(self.bandwidth))
        h = 0.9 * neigh_y.std(axis=1) * self.k ** (-0.2)
        return np.maximum(h, _MIN_BANDWIDTH)

    def density_matrix(self, X) -> np.ndarray:
        """Normalized density values, one row per query point: (m, grid size)."""
        idx = self._neighbors(X)
        neigh_y = self._y[idx]
        h = self._bandwidths(neigh_y)
        pts = self.grid.points
        out = np.zeros((idx.shape[0], pts.size))
        for j in range(self.k):
            z = (pts[None, :] - neigh_y[:, j, None]) / h[:, None]
            out += np.exp(-0.5 * z * z)
        out /= self.k * h[:, None] * _SQRT_2PI
        totals = np.trapezoid(out, pts, axis=-1)
        if np.any(totals <= 0):
            raise ValueError("estimated density has no mass on the grid")
        return out / totals[:, None]

    def density(self, x) -> DensityCurve:
        return DensityCurve(self.grid, self.density_matrix(x)[0])

    def cdf_matrix(self, X) -> np.ndarray:
        return _cdf_rows(self.density_matrix(X), self.grid.points)

    def cdf(self, x) -> CdfCurve:
        return CdfCurve(self.grid, self.cdf_matrix(x)[0])


def fit_cde(
    train: Sequence[Sample],
    k: int | None = None,
    bandwidth: float | None = None,
    grid: YGrid | None = None,
    grid_size: int = 500,
) -> CdeModel:
    """Fit the k-NN kernel conditional density estimator.

    Defaults: ``k = ceil(sqrt(n))``; per-query Silverman-style bandwidth
    (see :class:`CdeModel`); a uniform grid of ``grid_size`` points
    spanning the training targets plus a three-bandwidth margin.
    """
    x = features_matrix(train)
    y = targets(train)
    if k is None:
        k = default_neighbor_count(len(train))
    _check_train(x, k)
    if grid is None:
        h0 = bandwidth
        if h0 is None:
            h0 = max(0.9 * y.std() * k ** (-0.2), _MIN_BANDWIDTH)
        grid = YGrid.uniform(y.min() - 3 * h0, y.max() + 3 * h0, grid_size)
    return CdeModel(x, y, k, bandwidth, grid)


def cde_density(model: CdeModel, x) -> DensityCurve:
    """Density curve of the fitted model at a single feature vector."""
    return model.density(x)


class KnnRegression(_KnnBase):
    """k-NN regression: the mean target over the k nearest neighbors."""

    def __init__(self, x_train, y_train, k: int):
        super().__init__(x_train, k)
        self._y = y_train

    def predict_batch(self, X) -> np.ndarray:
        return self._y[self._neighbors(X)].mean(axis=1)

    def predict(self, x) -> float:
        return float(self.predict_batch(x)[0])


def fit_regression(train: Sequence[Sample], k: int | None = None) -> KnnRegression:
    x = features_matrix(train)
    y = targets(train)
    if k is None:
        k = default_neighbor_count(len(train))
    return KnnRegression(x, y, k)


def predict_regression(model: KnnRegression, x) -> float:
    return model.predict(x)


class KnnMad(_KnnBase):
    """k-NN estimate of the conditional mean absolute regression deviation.

    Averages ``|y_j - r(x_j)|`` over the neighbors of the query; the
    prediction is floored at ``MAD_FLOOR`` so it can safely divide
    conformity scores.
    """

    def __init__(self, x_train, residuals, k: int):
        super().__init__(x_train, k)
        self._resid = residuals

    def predict_batch(self, X) -> np.ndarray:
        out = self._resid[self._neighbors(X)].mean(axis=1)
        return np.maximum(out, MAD_FLOOR)

    def predict(self, x) -> float:
        return float(self.predict_batch(x)[0])


def fit_mad(
    train: Sequence[Sample], regression: KnnRegression, k: int | None = None
) -> KnnMad:
    """Fit the deviation model from a regression fitted on the same data."""
    x = features_matrix(train)
    y = targets(train)
    resid = np.abs(y - regression.predict_batch(x))
    if k is None:
        k = default_neighbor_count(len(train))
    return KnnMad(x, resid, k)


def predict_mad(model: KnnMad, x) -> float:
    return model.predict(x)


class KnnQuantile(_KnnBase):
    """k-NN conditional quantiles: empirical quantile of neighbor targets."""

    def __init__(self, x_train, y_train, k: int):
        super().__init__(x_train, k)
        self._y = y_train

    def predict_batch(self, X, p: float) -> np.ndarray:
        neigh_y = self._y[self._neighbors(X)]
        if p <= 0.0:
            return neigh_y.min(axis=1)
        if p >= 1.0:
            return neigh_y.max(axis=1)
        return np.asarray([empirical_quantile(row, p) for row in neigh_y])

    def predict(self, x, p: float) -> float:
        return float(self.predict_batch(x, p)[0])


def fit_quantile(train: Sequence[Sample], k: int | None = None) -> KnnQuantile:
    x = features_matrix(train)
    y = targets(train)
    if k is None:
        k = default_neighbor_count(len(train))
    return KnnQuantile(x, y, k)


def predict_quantile(model: KnnQuantile, x, p: float) -> float:
    return model.predict(x, p)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class SoftmaxClassifier:
    """Multinomial logistic classifier fitted by plain gradient descent.

    One coefficient vector and intercept per class; the last class is
    pinned to zero for identifiability.  Predicted probabilities are
    positive and sum to 1.
    """

    def __init__(self, coef: np.ndarray, intercept: np.ndarray):
        self.coef = coef
        self.intercept = intercept
        self.n_classes = coef.shape[0]

    @property
    def dim(self) -> int:
        return self.coef.shape[1]

    def predict_probs_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ValueError(
                f"query dimension {X.shape[1]} != training dimension {self.dim}"
            )
        return _softmax(X @ self.coef.T + self.intercept)

    def predict_probs(self, x) -> np.ndarray:
        return self.predict_probs_batch(x)[0]


def fit_classifier(
    train: Sequence[Sample],
    n_classes: int,
    steps: int = 2000,
    learning_rate: float = 0.1,
) -> SoftmaxClassifier:
    """Fit the multinomial logistic model by full-batch gradient descent.

    Zero initialization, mean-gradient updates on the multinomial
    log-loss; coefficients and intercept of the last class stay zero.
    """
    X = features_matrix(train)
    y = labels(train)
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("labels must lie in {0, ..., n_classes - 1}")
    n, d = X.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    coef = np.zeros((n_classes, d))
    intercept = np.zeros(n_classes)
    for _ in range(steps):
        probs = _softmax(X @ coef.T + intercept)
        delta = probs - onehot
        coef[:-1] -= learning_rate * (delta.T @ X)[:-1] / n
        intercept[:-1] -= learning_rate * delta.mean(axis=0)[:-1]
    return SoftmaxClassifier(coef, intercept)


def predict_probs(model: SoftmaxClassifier, x) -> np.ndarray:
    """Class probability vector at a single feature vector."""
    return model.predict_probs(x)
