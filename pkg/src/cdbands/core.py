"""Shared data model: samples, data splits, target grids, bands, quantiles.

All types here are immutable after construction and safe to share across
concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "InsufficientDataError",
    "Sample",
    "SplitPair",
    "YGrid",
    "Band",
    "LabelSet",
    "EMPTY_BAND",
    "make_samples",
    "features_matrix",
    "targets",
    "labels",
    "split_data",
    "empirical_quantile",
    "empirical_quantile_lower",
    "merge_intervals",
    "band_size",
    "band_contains",
]


class InsufficientDataError(ValueError):
    """Raised when an operation receives fewer samples than it needs."""


@dataclass(frozen=True, eq=False)
class Sample:
    """One observation: a feature vector and a scalar target.

    For classification problems the target is an integer class label in
    ``{0, ..., K-1}`` (stored as a float; use :func:`labels` to recover
    integer labels from a batch).
    """

    features: np.ndarray
    target: float

    def __post_init__(self):
        feats = np.atleast_1d(np.asarray(self.features, dtype=float))
        if feats.ndim != 1:
            raise ValueError("features must be a 1-D vector")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "target", float(self.target))


def make_samples(X, y) -> list[Sample]:
    """Bundle a feature matrix (n, d) and target vector (n,) into samples."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y must have the same number of rows")
    return [Sample(X[i], y[i]) for i in range(X.shape[0])]


def features_matrix(samples: Sequence[Sample]) -> np.ndarray:
    """Stack sample features into an (n, d) matrix."""
    if len(samples) == 0:
        raise InsufficientDataError("no samples")
    mat = np.stack([s.features for s in samples])
    dims = {s.features.shape[0] for s in samples}
    if len(dims) != 1:
        raise ValueError("samples have inconsistent feature dimensions")
    return mat


def targets(samples: Sequence[Sample]) -> np.ndarray:
    """Stack sample targets into an (n,) vector."""
    if len(samples) == 0:
        raise InsufficientDataError("no samples")
    return np.asarray([s.target for s in samples], dtype=float)


def labels(samples: Sequence[Sample]) -> np.ndarray:
    """Targets as integer class labels."""
    y = targets(samples)
    lab = np.rint(y).astype(int)
    if not np.allclose(y, lab):
        raise ValueError("targets are not integer class labels")
    return lab


@dataclass(frozen=True)
class SplitPair:
    """A dataset split into a model-fitting half and a calibration half."""

    train: tuple[Sample, ...]
    calibration: tuple[Sample, ...]

    def __post_init__(self):
        if len(self.train) == 0 or len(self.calibration) == 0:
            raise InsufficientDataError("both split halves must be nonempty")


def split_data(dataset: Sequence[Sample], ratio: float, seed: int) -> SplitPair:
    """Randomly split a dataset into disjoint train and calibration halves.

    Parameters
    ----------
    dataset : sequence of Sample
    ratio : float in (0, 1)
        Fraction of samples assigned to the training half; the train half
        receives ``round(ratio * n)`` samples (clamped so both halves are
        nonempty).
    seed : int
        Seed for the underlying generator; identical seeds give identical
        splits.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    n = len(dataset)
    if n < 2:
        raise InsufficientDataError("need at least 2 samples to split")
    n_train = int(round(ratio * n))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train = tuple(dataset[i] for i in perm[:n_train])
    calibration = tuple(dataset[i] for i in perm[n_train:])
    return SplitPair(train=train, calibration=calibration)


@dataclass(frozen=True, eq=False)
class YGrid:
    """Uniformly spaced, strictly increasing grid of target values."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least 2 points")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.max(steps) - np.min(steps) > 1e-12 * max(np.max(np.abs(pts)), 1.0):
            raise ValueError("grid spacing must be uniform")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def spacing(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def size(self) -> int:
        return int(self.points.size)

    @classmethod
    def uniform(cls, lo: float, hi: float, size: int = 500) -> "YGrid":
        if not hi > lo:
            raise ValueError("grid upper end must exceed lower end")
        return cls(np.linspace(lo, hi, size))


def merge_intervals(
    intervals: Iterable[tuple[float, float]], gap: float = 0.0
) -> tuple[tuple[float, float], ...]:
    """Sort intervals and merge any pair closer than ``gap`` (or overlapping)."""
    ordered = sorted((float(lo), float(hi)) for lo, hi in intervals)
    merged: list[tuple[float, float]] = []
    for lo, hi in ordered:
        if merged and lo - merged[-1][1] < gap:
            prev_lo, prev_hi = merged[-1]
            merged[-1] = (prev_lo, max(prev_hi, hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


@dataclass(frozen=True)
class Band:
    """A prediction set over the reals: a union of disjoint closed intervals.

    Intervals must be sorted ascending and pairwise disjoint
    (``hi_j < lo_{j+1}``); construct with :func:`merge_intervals` first if
    the inputs may touch or overlap.
    """

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        cleaned = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        prev_hi = None
        for lo, hi in cleaned:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("interval endpoints must be finite")
            if lo > hi:
                raise ValueError(f"interval has lo > hi: ({lo}, {hi})")
            if prev_hi is not None and lo <= prev_hi:
                raise ValueError("intervals must be sorted and disjoint")
            prev_hi = hi
        object.__setattr__(self, "intervals", cleaned)

    @property
    def size(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    def contains(self, y: float) -> bool:
        return any(lo <= y <= hi for lo, hi in self.intervals)


EMPTY_BAND = Band(())


def band_size(band: Band) -> float:
    """Total length (Lebesgue measure) of a band."""
    return band.size


def band_contains(band: Band, y: float) -> bool:
    """True iff ``y`` lies in one of the band's closed intervals."""
    return band.contains(y)


@dataclass(frozen=True)
class LabelSet:
    """A prediction set for classification: a sorted set of class labels."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labs = tuple(int(v) for v in self.labels)
        if any(v < 0 for v in labs):
            raise ValueError("labels must be nonnegative")
        if list(labs) != sorted(set(labs)):
            raise ValueError("labels must be sorted and unique")
        object.__setattr__(self, "labels", labs)

    @property
    def size(self) -> int:
        return len(self.labels)

    def contains(self, label: int) -> bool:
        return int(label) in self.labels


def _validated_scores(scores) -> np.ndarray:
    arr = np.asarray(scores, dtype=float).ravel()
    if arr.size == 0:
        raise InsufficientDataError("empty score set")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    return arr


def empirical_quantile(scores, alpha: float) -> float:
    """Upper-style empirical quantile of a score set.

    Returns the k-th smallest score with ``k = ceil((m + 1) * alpha)``
    clamped to ``[1, m]``.  This is the split-conformal convention for
    upper-tail cutoffs: for i.i.d. continuous scores, a fresh score falls
    at or below the returned value with probability in
    ``[alpha, alpha + 1/(m+1)]``.
    """
    arr = _validated_scores(scores)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    m = arr.size
    k = math.ceil((m + 1) * alpha)
    k = min(max(k, 1), m)
    return float(np.sort(arr)[k - 1])


def empirical_quantile_lower(scores, alpha: float) -> float:
    """Lower-style empirical quantile: k-th smallest with ``k = floor((m+1)*alpha)``.

    Used for lower-tail cutoffs (a band keeps values scoring at or above
    the cutoff): flooring guarantees a fresh i.i.d. score exceeds the
    returned value with probability at least ``1 - alpha``.
    """
    arr = _validated_scores(scores)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    m = arr.size
    k = math.floor((m + 1) * alpha)
    k = min(max(k, 1), m)
    return float(np.sort(arr)[k - 1])
