"""Density-level-set prediction bands calibrated locally on a profile partition.

A density's *profile* maps a cutoff t to the fraction of density mass at
or above t; densities that are relocations of one another (location
families, label permutations) share a profile.  Feature space is
partitioned by running k-means++ on discretized profiles, calibration
scores are pooled within each partition element, and the band at a new
point keeps every target value whose estimated density clears the
element's score quantile, yielding unions of intervals (or label sets in
classification).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Band,
    InsufficientDataError,
    LabelSet,
    Sample,
    empirical_quantile_lower,
    features_matrix,
    labels,
    merge_intervals,
    targets,
)
from .estimators import DensityCurve, SoftmaxClassifier

__all__ = [
    "TGrid",
    "ProfileVector",
    "Partition",
    "KmeansResult",
    "CdSplitCalibration",
    "CdSplitLabelCalibration",
    "profile",
    "profile_distance",
    "class_profile_distance",
    "build_partition",
    "assign_partition",
    "kmeans_profiles",
    "calibrate_cd_split",
    "threshold_band",
    "cd_split_band",
    "cd_split_bands",
    "calibrate_cd_split_labels",
    "cd_split_labelset",
    "default_partition_count",
]

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF_COUNT = 101
_LLOYD_MAX_ITER = 100


def default_partition_count(n_calibration: int) -> int:
    """Default number of partition elements: ceil(n / 100)."""
    return max(1, int(math.ceil(n_calibration / 100.0)))


@dataclass(frozen=True, eq=False)
class TGrid:
    """Increasing grid of density cutoffs starting at 0."""

    cutoffs: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cutoffs, dtype=float)
        if cuts.ndim != 1 or cuts.size < 2:
            raise ValueError("cutoff grid needs at least 2 points")
        if cuts[0] != 0.0:
            raise ValueError("cutoff grid must start at 0")
        if np.any(np.diff(cuts) <= 0):
            raise ValueError("cutoffs must be strictly increasing")
        cuts.setflags(write=False)
        object.__setattr__(self, "cutoffs", cuts)

    @classmethod
    def uniform(cls, t_max: float, size: int = DEFAULT_CUTOFF_COUNT) -> "TGrid":
        if t_max <= 0:
            raise ValueError("t_max must be positive")
        return cls(np.linspace(0.0, t_max, size))

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights so that sum(w * f) approximates the t-integral."""
        cuts = self.cutoffs
        w = np.empty_like(cuts)
        w[0] = (cuts[1] - cuts[0]) / 2.0
        w[-1] = (cuts[-1] - cuts[-2]) / 2.0
        w[1:-1] = (cuts[2:] - cuts[:-2]) / 2.0
        return w


@dataclass(frozen=True, eq=False)
class ProfileVector:
    """Discretized profile of a density: mass fraction at or above each cutoff.

    Values lie in [0, 1], are nonincreasing in the cutoff, and equal 1 at
    cutoff 0.
    """

    tgrid: TGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.tgrid.cutoffs.shape:
            raise ValueError("profile values must match the cutoff grid")
        if np.any(vals < -1e-9) or np.any(vals > 1.0 + 1e-9):
            raise ValueError("profile values must lie in [0, 1]")
        if np.any(np.diff(vals) > 1e-9):
            raise ValueError("profile must be nonincreasing in the cutoff")
        if abs(vals[0] - 1.0) > 1e-6:
            raise ValueError("profile at cutoff 0 must equal 1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def _profile_rows(dens_rows: np.ndarray, cutoffs: np.ndarray) -> np.ndarray:
    """Profiles of density rows: (m, len(cutoffs)).

    Each entry is the fraction of the row's grid mass carried by cells
    whose density is at or above the cutoff (a Riemann approximation of
    the mass of the level set).
    """
    m, g = dens_rows.shape
    out = np.empty((m, cutoffs.size))
    for i in range(m):
        asc = np.sort(dens_rows[i])
        desc_cumsum = np.cumsum(asc[::-1])
        total = desc_cumsum[-1]
        count_ge = g - np.searchsorted(asc, cutoffs, side="left")
        vals = np.where(count_ge > 0, desc_cumsum[np.maximum(count_ge, 1) - 1], 0.0)
        out[i] = vals / total
    return out


def profile(density: DensityCurve, tgrid: TGrid) -> ProfileVector:
    """Discretized profile of a density curve on a cutoff grid."""
    values = _profile_rows(density.values[None, :], tgrid.cutoffs)[0]
    return ProfileVector(tgrid, values)


def profile_distance(a: ProfileVector, b: ProfileVector) -> float:
    """L2 distance between two profiles over the cutoff grid.

    The squared distance is the trapezoid integral of the squared profile
    difference; both profiles must share the same cutoff grid.
    """
    if a.tgrid.cutoffs.shape != b.tgrid.cutoffs.shape or np.any(
        a.tgrid.cutoffs != b.tgrid.cutoffs
    ):
        raise ValueError("profiles must share the same cutoff grid")
    diff = a.values - b.values
    return float(math.sqrt(np.trapezoid(diff * diff, a.tgrid.cutoffs)))


def class_profile_distance(probs_a, probs_b) -> float:
    """Profile distance between class-probability vectors (discrete targets)."""
    pa = np.asarray(probs_a, dtype=float)
    pb = np.asarray(probs_b, dtype=float)
    if pa.shape != pb.shape:
        raise ValueError("probability vectors must have the same length")
    return float(math.sqrt(np.sum((pa - pb) ** 2)))


@dataclass(frozen=True, eq=False)
class Partition:
    """Nearest-centroid partition of profile space.

    ``centroids`` has one row per element in profile coordinates;
    ``weights`` are the quadrature weights of the metric (trapezoid
    weights of the cutoff grid, or ones for class-probability profiles).
    Assignment ties break toward the lowest centroid index.
    """

    centroids: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("need at least one centroid")
        if w.shape != (c.shape[1],) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per coordinate")
        c.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "weights", w)

    @property
    def n_elements(self) -> int:
        return self.centroids.shape[0]

    def assign_rows(self, rows: np.ndarray) -> np.ndarray:
        d2 = _weighted_sq_distances(rows, self.centroids, self.weights)
        return d2.argmin(axis=1)


def _weighted_sq_distances(
    rows: np.ndarray, centroids: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    diff = rows[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,k->ij", diff * diff, weights)


@dataclass(frozen=True, eq=False)
class KmeansResult:
    """Outcome of seeded k-means: centroids, assignments, objective trace."""

    centroids: np.ndarray
    assignments: np.ndarray
    objective_trace: tuple[float, ...]


def kmeans_profiles(
    rows: np.ndarray, weights: np.ndarray, n_clusters: int, seed: int
) -> KmeansResult:
    """k-means++ seeding plus Lloyd iterations under a weighted L2 metric.

    Points are scaled by the square root of the weights so standard
    Euclidean k-means minimizes the weighted objective; centroid updates
    are coordinate-wise means.  Runs at most 100 iterations, stopping as
    soon as assignments are stable; deterministic per seed.
    """
    rows = np.asarray(rows, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = rows.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"cluster count must be in [1, {n}]")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(weights)
    z = rows * scale

    centers = np.empty((n_clusters, z.shape[1]))
    centers[0] = z[rng.integers(n)]
    d2 = ((z - centers[0]) ** 2).sum(axis=1)
    for j in range(1, n_clusters):
        total = d2.sum()
        if total <= 0:
            # All remaining points coincide with a chosen center.
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[j] = z[idx]
        d2 = np.minimum(d2, ((z - centers[j]) ** 2).sum(axis=1))

    assignments = np.zeros(n, dtype=int)
    trace: list[float] = []
    for _ in range(_LLOYD_MAX_ITER):
        dist2 = _weighted_sq_distances(z, centers, np.ones(z.shape[1]))
        new_assign = dist2.argmin(axis=1)
        trace.append(float(dist2[np.arange(n), new_assign].sum()))
        for j in range(n_clusters):
            members = new_assign == j
            if members.any():
                centers[j] = z[members].mean(axis=0)
            else:
                # Re-seed an empty cluster on the farthest point.
                far = dist2.min(axis=1).argmax()
                centers[j] = z[far]
                new_assign[far] = j
        if np.array_equal(new_assign, assignments) and len(trace) > 1:
            assignments = new_assign
            break
        assignments = new_assign
    return KmeansResult(
        centroids=centers / scale,
        assignments=assignments,
        objective_trace=tuple(trace),
    )


def _build_partition_rows(
    rows: np.ndarray, weights: np.ndarray, n_elements: int, seed: int
) -> tuple[Partition, np.ndarray]:
    distinct = np.unique(rows, axis=0).shape[0]
    if n_elements < 1 or n_elements > distinct:
        raise ValueError(
            f"partition size must be in [1, {distinct}] (distinct profiles), "
            f"got {n_elements}"
        )
    result = kmeans_profiles(rows, weights, n_elements, seed)
    partition = Partition(centroids=result.centroids, weights=weights)
    return partition, result.assignments


def build_partition(
    profiles: Sequence[ProfileVector], n_elements: int, seed: int
) -> Partition:
    """Cluster profiles into a nearest-centroid partition of profile space."""
    if len(profiles) == 0:
        raise InsufficientDataError("no profiles to partition")
    tgrid = profiles[0].tgrid
    for p in profiles[1:]:
        if p.tgrid.cutoffs.shape != tgrid.cutoffs.shape or np.any(
            p.tgrid.cutoffs != tgrid.cutoffs
        ):
            raise ValueError("profiles must share the same cutoff grid")
    rows = np.stack([p.values for p in profiles])
    partition, _ = _build_partition_rows(
        rows, tgrid.trapezoid_weights(), n_elements, seed
    )
    return partition


def assign_partition(partition: Partition, profile_vec: ProfileVector) -> int:
    """Index of the centroid nearest to a profile (ties to the lowest index)."""
    return int(partition.assign_rows(profile_vec.values[None, :])[0])


def threshold_band(density: DensityCurve, t: float) -> Band:
    """Grid-thresholded band: every maximal run of cells with density >= t.

    Runs become closed intervals at their endpoint grid values; intervals
    separated by less than 1.5 grid steps are merged.
    """
    mask = density.values >= t
    if not mask.any():
        return Band(())
    pts = density.grid.points
    idx = np.flatnonzero(mask)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[breaks + 1]))
    ends = np.concatenate((idx[breaks], [idx[-1]]))
    intervals = [(pts[s], pts[e]) for s, e in zip(starts, ends)]
    return Band(merge_intervals(intervals, 1.5 * density.grid.spacing))


@dataclass(frozen=True, eq=False)
class CdSplitCalibration:
    """Profile partition plus per-element density scores of the calibration set.

    ``model`` is any conditional density model exposing ``grid``,
    ``density_matrix(X)`` and ``density(x)``; ``element_scores[j]`` holds
    the density scores of calibration points assigned to element ``j``,
    and ``pooled_scores`` all of them (the fallback for an element that
    ends up empty).
    """

    model: object
    partition: Partition
    tgrid: TGrid
    element_scores: tuple[np.ndarray, ...]
    pooled_scores: np.ndarray
    assignments: np.ndarray
    alpha: float

    def element_cutoff(self, element: int) -> float:
        scores = self.element_scores[element]
        if scores.size == 0:
            logger.warning(
                "partition element %d has no calibration scores; "
                "falling back to the pooled score set",
                element,
            )
            scores = self.pooled_scores
        return empirical_quantile_lower(scores, self.alpha)


def _density_scores(dens_rows: np.ndarray, points: np.ndarray, y: np.ndarray):
    scores = np.empty(y.size)
    for i, row in enumerate(dens_rows):
        scores[i] = np.interp(y[i], points, row, left=0.0, right=0.0)
    return scores


def calibrate_cd_split(
    model,
    calibration: Sequence[Sample],
    n_elements: int | None = None,
    alpha: float = 0.1,
    tgrid: TGrid | None = None,
    seed: int = 0,
) -> CdSplitCalibration:
    """Build the profile partition and per-element score sets.

    Profiles of the calibration points are computed from the fitted
    densities; by default the cutoff grid spans 0 to the largest density
    value observed on the calibration fits with 101 points, and the
    partition has ceil(n/100) elements.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if len(calibration) == 0:
        raise InsufficientDataError("empty calibration set")
    X = features_matrix(calibration)
    y = targets(calibration)
    dens = model.density_matrix(X)
    if tgrid is None:
        tgrid = TGrid.uniform(float(dens.max()), DEFAULT_CUTOFF_COUNT)
    if n_elements is None:
        n_elements = default_partition_count(len(calibration))
    rows = _profile_rows(dens, tgrid.cutoffs)
    partition, assignments = _build_partition_rows(
        rows, tgrid.trapezoid_weights(), n_elements, seed
    )
    scores = _density_scores(dens, model.grid.points, y)
    element_scores = tuple(
        scores[assignments == j] for j in range(partition.n_elements)
    )
    return CdSplitCalibration(
        model=model,
        partition=partition,
        tgrid=tgrid,
        element_scores=element_scores,
        pooled_scores=scores,
        assignments=assignments,
        alpha=alpha,
    )


def cd_split_band(calib: CdSplitCalibration, x) -> Band:
    """Level-set band at a new point, thresholded at its element's cutoff."""
    density = calib.model.density(x)
    prof = _profile_rows(density.values[None, :], calib.tgrid.cutoffs)
    element = int(calib.partition.assign_rows(prof)[0])
    return threshold_band(density, calib.element_cutoff(element))


def cd_split_bands(calib: CdSplitCalibration, X) -> list[Band]:
    """Bands for a batch of feature vectors (one density evaluation pass)."""
    dens = calib.model.density_matrix(X)
    rows = _profile_rows(dens, calib.tgrid.cutoffs)
    elements = calib.partition.assign_rows(rows)
    grid = calib.model.grid
    return [
        threshold_band(DensityCurve(grid, dens[i]), calib.element_cutoff(elements[i]))
        for i in range(dens.shape[0])
    ]


@dataclass(frozen=True, eq=False)
class CdSplitLabelCalibration:
    """Classification variant: partition of class-probability profiles.

    The profile of a discrete target is the class-probability vector
    itself, so no cutoff grid is involved and the metric weights are 1.
    """

    classifier: SoftmaxClassifier
    partition: Partition
    element_scores: tuple[np.ndarray, ...]
    pooled_scores: np.ndarray
    assignments: np.ndarray
    alpha: float

    def element_cutoff(self, element: int) -> float:
        scores = self.element_scores[element]
        if scores.size == 0:
            logger.warning(
                "partition element %d has no calibration scores; "
                "falling back to the pooled score set",
                element,
            )
            scores = self.pooled_scores
        return empirical_quantile_lower(scores, self.alpha)


def calibrate_cd_split_labels(
    classifier: SoftmaxClassifier,
    calibration: Sequence[Sample],
    n_elements: int | None = None,
    alpha: float = 0.1,
    seed: int = 0,
) -> CdSplitLabelCalibration:
    """Partition calibration points by their class-probability profiles."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if len(calibration) == 0:
        raise InsufficientDataError("empty calibration set")
    X = features_matrix(calibration)
    y = labels(calibration)
    probs = classifier.predict_probs_batch(X)
    if y.max() >= probs.shape[1]:
        raise ValueError("calibration labels exceed the classifier's class count")
    if n_elements is None:
        n_elements = default_partition_count(len(calibration))
    weights = np.ones(probs.shape[1])
    partition, assignments = _build_partition_rows(probs, weights, n_elements, seed)
    scores = probs[np.arange(len(calibration)), y]
    element_scores = tuple(
        scores[assignments == j] for j in range(partition.n_elements)
    )
    return CdSplitLabelCalibration(
        classifier=classifier,
        partition=partition,
        element_scores=element_scores,
        pooled_scores=scores,
        assignments=assignments,
        alpha=alpha,
    )


def cd_split_labelset(calib: CdSplitLabelCalibration, x) -> LabelSet:
    """Labels whose estimated probability clears the element's cutoff."""
    probs = calib.classifier.predict_probs(x)
    element = int(calib.partition.assign_rows(probs[None, :])[0])
    cutoff = calib.element_cutoff(element)
    return LabelSet(tuple(int(i) for i in np.flatnonzero(probs >= cutoff)))
