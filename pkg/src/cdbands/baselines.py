"""Comparison band methods built on the shared split and quantile machinery.

All baselines consume the same calibration half and the same k-NN
estimator family as the density-based methods, so benchmark differences
reflect the conformity scores rather than the estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Band,
    InsufficientDataError,
    LabelSet,
    Sample,
    empirical_quantile,
    empirical_quantile_lower,
    features_matrix,
    labels,
    targets,
)
from .estimators import KnnMad, KnnQuantile, KnnRegression, SoftmaxClassifier

__all__ = [
    "RegSplitCalibration",
    "LocalRegSplitCalibration",
    "QuantileSplitCalibration",
    "ProbabilitySplitCalibration",
    "calibrate_reg_split",
    "reg_split_band",
    "calibrate_local_reg_split",
    "local_reg_split_band",
    "calibrate_quantile_split",
    "quantile_split_band",
    "calibrate_probability_split",
    "probability_split_labelset",
]


@dataclass(frozen=True, eq=False)
class RegSplitCalibration:
    """Absolute-residual scores; bands are the prediction +/- one global radius."""

    regression: KnnRegression
    scores: np.ndarray
    radius: float
    alpha: float


def calibrate_reg_split(
    regression: KnnRegression, calibration: Sequence[Sample], alpha: float
) -> RegSplitCalibration:
    if len(calibration) == 0:
        raise InsufficientDataError("empty calibration set")
    X = features_matrix(calibration)
    y = targets(calibration)
    scores = np.abs(y - regression.predict_batch(X))
    radius = empirical_quantile(scores, 1.0 - alpha)
    return RegSplitCalibration(regression, scores, radius, alpha)


def reg_split_band(calib: RegSplitCalibration, x) -> Band:
    center = calib.regression.predict(x)
    return Band(((center - calib.radius, center + calib.radius),))


@dataclass(frozen=True, eq=False)
class LocalRegSplitCalibration:
    """Deviation-scaled residual scores; band radius scales with the local MAD."""

    regression: KnnRegression
    mad: KnnMad
    scores: np.ndarray
    radius: float
    alpha: float


def calibrate_local_reg_split(
    regression: KnnRegression,
    mad: KnnMad,
    calibration: Sequence[Sample],
    alpha: float,
) -> LocalRegSplitCalibration:
    if len(calibration) == 0:
        raise InsufficientDataError("empty calibration set")
    X = features_matrix(calibration)
    y = targets(calibration)
    scores = np.abs(y - regression.predict_batch(X)) / mad.predict_batch(X)
    radius = empirical_quantile(scores, 1.0 - alpha)
    return LocalRegSplitCalibration(regression, mad, scores, radius, alpha)


def local_reg_split_band(calib: LocalRegSplitCalibration, x) -> Band:
    center = calib.regression.predict(x)
    half = calib.radius * calib.mad.predict(x)
    return Band(((center - half, center + half),))


@dataclass(frozen=True, eq=False)
class QuantileSplitCalibration:
    """Conformalized quantile regression: interval endpoints shifted by a margin.

    Scores are ``max(q_lo(x_i) - y_i, y_i - q_hi(x_i))`` with nominal
    inner quantiles ``alpha/2`` and ``1 - alpha/2``; negative margins
    shrink over-wide quantile estimates.
    """

    quantiles: KnnQuantile
    scores: np.ndarray
    margin: float
    alpha: float


def calibrate_quantile_split(
    quantiles: KnnQuantile, calibration: Sequence[Sample], alpha: float
) -> QuantileSplitCalibration:
    if len(calibration) == 0:
        raise InsufficientDataError("empty calibration set")
    X = features_matrix(calibration)
    y = targets(calibration)
    lo = quantiles.predict_batch(X, alpha / 2.0)
    hi = quantiles.predict_batch(X, 1.0 - alpha / 2.0)
    scores = np.maximum(lo - y, y - hi)
    margin = empirical_quantile(scores, 1.0 - alpha)
    return QuantileSplitCalibration(quantiles, scores, margin, alpha)


def quantile_split_band(calib: QuantileSplitCalibration, x) -> Band:
    lo = calib.quantiles.predict(x, calib.alpha / 2.0) - calib.margin
    hi = calib.quantiles.predict(x, 1.0 - calib.alpha / 2.0) + calib.margin
    if lo > hi:
        # Large negative margins can invert tiny intervals; collapse to a point.
        mid = (lo + hi) / 2.0
        return Band(((mid, mid),))
    return Band(((lo, hi),))


@dataclass(frozen=True, eq=False)
class ProbabilitySplitCalibration:
    """Global probability-threshold label sets (single pooled score set)."""

    classifier: SoftmaxClassifier
    scores: np.ndarray
    cutoff: float
    alpha: float


def calibrate_probability_split(
    classifier: SoftmaxClassifier, calibration: Sequence[Sample], alpha: float
) -> ProbabilitySplitCalibration:
    if len(calibration) == 0:
        raise InsufficientDataError("empty calibration set")
    X = features_matrix(calibration)
    y = labels(calibration)
    probs = classifier.predict_probs_batch(X)
    if y.max() >= probs.shape[1]:
        raise ValueError("calibration labels exceed the classifier's class count")
    scores = probs[np.arange(len(calibration)), y]
    cutoff = empirical_quantile_lower(scores, alpha)
    return ProbabilitySplitCalibration(classifier, scores, cutoff, alpha)


def probability_split_labelset(calib: ProbabilitySplitCalibration, x) -> LabelSet:
    probs = calib.classifier.predict_probs(x)
    return LabelSet(tuple(int(i) for i in np.flatnonzero(probs >= calib.cutoff)))
