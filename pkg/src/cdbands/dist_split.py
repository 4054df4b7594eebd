"""Interval prediction bands from calibrated CDF-transform scores.

The method fits a conditional CDF estimate on one data half, scores the
other half by the estimated CDF evaluated at the observed target, and
inverts the score quantiles at a new point to produce a single closed
interval.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Band,
    InsufficientDataError,
    Sample,
    empirical_quantile,
    empirical_quantile_lower,
    features_matrix,
    targets,
)
from .estimators import CdfCurve, cdf_inverse

__all__ = [
    "DistSplitCalibration",
    "calibrate_dist_split",
    "dist_split_band",
    "dist_split_bands",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DistSplitCalibration:
    """Calibrated CDF-transform scores plus their two-sided cutoffs.

    ``model`` is any conditional density model exposing ``grid``,
    ``density_matrix(X)`` and ``cdf_matrix(X)`` (see
    :class:`~cdbands.estimators.CdeModel`).
    """

    model: object
    scores: np.ndarray
    alpha: float
    t_lo: float
    t_hi: float


def calibrate_dist_split(
    model, calibration: Sequence[Sample], alpha: float
) -> DistSplitCalibration:
    """Score the calibration set by the estimated CDF at each target.

    Each score is the model's CDF curve at ``x_i``, grid-interpolated at
    ``y_i``; targets outside the grid clamp to 0 or 1.  The two-sided
    cutoffs are the lower ``alpha/2`` (floor-indexed) and upper
    ``1 - alpha/2`` (ceil-indexed) empirical quantiles of the scores.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if len(calibration) == 0:
        raise InsufficientDataError("empty calibration set")
    X = features_matrix(calibration)
    y = targets(calibration)
    cdf_rows = model.cdf_matrix(X)
    pts = model.grid.points
    scores = np.empty(len(calibration))
    for i, row in enumerate(cdf_rows):
        scores[i] = np.interp(y[i], pts, row, left=row[0], right=1.0)
    t_lo = empirical_quantile_lower(scores, alpha / 2.0)
    t_hi = empirical_quantile(scores, 1.0 - alpha / 2.0)
    return DistSplitCalibration(
        model=model, scores=scores, alpha=alpha, t_lo=t_lo, t_hi=t_hi
    )


def _band_from_cdf(calib: DistSplitCalibration, cdf: CdfCurve) -> Band:
    t_lo, t_hi = calib.t_lo, calib.t_hi
    if t_lo > t_hi:
        # Can only happen with degenerate score sets; keep the call total.
        logger.warning(
            "lower cutoff %.6g exceeds upper cutoff %.6g; returning degenerate interval",
            t_lo,
            t_hi,
        )
        mid = cdf_inverse(cdf, float(np.median(calib.scores)))
        return Band(((mid, mid),))
    lo = cdf_inverse(cdf, t_lo)
    hi = cdf_inverse(cdf, t_hi)
    return Band(((lo, hi),))


def dist_split_band(calib: DistSplitCalibration, x) -> Band:
    """Single-interval prediction band at a new feature vector."""
    return _band_from_cdf(calib, calib.model.cdf(x))


def dist_split_bands(calib: DistSplitCalibration, X) -> list[Band]:
    """Bands for a batch of feature vectors (one CDF evaluation pass)."""
    rows = calib.model.cdf_matrix(X)
    grid = calib.model.grid
    return [_band_from_cdf(calib, CdfCurve(grid, row)) for row in rows]
