"""Coverage and size metrics for prediction bands and label sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Band, InsufficientDataError, LabelSet, Sample
from .simulation import TrueConditional

__all__ = [
    "MetricReport",
    "conditional_coverage",
    "ccad",
    "marginal_coverage",
    "avg_size",
    "interval_loss",
]


@dataclass(frozen=True)
class MetricReport:
    """Summary metrics of one method evaluated on one test set."""

    marginal_coverage: float
    ccad: float
    avg_size: float
    n_test: int

    def __post_init__(self):
        if self.n_test < 1:
            raise ValueError("n_test must be >= 1")
        for name in ("marginal_coverage", "ccad", "avg_size"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def conditional_coverage(band: Band | LabelSet, truth: TrueConditional) -> float:
    """Probability mass the true conditional law assigns to a prediction set."""
    if isinstance(band, LabelSet):
        probs = truth.label_probs()
        return float(sum(probs[label] for label in band.labels))
    total = 0.0
    for lo, hi in band.intervals:
        total += float(truth.cdf(hi) - truth.cdf(lo))
    return total


def ccad(bands: Sequence[Band | LabelSet], truths: Sequence[TrueConditional], alpha: float) -> float:
    """Conditional coverage absolute deviation from the nominal level.

    The mean over test points of |conditional coverage - (1 - alpha)|.
    """
    if len(bands) == 0:
        raise InsufficientDataError("no bands")
    if len(bands) != len(truths):
        raise ValueError("bands and truths must align")
    target = 1.0 - alpha
    devs = [abs(conditional_coverage(b, t) - target) for b, t in zip(bands, truths)]
    return float(np.mean(devs))


def marginal_coverage(bands: Sequence[Band | LabelSet], samples: Sequence[Sample]) -> float:
    """Fraction of test targets contained in their prediction set."""
    if len(bands) == 0:
        raise InsufficientDataError("no bands")
    if len(bands) != len(samples):
        raise ValueError("bands and samples must align")
    hits = 0
    for band, sample in zip(bands, samples):
        if isinstance(band, LabelSet):
            hits += band.contains(int(round(sample.target)))
        else:
            hits += band.contains(sample.target)
    return hits / len(bands)


def avg_size(bands: Sequence[Band | LabelSet]) -> float:
    """Mean band length (or label-set cardinality for classification)."""
    if len(bands) == 0:
        raise InsufficientDataError("no bands")
    return float(np.mean([b.size for b in bands]))


def interval_loss(a: float, b: float, y: float, alpha: float) -> float:
    """Pinball-style interval loss: alpha*(b - a) + (a - y)_+ + (y - b)_+."""
    return alpha * (b - a) + max(a - y, 0.0) + max(y - b, 0.0)
