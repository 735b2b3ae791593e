"""Decision-level correction: cost-sensitive risk and Bayes thresholding.

A score-threshold decision predicts class 1 iff score > tau (strictly;
a score exactly equal to the threshold resolves to class 0). Under
misdetection cost c01 and false-alarm cost c10 the risk-minimizing
threshold is c10 / (c10 + c01); choosing the cost ratio equal to the
prior odds pi0/pi1 reduces this to tau = pi1, which undoes the effect
of a skewed context prior on the decision boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import as_score_array
from .errors import (
    DegenerateCostsError,
    LengthMismatchError,
    MissingClassError,
    PriorOutOfRangeError,
)

__all__ = [
    "CostMatrix",
    "ThresholdRule",
    "bayes_threshold",
    "threshold_from_costs",
    "apply_threshold",
    "empirical_risk",
]

SOURCE_FIXED = "fixed"
SOURCE_BAYES_PRIOR = "bayes_prior"
SOURCE_SWEEP_OPTIMAL = "sweep_optimal"
_SOURCES = (SOURCE_FIXED, SOURCE_BAYES_PRIOR, SOURCE_SWEEP_OPTIMAL)


@dataclass(frozen=True)
class CostMatrix:
    """Asymmetric error costs.

    c01: cost of predicting 0 when y=1 (misdetection).
    c10: cost of predicting 1 when y=0 (false alarm).
    """

    c01: float
    c10: float

    def __post_init__(self):
        if self.c01 < 0 or self.c10 < 0:
            raise DegenerateCostsError("costs must be nonnegative")
        if self.c01 + self.c10 <= 0:
            raise DegenerateCostsError("at least one cost must be positive")


@dataclass(frozen=True)
class ThresholdRule:
    """A decision threshold and where it came from."""

    tau: float
    source: str = SOURCE_FIXED

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if self.source not in _SOURCES:
            raise ValueError(f"source must be one of {_SOURCES}")


def bayes_threshold(pi1: float) -> ThresholdRule:
    """Risk-matching threshold for a context with minority prior pi1.

    Equivalent to costs with c01/c10 = pi0/pi1, i.e. tau = pi1.
    """
    if not 0.0 < pi1 < 1.0:
        raise PriorOutOfRangeError(f"pi1 must be in (0, 1), got {pi1}")
    return ThresholdRule(tau=pi1, source=SOURCE_BAYES_PRIOR)


def threshold_from_costs(costs: CostMatrix) -> ThresholdRule:
    """tau = c10 / (c10 + c01), the risk-minimizing decision boundary."""
    return ThresholdRule(tau=costs.c10 / (costs.c10 + costs.c01))


def apply_threshold(scores, rule) -> np.ndarray:
    """Hard labels 1[score > tau]; ties at tau resolve to class 0."""
    tau = rule.tau if isinstance(rule, ThresholdRule) else float(rule)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    return (as_score_array(scores) > tau).astype(np.int64)


def empirical_risk(y_true, y_pred, costs: CostMatrix, priors) -> float:
    """Plug empirical class-conditional error rates into the risk.

    risk = c01 * pi1 * P(yhat=0 | y=1) + c10 * pi0 * P(yhat=1 | y=0),
    with the supplied (pi0, pi1) rather than the empirical label mix.
    """
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if y_true.shape != y_pred.shape:
        raise LengthMismatchError(
            f"y_true has {y_true.size} entries, y_pred has {y_pred.size}"
        )
    pi0, pi1 = float(priors[0]), float(priors[1])
    if pi0 < 0 or pi1 < 0:
        raise PriorOutOfRangeError("priors must be nonnegative")
    n1 = int(np.sum(y_true == 1))
    n0 = y_true.size - n1
    if n0 == 0 or n1 == 0:
        raise MissingClassError("both classes must appear in y_true")
    md_rate = float(np.sum((y_true == 1) & (y_pred == 0))) / n1
    fa_rate = float(np.sum((y_true == 0) & (y_pred == 1))) / n0
    return costs.c01 * pi1 * md_rate + costs.c10 * pi0 * fa_rate
