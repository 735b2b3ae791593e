"""Evaluation suite: confusion statistics, ROC/AUC, calibration curves.

Class 1 (minority) is the positive class throughout. Decisions derived
from scores use the strict rule 1[score > tau], matching
:mod:`imbkit.decision`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .classifiers import as_score_array
from .decision import ThresholdRule
from .errors import (
    BinMismatchError,
    EmptyInputError,
    LengthMismatchError,
    MissingClassError,
)

__all__ = [
    "Confusion",
    "EvalReport",
    "RocCurve",
    "CalibrationBin",
    "CalibrationCurve",
    "evaluate",
    "roc_curve",
    "operating_point",
    "best_balanced_threshold",
    "calibration_curve",
    "average_curves",
    "write_roc_csv",
    "write_calibration_csv",
    "DIAG_CALIBRATED",
    "DIAG_CLASS0_BIASED",
    "DIAG_CLASS1_BIASED",
    "DIAG_UNDERCONFIDENT",
    "DIAG_OVERCONFIDENT",
    "DIAG_MIXED",
]

DIAG_CALIBRATED = "calibrated"
DIAG_UNDERCONFIDENT = "underconfident"
DIAG_OVERCONFIDENT = "overconfident"
DIAG_CLASS0_BIASED = "class0_biased"
DIAG_CLASS1_BIASED = "class1_biased"
DIAG_MIXED = "mixed"

_ECE_CALIBRATED = 0.05  # diagnosis cutoff
_BIN_MAJORITY = 0.8  # fraction of nonempty bins that must agree


def _check_labels(y_true, y_pred=None):
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    if y_pred is not None:
        y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
        if y_true.shape != y_pred.shape:
            raise LengthMismatchError(
                f"y_true has {y_true.size} entries, y_pred has {y_pred.size}"
            )
    if not np.any(y_true == 0) or not np.any(y_true == 1):
        raise MissingClassError("both classes must appear in y_true")
    return (y_true, y_pred) if y_pred is not None else y_true


@dataclass(frozen=True)
class Confusion:
    """Counts with class 1 positive: tp/fn split class 1, tn/fp class 0."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts plus the derived accuracy metrics for one run.

    ``balanced`` is the mean of the per-class accuracies, ``worst_class``
    their minimum, ``average`` the plain accuracy, and ``prob_error`` the
    probability of error at equal priors (1 - balanced).
    """

    confusion: Confusion
    acc_class0: float
    acc_class1: float
    balanced: float
    worst_class: float
    average: float
    prob_error: float

    METRIC_FIELDS = (
        "acc_class0",
        "acc_class1",
        "balanced",
        "worst_class",
        "average",
        "prob_error",
    )

    @classmethod
    def from_rates(cls, acc_class0: float, acc_class1: float, n_per_class: int = 1000):
        """Build a report from per-class accuracies (confusion rounded)."""
        tp = round(acc_class1 * n_per_class)
        tn = round(acc_class0 * n_per_class)
        balanced = (acc_class0 + acc_class1) / 2.0
        return cls(
            confusion=Confusion(tp=tp, fp=n_per_class - tn, tn=tn, fn=n_per_class - tp),
            acc_class0=acc_class0,
            acc_class1=acc_class1,
            balanced=balanced,
            worst_class=min(acc_class0, acc_class1),
            average=(tp + tn) / (2.0 * n_per_class),
            prob_error=1.0 - balanced,
        )


def evaluate(y_true, y_pred) -> EvalReport:
    """Confusion counts and accuracy metrics of hard predictions."""
    y_true, y_pred = _check_labels(y_true, y_pred)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    acc0 = tn / (tn + fp)
    acc1 = tp / (tp + fn)
    balanced = (acc0 + acc1) / 2.0
    return EvalReport(
        confusion=Confusion(tp=tp, fp=fp, tn=tn, fn=fn),
        acc_class0=acc0,
        acc_class1=acc1,
        balanced=balanced,
        worst_class=min(acc0, acc1),
        average=(tp + tn) / y_true.size,
        prob_error=1.0 - balanced,
    )


# --------------------------------------------------------------------------
# ROC
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RocCurve:
    """Exact ROC with one vertex per distinct score.

    ``fa_rate``/``detection_rate`` run from (0, 0) to (1, 1) with
    nondecreasing false-alarm rate. ``thresholds[k]`` is the decision
    threshold realizing vertex k under the strict > rule (the final
    vertex uses -inf: everything predicted positive). The trapezoid
    ``auc`` equals the Mann-Whitney pair statistic exactly.
    """

    fa_rate: np.ndarray
    detection_rate: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fa_rate.tolist(), self.detection_rate.tolist()))


def roc_curve(scores, y_true) -> RocCurve:
    """Exact ROC via one sort; tied scores are grouped into one vertex."""
    s = as_score_array(scores)
    y = _check_labels(y_true)
    if s.size != y.size:
        raise LengthMismatchError(f"{s.size} scores for {y.size} labels")
    order = np.argsort(-s, kind="stable")
    s_desc = s[order]
    y_desc = y[order]
    distinct_mask = np.empty(s_desc.size, dtype=bool)
    distinct_mask[0] = True
    distinct_mask[1:] = s_desc[1:] != s_desc[:-1]
    group_ends = np.append(np.flatnonzero(distinct_mask[1:]) + 1, s_desc.size)
    tp_cum = np.concatenate([[0], np.cumsum(y_desc)[group_ends - 1]])
    pos_cum = np.concatenate([[0], group_ends.astype(np.int64)])
    fp_cum = pos_cum - tp_cum
    n1 = int(tp_cum[-1])
    n0 = int(fp_cum[-1])
    # trapezoid on integer counts: exact, equals the pair-counting statistic
    auc = float(
        np.sum((fp_cum[1:] - fp_cum[:-1]) * (tp_cum[1:] + tp_cum[:-1]))
        / (2.0 * n0 * n1)
    )
    thresholds = np.append(s_desc[distinct_mask], -np.inf)
    return RocCurve(
        fa_rate=fp_cum / n0,
        detection_rate=tp_cum / n1,
        thresholds=thresholds,
        auc=auc,
    )


def operating_point(scores, y_true, rule, curve: RocCurve | None = None):
    """Empirical (false-alarm rate, misdetection rate) at a threshold rule.

    The optional curve argument is accepted for callers that already
    built one; the point is computed directly from the scores either way.
    """
    s = as_score_array(scores)
    y = _check_labels(y_true)
    tau = rule.tau if isinstance(rule, ThresholdRule) else float(rule)
    pred = s > tau
    n1 = int(np.sum(y == 1))
    n0 = y.size - n1
    fa = float(np.sum(pred & (y == 0))) / n0
    md = float(np.sum(~pred & (y == 1))) / n1
    return fa, md


def best_balanced_threshold(scores, y_true):
    """Exhaustive search for the threshold maximizing balanced accuracy.

    The grid is the midpoints between consecutive distinct scores plus
    the top score (which realizes the all-negative decision); under the
    strict > rule this covers every achievable decision partition. Ties
    resolve to the smallest threshold. Returns (tau_star, balanced).
    """
    s = as_score_array(scores)
    y = _check_labels(y_true)
    if s.size != y.size:
        raise LengthMismatchError(f"{s.size} scores for {y.size} labels")
    order = np.argsort(s, kind="stable")
    s_asc, y_asc = s[order], y[order]
    u = np.unique(s_asc)
    grid = np.append((u[:-1] + u[1:]) / 2.0, u[-1]) if u.size > 1 else u
    n1 = int(np.sum(y_asc == 1))
    n0 = y_asc.size - n1
    cum1 = np.cumsum(y_asc == 1)
    cum0 = np.cumsum(y_asc == 0)
    idx = np.searchsorted(s_asc, grid, side="right")
    fn = np.where(idx > 0, cum1[np.maximum(idx - 1, 0)], 0)
    tn = np.where(idx > 0, cum0[np.maximum(idx - 1, 0)], 0)
    balanced = ((n1 - fn) / n1 + tn / n0) / 2.0
    k = int(np.argmax(balanced))  # first (= smallest tau) among maxima
    return float(grid[k]), float(balanced[k])


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    mean_predicted: float  # NaN when the bin is empty
    observed_freq: float  # NaN when the bin is empty
    count: int


@dataclass(frozen=True)
class CalibrationCurve:
    """Binned observed-vs-predicted frequencies with a bias diagnosis.

    Bins partition [0, 1] into equal widths. ``ece`` is the
    count-weighted mean absolute gap between observed frequency and mean
    predicted score over nonempty bins.

    The diagnosis is rule-based: calibrated if ECE < 0.05; biased toward
    one side if observed < predicted (or >) in at least 80% of nonempty
    bins; under-/overconfident if predictions sit closer to (farther
    from) 0.5 than observations in at least 80% of nonempty bins;
    otherwise mixed.
    """

    bins: tuple[CalibrationBin, ...]
    ece: float
    diagnosis: str

    @property
    def edges(self) -> np.ndarray:
        return np.append([b.lo for b in self.bins], self.bins[-1].hi)

    def nonempty(self) -> list[CalibrationBin]:
        return [b for b in self.bins if b.count > 0]


def _diagnose(bins: list[CalibrationBin], ece: float) -> str:
    if ece < _ECE_CALIBRATED:
        return DIAG_CALIBRATED
    obs = np.array([b.observed_freq for b in bins])
    prd = np.array([b.mean_predicted for b in bins])
    if len(bins) and np.mean(obs < prd) >= _BIN_MAJORITY:
        return DIAG_CLASS0_BIASED
    if len(bins) and np.mean(obs > prd) >= _BIN_MAJORITY:
        return DIAG_CLASS1_BIASED
    toward = np.abs(prd - 0.5) < np.abs(obs - 0.5)
    if len(bins) and np.mean(toward) >= _BIN_MAJORITY:
        return DIAG_UNDERCONFIDENT
    if len(bins) and np.mean(~toward) >= _BIN_MAJORITY:
        return DIAG_OVERCONFIDENT
    return DIAG_MIXED


def calibration_curve(scores, y_true, n_bins: int = 10) -> CalibrationCurve:
    """Equal-width reliability curve of scores against outcomes."""
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    s = as_score_array(scores)
    y = np.asarray(y_true, dtype=np.int64).ravel()
    if s.size == 0:
        raise EmptyInputError("no scores to calibrate")
    if s.size != y.size:
        raise LengthMismatchError(f"{s.size} scores for {y.size} labels")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(s, edges[1:-1]), 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        bins.append(
            CalibrationBin(
                lo=float(edges[b]),
                hi=float(edges[b + 1]),
                mean_predicted=float(s[mask].mean()) if count else float("nan"),
                observed_freq=float(y[mask].mean()) if count else float("nan"),
                count=count,
            )
        )
    nonempty = [b for b in bins if b.count > 0]
    n = sum(b.count for b in nonempty)
    ece = float(
        sum(b.count / n * abs(b.observed_freq - b.mean_predicted) for b in nonempty)
    )
    return CalibrationCurve(bins=tuple(bins), ece=ece, diagnosis=_diagnose(nonempty, ece))


def average_curves(curves) -> CalibrationCurve:
    """Count-weighted average of calibration curves with identical bins.

    Equivalent to pooling the underlying (score, label) pairs and
    re-binning: per-bin counts add, and observed/predicted values are
    averaged with the counts as weights.
    """
    curves = list(curves)
    if not curves:
        raise EmptyInputError("no curves to average")
    edges0 = curves[0].edges
    for c in curves[1:]:
        if len(c.bins) != len(curves[0].bins) or not np.array_equal(c.edges, edges0):
            raise BinMismatchError("curves must share identical bin edges")
    bins = []
    for b in range(len(curves[0].bins)):
        counts = np.array([c.bins[b].count for c in curves], dtype=np.float64)
        total = counts.sum()
        if total > 0:
            w = counts / total
            nz = counts > 0
            mean_pred = float(
                np.sum(w[nz] * np.array([c.bins[b].mean_predicted for c in curves])[nz])
            )
            obs = float(
                np.sum(w[nz] * np.array([c.bins[b].observed_freq for c in curves])[nz])
            )
        else:
            mean_pred = obs = float("nan")
        ref = curves[0].bins[b]
        bins.append(
            CalibrationBin(
                lo=ref.lo,
                hi=ref.hi,
                mean_predicted=mean_pred,
                observed_freq=obs,
                count=int(total),
            )
        )
    nonempty = [b for b in bins if b.count > 0]
    n = sum(b.count for b in nonempty)
    ece = float(
        sum(b.count / n * abs(b.observed_freq - b.mean_predicted) for b in nonempty)
    ) if n else 0.0
    return CalibrationCurve(bins=tuple(bins), ece=ece, diagnosis=_diagnose(nonempty, ece))


# --------------------------------------------------------------------------
# plot-data export
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_roc_csv(curve: RocCurve, path) -> None:
    """ROC vertices as (x, y, threshold) rows for any plotting tool."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "threshold"])
        for fa, tp, th in zip(curve.fa_rate, curve.detection_rate, curve.thresholds):
            w.writerow([_fmt(float(fa)), _fmt(float(tp)), _fmt(float(th))])


def write_calibration_csv(curve: CalibrationCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "mean_predicted", "observed_freq", "count"])
        for b in curve.bins:
            w.writerow(
                [_fmt(b.lo), _fmt(b.hi), _fmt(b.mean_predicted), _fmt(b.observed_freq), b.count]
            )
