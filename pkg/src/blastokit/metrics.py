"""Classification metrics and ROC/AUC.

The positive class defaults to "poor": with ten poor test images all
recalled and two good ones misclassified, precision 10/12 = 83.3% and
recall 100% only come out of the before-augmentation table with poor as the
positive class.

Ratios with zero denominators are reported as None ("undefined"), never 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

POSITIVE_CLASS = "poor"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive_class: str = POSITIVE_CLASS

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DataError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    sensitivity: float | None
    specificity: float | None

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
        }

    def table_row(self, label: str) -> str:
        """Aligned percentage row in the classic five-column layout."""

        def pct(v):
            return "undefined" if v is None else f"{v * 100:.1f}"

        cells = [self.accuracy, self.precision, self.recall, self.f1, self.sensitivity]
        return f"{label:<22}" + "".join(f"{pct(v):>12}" for v in cells)

    @staticmethod
    def table_header() -> str:
        cols = ["Accuracy", "Precision", "Recall", "F1-score", "Sensitivity"]
        return f"{'':<22}" + "".join(f"{c:>12}" for c in cols)


def confusion(predicted, actual, positive_class: str = POSITIVE_CLASS) -> ConfusionMatrix:
    """Cross-tabulate equal-length label sequences (any hashable labels)."""
    predicted = list(predicted)
    actual = list(actual)
    if len(predicted) != len(actual):
        raise DataError(f"length mismatch: {len(predicted)} predictions, {len(actual)} labels")
    if not predicted:
        raise DataError("cannot build a confusion matrix from empty input")
    tp = fp = fn = tn = 0
    for p, a in zip(predicted, actual):
        if a == positive_class:
            if p == positive_class:
                tp += 1
            else:
                fn += 1
        else:
            if p == positive_class:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, fp, fn, tn, positive_class)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total == 0:
        raise DataError("confusion matrix is empty")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        recall=recall,
        f1=f1,
        sensitivity=recall,
        specificity=_ratio(cm.tn, cm.tn + cm.fp),
    )


def roc_curve(scores, labels):
    """ROC points swept over descending unique scores.

    scores: positive-class probabilities; labels: 1 for positive, 0 for
    negative.  Returns a list of (threshold, fpr, tpr) from (inf, 0, 0) to
    (min score, 1, 1); tied scores move as one block, which makes the
    trapezoidal area equal the tie-adjusted pair-counting statistic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be equal-length 1-d sequences")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    points = [(float("inf"), 0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        thr = scores[order[i]]
        while i < n and scores[order[i]] == thr:
            if labels[order[i]] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((float(thr), fp / n_neg, tp / n_pos))
    return points


def roc_auc(scores, labels):
    """(curve points, trapezoidal AUC)."""
    points = roc_curve(scores, labels)
    auc = 0.0
    for (_, x0, y0), (_, x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, auc


def write_roc_csv(points, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,fpr,tpr\n")
        for thr, fpr, tpr in points:
            fh.write(f"{thr!r},{fpr!r},{tpr!r}\n")
