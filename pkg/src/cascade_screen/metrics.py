"""Confusion matrices and the accuracy / sensitivity / specificity triple.

Class 1 (suicidal behavior present) is the positive class. Sensitivity and
specificity return ``None`` when their denominator is zero; callers
averaging over folds skip those and report the skip count.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self):
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true).astype(np.int64).ravel()
    p = np.asarray(y_pred).astype(np.int64).ravel()
    if t.size != p.size:
        raise ValueError(f"length mismatch: {t.size} vs {p.size}")
    if t.size == 0:
        raise ValueError("cannot build a confusion matrix from zero examples")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("labels must be binary 0/1")
    tp = int(np.sum((t == 1) & (p == 1)))
    tn = int(np.sum((t == 0) & (p == 0)))
    fp = int(np.sum((t == 0) & (p == 1)))
    fn = int(np.sum((t == 1) & (p == 0)))
    return ConfusionMatrix(tp, tn, fp, fn)


def accuracy(cm: ConfusionMatrix, formula="standard") -> float:
    """(tp + tn) / total.

    ``formula="tp_over_total"`` gives tp / total instead. It is not a
    meaningful accuracy and exists only to compare against that definition.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    if formula == "standard":
        return (cm.tp + cm.tn) / cm.total
    if formula == "tp_over_total":
        return cm.tp / cm.total
    raise ValueError(f"unknown accuracy formula {formula!r}")


def sensitivity(cm: ConfusionMatrix) -> Optional[float]:
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else None


def specificity(cm: ConfusionMatrix) -> Optional[float]:
    denom = cm.tn + cm.fp
    return cm.tn / denom if denom else None


METRIC_NAMES = ("accuracy", "sensitivity", "specificity")


@dataclass(frozen=True)
class MetricTriple:
    accuracy: float
    sensitivity: Optional[float]
    specificity: Optional[float]

    @classmethod
    def from_confusion(cls, cm, formula="standard"):
        return cls(accuracy(cm, formula), sensitivity(cm), specificity(cm))

    def as_dict(self):
        return {name: getattr(self, name) for name in METRIC_NAMES}


def mean_skipping_none(values):
    """Mean of the non-``None`` entries, plus how many were skipped.

    Returns ``(None, skipped)`` when every value is ``None``.
    """
    kept = [v for v in values if v is not None]
    skipped = len(values) - len(kept)
    if not kept:
        return None, skipped
    return float(sum(kept) / len(kept)), skipped


def max_skipping_none(values):
    kept = [v for v in values if v is not None]
    return max(kept) if kept else None


def rounded(value, places=4):
    return None if value is None else round(float(value), places)
