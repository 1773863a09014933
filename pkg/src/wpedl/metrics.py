"""Multi-class evaluation measures feeding the ensemble weights.

Per-class arithmetic is done in plain Python floats derived from integer
counts, so results are reproducible to the bit across platforms. Micro
averaging pools true/false positive counts over classes before dividing
(for single-label data this makes precision = recall = accuracy); macro
averaging takes the unweighted mean of per-class values, defining 0/0 as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError, EmptyInputError

AVERAGING_MODES = ("micro", "macro")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DataError(f"confusion matrix must be square, got {counts.shape}")
        if np.any(counts < 0):
            raise DataError("confusion matrix entries must be nonnegative")
        if self.labels is not None and len(self.labels) != counts.shape[0]:
            raise DataError("label list does not match matrix size")

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def class_counts(self, index: int) -> tuple[int, int, int]:
        """(true positives, false positives, false negatives) for one class."""
        tp = int(self.counts[index, index])
        fp = int(self.counts[:, index].sum()) - tp
        fn = int(self.counts[index, :].sum()) - tp
        return tp, fp, fn


def confusion(
    true_labels, predicted_labels, class_count: int, labels: tuple[str, ...] | None = None
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a class_count x class_count matrix."""
    y_true = np.asarray(true_labels, dtype=np.int64)
    y_pred = np.asarray(predicted_labels, dtype=np.int64)
    if y_true.size == 0:
        raise EmptyInputError("cannot build a confusion matrix from no samples")
    if y_true.shape != y_pred.shape:
        raise DataError(
            f"label sequences have different lengths: {y_true.size} vs {y_pred.size}"
        )
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if arr.min() < 0 or arr.max() >= class_count:
            raise DataError(f"{name} labels outside [0, {class_count})")
    counts = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts=counts, labels=labels)


def accuracy(cm: ConfusionMatrix) -> float:
    """Correctly predicted instances over total instances."""
    total = cm.total
    if total == 0:
        raise EmptyInputError("confusion matrix is empty")
    return int(np.trace(cm.counts)) / total


def precision_recall_f1(cm: ConfusionMatrix, mode: str = "macro") -> tuple[float, float, float]:
    """(precision, recall, f1) under the requested averaging mode."""
    if mode not in AVERAGING_MODES:
        raise ValueError(f"mode must be one of {AVERAGING_MODES}, got '{mode}'")
    if cm.total == 0:
        raise EmptyInputError("confusion matrix is empty")

    per_class = [cm.class_counts(i) for i in range(cm.class_count)]
    if mode == "micro":
        tp = sum(c[0] for c in per_class)
        fp = sum(c[1] for c in per_class)
        fn = sum(c[2] for c in per_class)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
        return precision, recall, f1

    precisions, recalls, f1s = [], [], []
    for tp, fp, fn in per_class:
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2.0 * p * r / (p + r) if p + r else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    c = cm.class_count
    return sum(precisions) / c, sum(recalls) / c, sum(f1s) / c


def per_class_detail(cm: ConfusionMatrix) -> list[dict]:
    """Per-class precision/recall/f1 plus the raw counts, for reports."""
    rows = []
    for i in range(cm.class_count):
        tp, fp, fn = cm.class_counts(i)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2.0 * p * r / (p + r) if p + r else 0.0
        rows.append(
            {
                "label": cm.labels[i] if cm.labels else str(i),
                "tp": tp,
                "fp": fp,
                "fn": fn,
                "precision": p,
                "recall": r,
                "f1": f,
            }
        )
    return rows


@dataclass(frozen=True)
class AucReport:
    macro: float
    per_class: dict[int, float]
    skipped: tuple[int, ...]


def _binary_auc_midrank(scores: np.ndarray, positive: np.ndarray) -> float:
    """ROC area via the midrank formulation; ties count one half."""
    ranks = rankdata(scores)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_ovr_report(true_labels, probabilities) -> AucReport:
    """One-vs-rest ROC areas per class and their macro mean.

    Classes without both a positive and a negative example are skipped and
    listed in the report; if every class is skipped there is no ranking to
    score and the input is rejected.
    """
    y = np.asarray(true_labels, dtype=np.int64)
    probs = np.asarray(probabilities, dtype=np.float64)
    if y.size == 0:
        raise EmptyInputError("no samples")
    if probs.ndim != 2 or probs.shape[0] != y.size:
        raise DataError(f"probability matrix shape {probs.shape} does not match labels")

    per_class: dict[int, float] = {}
    skipped: list[int] = []
    for c in range(probs.shape[1]):
        positive = y == c
        n_pos = int(positive.sum())
        if n_pos == 0 or n_pos == y.size:
            skipped.append(c)
            continue
        per_class[c] = _binary_auc_midrank(probs[:, c], positive)

    if not per_class:
        raise DataError("every class lacks positives or negatives; AUC undefined")
    macro = sum(per_class.values()) / len(per_class)
    return AucReport(macro=macro, per_class=per_class, skipped=tuple(skipped))


def auc_ovr_macro(true_labels, probabilities) -> float:
    return auc_ovr_report(true_labels, probabilities).macro


@dataclass(frozen=True)
class ClassifierScore:
    """The metric set that feeds one classifier's ensemble weight.

    f1 is kept consistent with the stored precision and recall via the
    harmonic mean; accuracy is carried for reporting but never weighted.
    """

    precision: float
    recall: float
    f1: float
    auc: float
    averaging: str
    accuracy: float

    def __post_init__(self):
        for name in ("precision", "recall", "f1", "auc", "accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {v}")
        if self.averaging not in AVERAGING_MODES:
            raise DataError(f"unknown averaging mode '{self.averaging}'")
        if self.precision > 0 and self.recall > 0:
            hm = 2.0 * self.precision * self.recall / (self.precision + self.recall)
            if abs(self.f1 - hm) > 1e-9:
                raise DataError(
                    f"f1 {self.f1} is not the harmonic mean {hm} of precision and recall"
                )

    @classmethod
    def from_confusion(
        cls, cm: ConfusionMatrix, auc: float, mode: str = "macro"
    ) -> "ClassifierScore":
        p, r, _ = precision_recall_f1(cm, mode)
        f1 = 2.0 * p * r / (p + r) if p + r else 0.0
        return cls(
            precision=p, recall=r, f1=f1, auc=auc, averaging=mode, accuracy=accuracy(cm)
        )

    def metric_values(self) -> tuple[float, float, float, float]:
        return self.precision, self.recall, self.f1, self.auc

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "averaging": self.averaging,
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClassifierScore":
        return cls(
            precision=float(doc["precision"]),
            recall=float(doc["recall"]),
            f1=float(doc["f1"]),
            auc=float(doc["auc"]),
            averaging=str(doc.get("averaging", "macro")),
            accuracy=float(doc.get("accuracy", 0.0)),
        )


def metrics_report(
    cm: ConfusionMatrix,
    true_labels=None,
    probabilities=None,
    mode: str = "macro",
    seed: int | None = None,
) -> dict:
    """JSON-ready summary: confusion matrix, per-class and averaged metrics."""
    p, r, f1 = precision_recall_f1(cm, mode)
    report = {
        "confusion": cm.counts.tolist(),
        "labels": list(cm.labels) if cm.labels else None,
        "sample_count": cm.total,
        "averaging": mode,
        "accuracy": accuracy(cm),
        "precision": p,
        "recall": r,
        "f1": f1,
        "per_class": per_class_detail(cm),
        "seed": seed,
    }
    if true_labels is not None and probabilities is not None:
        auc = auc_ovr_report(true_labels, probabilities)
        report["auc"] = auc.macro
        report["auc_skipped_classes"] = list(auc.skipped)
    return report
