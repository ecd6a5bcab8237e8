"""Confusion matrix and the imbalance-aware summary used in reports.

Per-class "accuracy" is recall (diagonal over row sum); balanced accuracy is
the unweighted mean of recalls over classes that appear in the truth set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def confusion(true_labels, predicted_labels, num_classes: int) -> np.ndarray:
    """K x K counts, rows = true class, columns = predicted class."""
    t = np.asarray(true_labels, dtype=np.int64).ravel()
    p = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} true vs {p.size} predicted labels")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} label out of range [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


@dataclass
class MetricsReport:
    per_class_recall: list[float]
    per_class_f1: list[float]
    overall_accuracy: float
    balanced_accuracy: float
    class_counts: list[int]

    def worst_k_recall(self, k: int = 3) -> float:
        """Mean of the ``k`` lowest recalls among classes present in the truth set."""
        present = [r for r, n in zip(self.per_class_recall, self.class_counts) if n > 0]
        return float(np.mean(sorted(present)[:k]))

    def to_dict(self, loss_spec: Optional[dict] = None, seed: Optional[int] = None) -> dict:
        return {
            "per_class_recall": self.per_class_recall,
            "per_class_f1": self.per_class_f1,
            "overall_accuracy": self.overall_accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "class_counts": self.class_counts,
            "loss_spec": loss_spec,
            "seed": seed,
        }


def report(cm) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError("confusion matrix must be square")
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty evaluation: confusion matrix has no samples")
    diag = np.diag(cm).astype(np.float64)
    rows = cm.sum(axis=1).astype(np.float64)
    cols = cm.sum(axis=0).astype(np.float64)
    recall = np.divide(diag, rows, out=np.zeros_like(diag), where=rows > 0)
    precision = np.divide(diag, cols, out=np.zeros_like(diag), where=cols > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=denom > 0)
    return MetricsReport(
        per_class_recall=[float(v) for v in recall],
        per_class_f1=[float(v) for v in f1],
        overall_accuracy=float(diag.sum() / total),
        balanced_accuracy=float(recall[rows > 0].mean()),
        class_counts=[int(v) for v in rows],
    )


def evaluate(true_labels, predicted_labels, num_classes: int) -> MetricsReport:
    return report(confusion(true_labels, predicted_labels, num_classes))
