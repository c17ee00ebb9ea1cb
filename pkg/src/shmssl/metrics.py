"""Confusion matrix and classification metrics.

"F1" throughout this package means the macro average: the unweighted mean
over classes of the per-class harmonic mean of precision and recall.
Undefined precision/recall (empty denominator) is reported as 0 and flagged.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass
class ConfusionMatrix:
    """counts[r][p] = number of samples of true class r predicted as p."""

    counts: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = self.counts.shape[0]
        if self.counts.ndim != 2 or self.counts.shape != (k, k):
            raise InputError(f"confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise InputError("confusion matrix entries must be non-negative")
        if len(self.class_names) != k:
            raise InputError(f"{len(self.class_names)} names for {k} classes")

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(predictions, labels, k: int, class_names=None) -> ConfusionMatrix:
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise InputError(
            f"predictions {predictions.shape} and labels {labels.shape} must be equal-length 1-D"
        )
    if predictions.size and not (
        0 <= predictions.min() and predictions.max() < k
        and 0 <= labels.min() and labels.max() < k
    ):
        raise InputError(f"class indices must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    names = list(class_names) if class_names is not None else [str(i) for i in range(k)]
    return ConfusionMatrix(counts, names)


def per_class_metrics(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class (precision, recall, degenerate flag).

    The flag marks classes where a denominator was empty (no predictions of
    that class for precision, no support for recall); those scores are 0.
    """
    counts = cm.counts
    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0).astype(np.float64)
    support = counts.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    degenerate = (predicted == 0) | (support == 0)
    return precision, recall, degenerate


def overall(cm: ConfusionMatrix) -> tuple[float, float]:
    """(accuracy, macro F1)."""
    if cm.total < 1:
        raise InputError("cannot score an empty confusion matrix")
    accuracy = float(np.trace(cm.counts) / cm.total)
    precision, recall, _ = per_class_metrics(cm)
    denom = precision + recall
    f1 = np.divide(2.0 * precision * recall, denom,
                   out=np.zeros_like(denom), where=denom > 0)
    return accuracy, float(f1.mean())


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    """CSV with true-class rows, predicted-class columns, and an accuracy footer."""
    accuracy, _ = overall(cm)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\predicted"] + cm.class_names)
        for name, row in zip(cm.class_names, cm.counts):
            writer.writerow([name] + [int(v) for v in row])
        writer.writerow(["accuracy", f"{accuracy:.4f}"])
