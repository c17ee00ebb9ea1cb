"""Loss primitives with analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, InputError
from .functional import softmax


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch-mean squared reconstruction error: (1/B) sum_i ||pred_i - target_i||^2.

    Returns the scalar loss and its gradient with respect to `pred`.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {target.shape}")
    b = pred.shape[0]
    diff = pred - target
    loss = float(np.sum(diff * diff) / b)
    return loss, 2.0 * diff / b


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) against integer labels.

    The returned gradient with respect to the logits is the closed form
    (probs - one_hot) / B.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise DimensionError(
            f"logits shape {logits.shape} incompatible with labels shape {labels.shape}"
        )
    k = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise InputError(f"labels must lie in [0, {k})")
    b = logits.shape[0]
    probs = softmax(logits, axis=-1)
    picked = probs[np.arange(b), labels]
    loss = float(-np.log(np.clip(picked, 1e-300, None)).mean())
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    return loss, grad / b
