"""Stateless numeric primitives used by layers, losses, and trainers."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Row-normalized exponentials, stabilized by max-subtraction.

    Rows sum to 1 within 1e-9 even for inputs with magnitude up to ~1e3.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[axis] < 1:
        raise NumericError("softmax needs at least one logit along the reduced axis")
    if not np.all(np.isfinite(logits)):
        raise NumericError("softmax received non-finite logits")
    shifted = logits - logits.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)), computed without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)
