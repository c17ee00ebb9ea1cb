"""Supervised fine-tuning of a transferred classifier on low-shot labels.

The whole classifier (encoder and MLP head) updates; after every epoch the
model is scored on the validation set and the parameters with the best
validation macro F1 are the ones returned. The purely supervised baseline
uses the same loop from a fresh initialization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .datagen import LabeledSample
from .errors import ConfigError, InputError, TrainingDivergedError
from .metrics import confusion, overall
from .models import (
    ModelBundle,
    build,
    classifier_logits,
    classifier_num_classes,
    transfer_encoder,
)
from .nn import Adam, softmax
from .nn.losses import softmax_cross_entropy

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class FinetuneConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    repeats: int = 5

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if self.repeats < 1:
            raise ConfigError("repeats must be positive")


class ClipCounter:
    """Counts how often a predicted probability had to be floored."""

    def __init__(self):
        self.count = 0


_DEFAULT_CLIP_COUNTER = ClipCounter()


def cross_entropy(probs: np.ndarray, labels, clip_counter: ClipCounter | None = None) -> float:
    """Mean over the batch of -log p[i, y_i] for probability rows.

    Rows must already sum to 1 (within 1e-6). Zero probabilities are floored
    at 1e-12 and counted on the clip counter instead of producing infinities.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.ndim != 1 or probs.shape[0] != labels.shape[0]:
        raise InputError(f"probs {probs.shape} incompatible with labels {labels.shape}")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6):
        raise InputError("probability rows must sum to 1 within 1e-6")
    k = probs.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise InputError(f"labels must lie in [0, {k})")
    picked = probs[np.arange(labels.size), labels]
    clipped = picked < PROB_FLOOR
    if np.any(clipped):
        (clip_counter or _DEFAULT_CLIP_COUNTER).count += int(clipped.sum())
        picked = np.maximum(picked, PROB_FLOOR)
    return float(-np.log(picked).mean())


def _as_arrays(samples: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    rows = np.asarray([s.feature.values for s in samples], dtype=np.float64)
    labels = np.asarray([s.label for s in samples], dtype=np.int64)
    return rows, labels


def predict(bundle: ModelBundle, rows: np.ndarray) -> np.ndarray:
    """Predicted class indices in evaluation mode (batchnorm running stats)."""
    logits = classifier_logits(bundle, rows, training=False)
    return np.argmax(logits, axis=1)


def evaluate(bundle: ModelBundle, samples: list[LabeledSample]) -> tuple[float, float]:
    """(macro F1, accuracy) of the classifier on labeled samples."""
    rows, labels = _as_arrays(samples)
    k = classifier_num_classes(bundle)
    cm = confusion(predict(bundle, rows), labels, k)
    accuracy, f1 = overall(cm)
    return f1, accuracy


def finetune(pretrained: ModelBundle | None, low_shot: list[LabeledSample],
             validation: list[LabeledSample], config: FinetuneConfig,
             k: int | None = None) -> tuple[ModelBundle, list[tuple[int, float, float]]]:
    """Train the classifier on the low-shot set; keep the best-validation epoch.

    With `pretrained` set, its encoder transfers under a freshly initialized
    head; with None a whole fresh classifier trains (supervised baseline).
    Returns the best bundle and the per-epoch (epoch, val_F1, val_accuracy)
    trace; the returned model's validation F1 equals the trace maximum.
    """
    rows, labels = _as_arrays(low_shot)
    classes_present = np.unique(labels)
    if classes_present.size < 2:
        raise ConfigError("low-shot set must cover at least 2 classes")
    if k is None:
        k = int(labels.max()) + 1
    if pretrained is not None:
        model = transfer_encoder(pretrained, k, head_seed=config.seed)
    else:
        model = build("classifier", k=k, seed=config.seed)
    missing = sorted(set(range(k)) - set(classes_present.tolist()))
    if missing:
        warnings.warn(f"classes {missing} absent from the low-shot set; training proceeds",
                      stacklevel=2)

    trace: list[tuple[int, float, float]] = []
    if config.epochs == 0:
        return model, trace

    adam = Adam([p for _, p in model.parameters()], lr=config.lr)
    shuffle = rngmod.spawn(config.seed, "finetune", "shuffle")
    best: ModelBundle | None = None
    best_f1 = -1.0
    n = rows.shape[0]
    for epoch in range(config.epochs):
        order = shuffle.permutation(n)
        for start in range(0, n, config.batch_size):
            chunk = order[start:start + config.batch_size]
            if chunk.size < 2:
                continue
            model.zero_grad()
            logits = classifier_logits(model, rows[chunk], training=True)
            loss, grad = softmax_cross_entropy(logits, labels[chunk])
            if not np.isfinite(loss):
                raise TrainingDivergedError("fine-tuning loss became non-finite",
                                            epoch, start // config.batch_size)
            model.nets["encoder"].backward(model.nets["head"].backward(grad))
            adam.step()
        val_f1, val_acc = evaluate(model, validation)
        trace.append((epoch, val_f1, val_acc))
        if val_f1 > best_f1:
            best_f1 = val_f1
            best = model.clone()
    assert best is not None
    return best, trace


def training_cross_entropy(bundle: ModelBundle, samples: list[LabeledSample]) -> float:
    """Cross-entropy of the classifier on a labeled set (evaluation mode)."""
    rows, labels = _as_arrays(samples)
    probs = softmax(classifier_logits(bundle, rows, training=False))
    return cross_entropy(probs, labels)
