"""Self-supervised pre-training: reconstruction, contrastive, and adversarial.

Four pretext tasks, each yielding a pre-trained encoder:

* ``ae``     — encoder/decoder reconstruction under batch-mean squared error.
* ``simclr`` — two augmented views (random crop resized back + Gaussian
  noise), encoder + linear projector, temperature-scaled InfoNCE over the
  2B-1 other embeddings in the batch.
* ``mixup``  — convex sample mixing with Beta-distributed coefficients; the
  mixed embedding is pulled toward both sources in proportion to the mixing
  coefficient, against both candidate sets in the denominator.
* ``gan``    — generator (decoder architecture) against a CNN discriminator;
  the discriminator minimizes -log D(x) - log(1 - D(x_fake)), the generator
  minimizes the non-saturating -log D(x_fake).

No labels are consumed anywhere here: the API accepts bare feature rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import (
    ConfigError,
    DimensionError,
    NumericError,
    TrainingDivergedError,
)
from .models import INPUT_DIM, ModelBundle, as_input_batch, build
from .nn import Adam, Sequential, sigmoid, softplus

METHOD_TEMPERATURES = {"simclr": 0.5, "mixup": 0.1}
PRETRAIN_METHODS = ("ae", "simclr", "mixup", "gan")


@dataclass(frozen=True)
class AugmentationConfig:
    crop_min_fraction: float = 0.5
    noise_sigma: float = 0.05
    mixup_alpha: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.crop_min_fraction <= 1.0:
            raise ConfigError("crop_min_fraction must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.mixup_alpha <= 0:
            raise ConfigError("mixup_alpha must be positive")


@dataclass(frozen=True)
class PretrainConfig:
    method: str = "ae"
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    temperature: float | None = None
    seed: int = 0
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)

    def __post_init__(self):
        if self.method not in PRETRAIN_METHODS:
            raise ConfigError(f"unknown pre-training method {self.method!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if self.resolved_temperature() <= 0:
            raise ConfigError("temperature must be positive")

    def resolved_temperature(self) -> float:
        if self.temperature is not None:
            return self.temperature
        return METHOD_TEMPERATURES.get(self.method, 0.5)


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors; errors on zero norms."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionError(f"vector lengths differ: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise NumericError("cosine similarity undefined for zero-norm vectors")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def _normalize_rows(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0.0):
        raise NumericError("zero-norm embedding")
    return z / norms[:, None], norms


def _normalize_backward(grad_u, u, norms):
    return (grad_u - (grad_u * u).sum(axis=1, keepdims=True) * u) / norms[:, None]


def ae_loss(batch: np.ndarray, encoder: Sequential, decoder: Sequential) -> float:
    """Batch-mean squared reconstruction error of decode(encode(x))."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[1] != 1 or batch.shape[2] != INPUT_DIM:
        raise DimensionError(f"expected (B, 1, {INPUT_DIM}) batch, got {batch.shape}")
    h = encoder.forward(batch, training=False)
    recon = decoder.forward(h[:, :, None], training=False)
    diff = recon - batch
    return float(np.sum(diff * diff) / batch.shape[0])


def simclr_augment(x: np.ndarray, config: AugmentationConfig,
                   stream: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Two independently augmented views: random crop resized back, plus noise."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != INPUT_DIM:
        raise DimensionError(f"expected a length-{INPUT_DIM} feature, got {x.size}")
    if stream is None:
        stream = rngmod.spawn(config.seed, "augment")
    sigma = config.noise_sigma * x.std()
    views = []
    for _ in range(2):
        frac = stream.uniform(config.crop_min_fraction, 1.0)
        length = int(np.ceil(frac * INPUT_DIM))
        start = int(stream.integers(0, INPUT_DIM - length + 1))
        crop = x[start:start + length]
        view = np.interp(np.linspace(0.0, length - 1, INPUT_DIM), np.arange(length), crop)
        view = view + stream.normal(0.0, sigma, INPUT_DIM) if sigma > 0 else view
        views.append(view)
    return views[0], views[1]


def simclr_loss(z1: np.ndarray, z2: np.ndarray, tau: float) -> float:
    loss, _, _ = simclr_loss_and_grad(z1, z2, tau)
    return loss


def simclr_loss_and_grad(z1: np.ndarray, z2: np.ndarray,
                         tau: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Symmetric InfoNCE over the 2B stacked embeddings, excluding self.

    For each anchor the positive is its partner view; the denominator runs
    over every other embedding in both views. Returns the loss and its
    gradients with respect to z1 and z2.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape or z1.ndim != 2:
        raise DimensionError(f"view batches must share shape; got {z1.shape} and {z2.shape}")
    b = z1.shape[0]
    z = np.vstack([z1, z2])
    u, norms = _normalize_rows(z)
    logits = (u @ u.T) / tau
    np.fill_diagonal(logits, -np.inf)
    pos = np.concatenate([np.arange(b, 2 * b), np.arange(0, b)])
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    denom = exp.sum(axis=1)
    lse = row_max[:, 0] + np.log(denom)
    anchors = np.arange(2 * b)
    loss = float(np.mean(lse - logits[anchors, pos]))

    probs = exp / denom[:, None]
    d = probs.copy()
    d[anchors, pos] -= 1.0
    d /= 2 * b * tau
    grad_u = (d + d.T) @ u
    grad_z = _normalize_backward(grad_u, u, norms)
    return loss, grad_z[:b], grad_z[b:]


def mixup_augment(x1: np.ndarray, x2: np.ndarray, alpha: float,
                  stream: np.random.Generator | None = None) -> tuple[np.ndarray, float]:
    """Convex combination of two samples with lambda ~ Beta(alpha, alpha)."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise DimensionError(f"samples must share shape; got {x1.shape} and {x2.shape}")
    if stream is None:
        stream = rngmod.spawn(0, "mixup")
    lam = float(stream.beta(alpha, alpha))
    return lam * x1 + (1.0 - lam) * x2, lam


def mixup_loss(z1: np.ndarray, z_mixed: np.ndarray, z2: np.ndarray,
               lams: np.ndarray, tau: float) -> float:
    loss, _, _, _ = mixup_loss_and_grad(z1, z_mixed, z2, lams, tau)
    return loss


def mixup_loss_and_grad(z1, z_mixed, z2, lams, tau):
    """Mixing-weighted InfoNCE of each mixed embedding against both sources.

    Row i's two positives are (z1_i, z2_i) weighted by (lam_i, 1-lam_i); the
    shared denominator sums the exponentials over both candidate batches.
    Returns the loss and gradients for (z1, z_mixed, z2).
    """
    z1 = np.asarray(z1, dtype=np.float64)
    zm = np.asarray(z_mixed, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    lams = np.asarray(lams, dtype=np.float64).ravel()
    if not (z1.shape == z2.shape == zm.shape) or z1.ndim != 2:
        raise DimensionError("the three embedding batches must share one (B, d) shape")
    b = z1.shape[0]
    if lams.shape != (b,):
        raise DimensionError(f"need one mixing coefficient per row, got {lams.shape}")
    a, na = _normalize_rows(zm)
    u1, n1 = _normalize_rows(z1)
    u2, n2 = _normalize_rows(z2)
    logits = np.hstack([a @ u1.T, a @ u2.T]) / tau   # (B, 2B)
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    lse = row_max[:, 0] + np.log(exp.sum(axis=1))
    rows = np.arange(b)
    loss = float(np.mean(
        -(lams * logits[rows, rows] + (1.0 - lams) * logits[rows, b + rows]) + lse
    ))

    probs = exp / exp.sum(axis=1, keepdims=True)
    g = probs.copy()
    g[rows, rows] -= lams
    g[rows, b + rows] -= 1.0 - lams
    g /= b * tau
    g1, g2 = g[:, :b], g[:, b:]
    grad_a = g1 @ u1 + g2 @ u2
    grad_u1 = g1.T @ a
    grad_u2 = g2.T @ a
    return (loss,
            _normalize_backward(grad_u1, u1, n1),
            _normalize_backward(grad_a, a, na),
            _normalize_backward(grad_u2, u2, n2))


def _disc_logits(bundle: ModelBundle, batch: np.ndarray, training: bool) -> np.ndarray:
    h = bundle.nets["disc_encoder"].forward(batch, training=training)
    return bundle.nets["disc_head"].forward(h, training=training)[:, 0]


def gan_loss(real: np.ndarray, fake: np.ndarray, disc: ModelBundle) -> tuple[float, float]:
    """Adversarial losses for one real/fake batch pair.

    loss_D is the batch mean of -log D(x) - log(1 - D(x_fake)); it is 2*ln 2
    for an indifferent discriminator and approaches 0 for a perfect one.
    loss_G is the non-saturating generator objective -log D(x_fake).
    """
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise DimensionError(f"real batch {real.shape} and fake batch {fake.shape} differ")
    t_real = _disc_logits(disc, real, training=False)
    t_fake = _disc_logits(disc, fake, training=False)
    for name, p in (("real", sigmoid(t_real)), ("fake", sigmoid(t_fake))):
        if not np.all(np.isfinite(p)) or np.any(p <= 0.0) or np.any(p >= 1.0):
            raise NumericError(f"discriminator probability outside (0, 1) on {name} batch")
    loss_d = float(np.mean(softplus(-t_real) + softplus(t_fake)))
    loss_g = float(np.mean(softplus(-t_fake)))
    return loss_d, loss_g


def _check_finite(loss: float, epoch: int, batch: int, what: str) -> None:
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"{what} loss became non-finite", epoch, batch)


class _AeStep:
    def __init__(self, bundle, config):
        self.bundle = bundle
        self.adam = Adam([p for _, p in bundle.parameters()], lr=config.lr)

    def __call__(self, batch, stream):
        enc, dec = self.bundle.nets["encoder"], self.bundle.nets["decoder"]
        x = as_input_batch(batch)
        self.bundle.zero_grad()
        h = enc.forward(x, training=True)
        recon = dec.forward(h[:, :, None], training=True)
        diff = recon - x
        loss = float(np.sum(diff * diff) / x.shape[0])
        grad_h = dec.backward(2.0 * diff / x.shape[0])
        enc.backward(grad_h[:, :, 0])
        self.adam.step()
        return loss


class _ContrastiveStep:
    def __init__(self, bundle, config):
        self.bundle = bundle
        self.config = config
        self.tau = config.resolved_temperature()
        self.adam = Adam([p for _, p in bundle.parameters()], lr=config.lr)

    def _embed(self, rows, training=True):
        enc, proj = self.bundle.nets["encoder"], self.bundle.nets["projector"]
        return proj.forward(enc.forward(as_input_batch(rows), training=training),
                            training=training)

    def _backward(self, grad_z):
        enc, proj = self.bundle.nets["encoder"], self.bundle.nets["projector"]
        enc.backward(proj.backward(grad_z))


class _SimclrStep(_ContrastiveStep):
    def __call__(self, batch, stream):
        b = batch.shape[0]
        v1 = np.empty_like(batch)
        v2 = np.empty_like(batch)
        for i in range(b):
            v1[i], v2[i] = simclr_augment(batch[i], self.config.augmentation, stream)
        self.bundle.zero_grad()
        z = self._embed(np.vstack([v1, v2]))
        loss, g1, g2 = simclr_loss_and_grad(z[:b], z[b:], self.tau)
        self._backward(np.vstack([g1, g2]))
        self.adam.step()
        return loss


class _MixupStep(_ContrastiveStep):
    def __call__(self, batch, stream):
        b = batch.shape[0]
        perm = stream.permutation(b)
        lams = stream.beta(self.config.augmentation.mixup_alpha,
                           self.config.augmentation.mixup_alpha, size=b)
        mixed = lams[:, None] * batch + (1.0 - lams[:, None]) * batch[perm]
        self.bundle.zero_grad()
        z = self._embed(np.vstack([batch, mixed]))
        z1, zm = z[:b], z[b:]
        loss, g1, gm, g2 = mixup_loss_and_grad(z1, zm, z1[perm], lams, self.tau)
        np.add.at(g1, perm, g2)
        self._backward(np.vstack([g1, gm]))
        self.adam.step()
        return loss


class _GanStep:
    def __init__(self, bundle, config):
        self.bundle = bundle
        disc_params = ([p for _, p in bundle.nets["disc_encoder"].parameters()]
                       + [p for _, p in bundle.nets["disc_head"].parameters()])
        self.adam_d = Adam(disc_params, lr=config.lr)
        self.adam_g = Adam([p for _, p in bundle.nets["generator"].parameters()], lr=config.lr)

    def _disc_backward(self, grad_logits):
        denc, dhead = self.bundle.nets["disc_encoder"], self.bundle.nets["disc_head"]
        return denc.backward(dhead.backward(grad_logits[:, None]))

    def __call__(self, batch, stream):
        gen = self.bundle.nets["generator"]
        b = batch.shape[0]
        real = as_input_batch(batch)

        # Discriminator step: push D(real) up and D(fake) down.
        noise = stream.standard_normal((b, 256))
        fake = gen.forward(noise[:, :, None], training=True)
        self.bundle.zero_grad()
        t_real = _disc_logits(self.bundle, real, training=True)
        loss_real = float(np.mean(softplus(-t_real)))
        self._disc_backward((sigmoid(t_real) - 1.0) / b)
        t_fake = _disc_logits(self.bundle, fake, training=True)
        loss_fake = float(np.mean(softplus(t_fake)))
        self._disc_backward(sigmoid(t_fake) / b)
        self.adam_d.step()

        # Generator step (non-saturating): push D(fake) up.
        self.bundle.zero_grad()
        noise = stream.standard_normal((b, 256))
        fake = gen.forward(noise[:, :, None], training=True)
        t = _disc_logits(self.bundle, fake, training=True)
        grad_fake = self._disc_backward((sigmoid(t) - 1.0) / b)
        gen.backward(grad_fake)
        self.adam_g.step()
        self.bundle.zero_grad()
        return loss_real + loss_fake


_STEPPERS = {"ae": _AeStep, "simclr": _SimclrStep, "mixup": _MixupStep, "gan": _GanStep}


def pretrain(method: str, features, config: PretrainConfig | None = None
             ) -> tuple[ModelBundle, list[float]]:
    """Run one pre-training method over unlabeled feature rows.

    Returns the trained bundle and the per-epoch loss trace (batch means; for
    GAN the discriminator objective is traced). Raises TrainingDivergedError
    with the epoch and batch index if any loss goes non-finite.
    """
    if config is None:
        config = PretrainConfig(method=method)
    if config.method != method:
        config = PretrainConfig(method=method, epochs=config.epochs,
                                batch_size=config.batch_size, lr=config.lr,
                                temperature=config.temperature, seed=config.seed,
                                augmentation=config.augmentation)
    if isinstance(features, np.ndarray):
        rows = np.asarray(features, dtype=np.float64)
    else:
        seq = list(features)
        if seq and hasattr(seq[0], "values"):
            rows = np.asarray([fv.values for fv in seq], dtype=np.float64)
        else:
            rows = np.asarray(seq, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2 or rows.shape[1] != INPUT_DIM:
        raise ConfigError(
            f"pre-training needs at least 2 feature rows of width {INPUT_DIM}; got {rows.shape}"
        )
    bundle = build(method, seed=config.seed)
    step = _STEPPERS[method](bundle, config)
    shuffle = rngmod.spawn(config.seed, "pretrain", method, "shuffle")
    batch_stream = rngmod.spawn(config.seed, "pretrain", method, "batch")
    n = rows.shape[0]
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = shuffle.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            chunk = order[start:start + config.batch_size]
            if chunk.size < 2:
                continue  # batchnorm needs more than one value per channel
            loss = step(rows[chunk], batch_stream)
            _check_finite(loss, epoch, len(losses), method)
            losses.append(loss)
        trace.append(float(np.mean(losses)))
    return bundle, trace
