"""Concrete network definitions and model bundles.

The encoder is a 5-block 1-D CNN (conv + batchnorm + ReLU) taking
(B, 1, 512) to a 256-dimensional latent; the decoder mirrors it with
transposed convolutions back to (B, 1, 512). The output-padding schedule
[0, 2, 1, 0, 2] makes the decoder lengths retrace the encoder lengths
exactly (1 -> 3 -> 11 -> 34 -> 102 -> 512), which plain stride/kernel
mirroring alone would miss (it lands on 405).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import ConfigError
from .nn import LayerSpec, Sequential, build_layer

INPUT_DIM = 512
LATENT_DIM = 256
PROJECTION_DIM = 128

ENCODER_CHANNELS = (16, 32, 64, 128, 256)
ENCODER_KERNELS = (5, 3, 3, 3, 3)
ENCODER_STRIDES = (5, 3, 3, 3, 3)

DECODER_CHANNELS = (128, 64, 32, 16, 1)
DECODER_KERNELS = (3, 3, 3, 3, 5)
DECODER_STRIDES = (3, 3, 3, 3, 5)
DECODER_OUTPUT_PADDING = (0, 2, 1, 0, 2)

METHODS = ("sup", "ae", "simclr", "mixup", "gan")


@dataclass
class ModelBundle:
    """Named collection of networks plus the metadata needed to rebuild them."""

    method: str
    seed: int
    nets: dict[str, Sequential] = field(default_factory=dict)

    def clone(self) -> "ModelBundle":
        return ModelBundle(self.method, self.seed,
                           {name: net.clone() for name, net in self.nets.items()})

    def parameters(self):
        out = []
        for name, net in self.nets.items():
            for pname, p in net.parameters():
                out.append((f"{name}.{pname}", p))
        return out

    def zero_grad(self) -> None:
        for net in self.nets.values():
            net.zero_grad()


def _encoder_specs() -> list[LayerSpec]:
    specs = []
    in_ch = 1
    for ch, k, s in zip(ENCODER_CHANNELS, ENCODER_KERNELS, ENCODER_STRIDES):
        specs.append(LayerSpec("conv1d", in_channels=in_ch, out_channels=ch, kernel=k, stride=s))
        specs.append(LayerSpec("batchnorm1d", in_channels=ch))
        specs.append(LayerSpec("relu"))
        in_ch = ch
    specs.append(LayerSpec("flatten"))
    return specs


def _decoder_specs() -> list[LayerSpec]:
    specs = []
    in_ch = LATENT_DIM
    blocks = zip(DECODER_CHANNELS, DECODER_KERNELS, DECODER_STRIDES, DECODER_OUTPUT_PADDING)
    for i, (ch, k, s, op) in enumerate(blocks):
        specs.append(LayerSpec("deconv1d", in_channels=in_ch, out_channels=ch,
                               kernel=k, stride=s, output_padding=op))
        specs.append(LayerSpec("batchnorm1d", in_channels=ch))
        if i < len(DECODER_CHANNELS) - 1:
            specs.append(LayerSpec("relu"))
        in_ch = ch
    return specs


def _mlp_specs(k: int) -> list[LayerSpec]:
    return [
        LayerSpec("linear", in_channels=LATENT_DIM, out_channels=LATENT_DIM),
        LayerSpec("relu"),
        LayerSpec("linear", in_channels=LATENT_DIM, out_channels=k),
    ]


def _projector_specs() -> list[LayerSpec]:
    return [LayerSpec("linear", in_channels=LATENT_DIM, out_channels=PROJECTION_DIM)]


def _disc_head_specs() -> list[LayerSpec]:
    return [LayerSpec("linear", in_channels=LATENT_DIM, out_channels=1)]


_NET_SPECS = {
    "encoder": _encoder_specs,
    "decoder": _decoder_specs,
    "projector": _projector_specs,
    "generator": _decoder_specs,
    "disc_encoder": _encoder_specs,
    "disc_head": _disc_head_specs,
}

# Which named networks each bundle kind carries. The classifier head is the
# only K-dependent network.
BUNDLE_NETS = {
    "encoder": ("encoder",),
    "decoder": ("decoder",),
    "projector": ("projector",),
    "classifier": ("encoder", "head"),
    "sup": ("encoder", "head"),
    "ae": ("encoder", "decoder"),
    "simclr": ("encoder", "projector"),
    "mixup": ("encoder", "projector"),
    "gan": ("generator", "disc_encoder", "disc_head"),
}

_CLASSIFIER_KINDS = ("classifier", "sup")


def net_specs(name: str, k: int | None = None) -> list[LayerSpec]:
    if name == "head":
        if k is None:
            raise ConfigError("classifier head needs the class count K")
        return _mlp_specs(k)
    return _NET_SPECS[name]()


def _build_net(name: str, seed: int, k: int | None = None) -> Sequential:
    stream = rngmod.spawn(seed, "init", name)
    layers = [build_layer(spec, stream) for spec in net_specs(name, k)]
    return Sequential(layers, name=name)


def build(kind: str, k: int | None = None, seed: int = 0) -> ModelBundle:
    """Build a freshly initialized bundle; identical seeds give identical parameters."""
    if kind not in BUNDLE_NETS:
        raise ConfigError(f"unknown model kind {kind!r}")
    if kind in _CLASSIFIER_KINDS:
        if k is None or k < 2:
            raise ConfigError(f"classifier needs K >= 2 classes, got {k}")
    bundle = ModelBundle(method=kind, seed=seed)
    for name in BUNDLE_NETS[kind]:
        bundle.nets[name] = _build_net(name, seed, k)
    return bundle


def transfer_encoder(pretrained: ModelBundle, k: int, head_seed: int | None = None) -> ModelBundle:
    """Copy the pre-trained encoder (GAN: the discriminator's encoder) under a fresh head.

    Batchnorm running statistics travel with the encoder. Projector and
    decoder networks are dropped.
    """
    if "encoder" in pretrained.nets:
        encoder = pretrained.nets["encoder"].clone()
    elif "disc_encoder" in pretrained.nets:
        encoder = pretrained.nets["disc_encoder"].clone()
        encoder.name = "encoder"
    else:
        raise ConfigError(f"bundle for {pretrained.method!r} does not contain an encoder")
    if k < 2:
        raise ConfigError(f"classifier needs K >= 2 classes, got {k}")
    seed = pretrained.seed if head_seed is None else head_seed
    bundle = ModelBundle(method="classifier", seed=seed)
    bundle.nets["encoder"] = encoder
    bundle.nets["head"] = _build_net("head", seed, k)
    return bundle


def as_input_batch(features: np.ndarray) -> np.ndarray:
    """(B, 512) feature rows -> (B, 1, 512) network input."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[None, :]
    if features.ndim != 2 or features.shape[1] != INPUT_DIM:
        raise ConfigError(f"expected (B, {INPUT_DIM}) features, got shape {features.shape}")
    return features[:, None, :]


def classifier_logits(bundle: ModelBundle, features: np.ndarray, training: bool = False) -> np.ndarray:
    x = as_input_batch(features)
    h = bundle.nets["encoder"].forward(x, training=training)
    return bundle.nets["head"].forward(h, training=training)


def classifier_num_classes(bundle: ModelBundle) -> int:
    return bundle.nets["head"].layers[-1].spec.out_channels


def parameter_count(net: Sequential) -> int:
    return sum(p.size for _, p in net.parameters())
