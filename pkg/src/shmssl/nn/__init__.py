from .tensor import Tensor
from .layers import (
    LayerSpec,
    Layer,
    Conv1d,
    Deconv1d,
    BatchNorm1d,
    ReLU,
    Linear,
    Flatten,
    Sequential,
    build_layer,
    conv_output_length,
    deconv_output_length,
)
from .functional import softmax, sigmoid, softplus
from .optim import Adam, AdamState
from .gradcheck import gradient_check
from .losses import mse_loss, softmax_cross_entropy

__all__ = [
    "Tensor",
    "LayerSpec",
    "Layer",
    "Conv1d",
    "Deconv1d",
    "BatchNorm1d",
    "ReLU",
    "Linear",
    "Flatten",
    "Sequential",
    "build_layer",
    "conv_output_length",
    "deconv_output_length",
    "softmax",
    "sigmoid",
    "softplus",
    "Adam",
    "AdamState",
    "gradient_check",
    "mse_loss",
    "softmax_cross_entropy",
]
