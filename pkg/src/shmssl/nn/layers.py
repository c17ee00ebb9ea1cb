"""Differentiable layers with explicit forward/backward passes.

Each layer caches what its backward pass needs when run in training mode;
calling backward without a cached training-mode forward is a usage error.
Convolutions are valid (no padding): with the kernel/stride schedule used by
the models in this package, an input of length 512 collapses to length 1 and
the mirrored transposed stack restores it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DimensionError, UsageError
from .tensor import Tensor

LAYER_KINDS = ("conv1d", "deconv1d", "batchnorm1d", "relu", "linear", "flatten")


@dataclass(frozen=True)
class LayerSpec:
    """Static description of one layer; enough to build or rebuild it."""

    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 1
    stride: int = 1
    output_padding: int = 0
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")


def conv_output_length(length: int, kernel: int, stride: int) -> int:
    if length < kernel:
        raise DimensionError(f"input length {length} shorter than kernel {kernel}")
    return (length - kernel) // stride + 1


def deconv_output_length(length: int, kernel: int, stride: int, output_padding: int = 0) -> int:
    return (length - 1) * stride + kernel + output_padding


class Layer:
    """Base class: parameters, optional persistent state, one cached forward."""

    def __init__(self, spec: LayerSpec, name: str = ""):
        self.spec = spec
        self.name = name or spec.kind
        self.params: dict[str, Tensor] = {}
        self.state: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise UsageError(
                f"{self.spec.kind} {self.name!r}: backward called without a cached training-mode forward"
            )
        cache = self._cache
        self._cache = None
        return cache

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def clone(self) -> "Layer":
        out = build_layer(self.spec, rng=None, name=self.name)
        for key, p in self.params.items():
            out.params[key] = p.copy()
        for key, arr in self.state.items():
            out.state[key] = arr.copy()
        return out

    def _check_input(self, x: np.ndarray, expected: str, ok: bool) -> None:
        if not ok:
            raise DimensionError(
                f"{self.spec.kind} {self.name!r}: expected input {expected}, got shape {x.shape}"
            )


class Conv1d(Layer):
    """Valid 1-D convolution: output length = floor((L - kernel)/stride) + 1."""

    def __init__(self, spec: LayerSpec, rng: np.random.Generator | None, name: str = ""):
        super().__init__(spec, name)
        shape = (spec.out_channels, spec.in_channels, spec.kernel)
        if rng is not None:
            bound = np.sqrt(1.0 / (spec.in_channels * spec.kernel))
            self.params["weight"] = Tensor(rng.uniform(-bound, bound, size=shape))
        else:
            self.params["weight"] = Tensor.zeros(shape)
        self.params["bias"] = Tensor.zeros((spec.out_channels,))

    def forward(self, x, training=False):
        s = self.spec
        self._check_input(x, f"(B, {s.in_channels}, L>= {s.kernel})",
                          x.ndim == 3 and x.shape[1] == s.in_channels and x.shape[2] >= s.kernel)
        windows = sliding_window_view(x, s.kernel, axis=2)[:, :, :: s.stride, :]
        # (B, C, Lo, K) x (O, C, K) -> (B, Lo, O) -> (B, O, Lo)
        y = np.tensordot(windows, self.params["weight"].data, axes=([1, 3], [1, 2]))
        y = np.ascontiguousarray(y.transpose(0, 2, 1))
        y += self.params["bias"].data[None, :, None]
        self._cache = (x.shape, windows) if training else None
        return y

    def backward(self, grad_out):
        x_shape, windows = self._take_cache()
        s = self.spec
        w = self.params["weight"].data
        self.params["weight"].accumulate_grad(
            np.tensordot(grad_out, windows, axes=([0, 2], [0, 2]))
        )
        self.params["bias"].accumulate_grad(grad_out.sum(axis=(0, 2)))
        grad_x = np.zeros(x_shape, dtype=np.float64)
        l_out = grad_out.shape[2]
        # (B, O, Lo) x (O, C, K) -> (B, Lo, C, K), scattered back per kernel offset
        z = np.tensordot(grad_out, w, axes=([1], [0]))
        for t in range(s.kernel):
            sl = slice(t, t + s.stride * (l_out - 1) + 1, s.stride)
            grad_x[:, :, sl] += z[..., t].transpose(0, 2, 1)
        return grad_x


class Deconv1d(Layer):
    """Transposed 1-D convolution: output length = (L-1)*stride + kernel + output_padding."""

    def __init__(self, spec: LayerSpec, rng: np.random.Generator | None, name: str = ""):
        super().__init__(spec, name)
        shape = (spec.in_channels, spec.out_channels, spec.kernel)
        if rng is not None:
            bound = np.sqrt(1.0 / (spec.in_channels * spec.kernel))
            self.params["weight"] = Tensor(rng.uniform(-bound, bound, size=shape))
        else:
            self.params["weight"] = Tensor.zeros(shape)
        self.params["bias"] = Tensor.zeros((spec.out_channels,))

    def forward(self, x, training=False):
        s = self.spec
        self._check_input(x, f"(B, {s.in_channels}, L)",
                          x.ndim == 3 and x.shape[1] == s.in_channels and x.shape[2] >= 1)
        b, _, l_in = x.shape
        l_out = deconv_output_length(l_in, s.kernel, s.stride, s.output_padding)
        # (B, C, L) x (C, O, K) -> (B, L, O, K), scattered onto the output grid
        z = np.tensordot(x, self.params["weight"].data, axes=([1], [0]))
        y = np.zeros((b, s.out_channels, l_out), dtype=np.float64)
        for j in range(s.kernel):
            sl = slice(j, j + s.stride * (l_in - 1) + 1, s.stride)
            y[:, :, sl] += z[..., j].transpose(0, 2, 1)
        y += self.params["bias"].data[None, :, None]
        self._cache = (x,) if training else None
        return y

    def backward(self, grad_out):
        (x,) = self._take_cache()
        s = self.spec
        w = self.params["weight"].data
        b, _, l_in = x.shape
        # Gather the output-gradient slices each kernel offset touched.
        gathered = np.empty((b, s.out_channels, l_in, s.kernel), dtype=np.float64)
        for j in range(s.kernel):
            sl = slice(j, j + s.stride * (l_in - 1) + 1, s.stride)
            gathered[..., j] = grad_out[:, :, sl]
        self.params["weight"].accumulate_grad(
            np.tensordot(x, gathered, axes=([0, 2], [0, 2]))
        )
        self.params["bias"].accumulate_grad(grad_out.sum(axis=(0, 2)))
        grad_x = np.tensordot(gathered, w, axes=([1, 3], [1, 2]))
        return np.ascontiguousarray(grad_x.transpose(0, 2, 1))


class BatchNorm1d(Layer):
    """Per-channel normalization over the batch and length axes of (B, C, L)."""

    def __init__(self, spec: LayerSpec, rng: np.random.Generator | None = None, name: str = ""):
        super().__init__(spec, name)
        c = spec.in_channels
        self.params["gamma"] = Tensor(np.ones(c))
        self.params["beta"] = Tensor.zeros((c,))
        self.state["running_mean"] = np.zeros(c)
        self.state["running_var"] = np.ones(c)

    def forward(self, x, training=False):
        s = self.spec
        self._check_input(x, f"(B, {s.in_channels}, L)",
                          x.ndim == 3 and x.shape[1] == s.in_channels)
        gamma = self.params["gamma"].data[None, :, None]
        beta = self.params["beta"].data[None, :, None]
        if training:
            n = x.shape[0] * x.shape[2]
            if n < 2:
                raise DimensionError(
                    f"batchnorm1d {self.name!r}: needs at least 2 values per channel, got {n}"
                )
            mean = x.mean(axis=(0, 2))
            centered = x - mean[None, :, None]
            var = np.mean(centered * centered, axis=(0, 2))
            inv_std = 1.0 / np.sqrt(var + s.bn_eps)
            xhat = centered
            xhat *= inv_std[None, :, None]
            m = s.bn_momentum
            self.state["running_mean"] = (1 - m) * self.state["running_mean"] + m * mean
            self.state["running_var"] = (1 - m) * self.state["running_var"] + m * var * n / (n - 1)
            self._cache = (xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.state["running_var"] + s.bn_eps)
            xhat = (x - self.state["running_mean"][None, :, None]) * inv_std[None, :, None]
            self._cache = None
        return gamma * xhat + beta

    def backward(self, grad_out):
        xhat, inv_std = self._take_cache()
        gamma = self.params["gamma"].data
        n = grad_out.shape[0] * grad_out.shape[2]
        dgamma = (grad_out * xhat).sum(axis=(0, 2))
        dbeta = grad_out.sum(axis=(0, 2))
        # grad_x = gamma*inv_std * (grad_out - mean(grad_out) - xhat*mean(grad_out*xhat)),
        # with the channel means recovered from dbeta and dgamma.
        grad_x = xhat * (dgamma / n)[None, :, None]
        grad_x += (dbeta / n)[None, :, None]
        np.subtract(grad_out, grad_x, out=grad_x)
        grad_x *= (gamma * inv_std)[None, :, None]
        self.params["gamma"].accumulate_grad(dgamma)
        self.params["beta"].accumulate_grad(dbeta)
        return grad_x


class ReLU(Layer):
    def __init__(self, spec: LayerSpec | None = None, rng=None, name: str = ""):
        super().__init__(spec or LayerSpec(kind="relu"), name)

    def forward(self, x, training=False):
        self._cache = (x > 0) if training else None
        return np.maximum(x, 0.0)

    def backward(self, grad_out):
        mask = self._take_cache()
        return grad_out * mask


class Linear(Layer):
    """Affine map on (B, in_features) with weight shaped (out, in)."""

    def __init__(self, spec: LayerSpec, rng: np.random.Generator | None, name: str = ""):
        super().__init__(spec, name)
        shape = (spec.out_channels, spec.in_channels)
        if rng is not None:
            bound = np.sqrt(1.0 / spec.in_channels)
            self.params["weight"] = Tensor(rng.uniform(-bound, bound, size=shape))
        else:
            self.params["weight"] = Tensor.zeros(shape)
        self.params["bias"] = Tensor.zeros((spec.out_channels,))

    def forward(self, x, training=False):
        s = self.spec
        self._check_input(x, f"(B, {s.in_channels})",
                          x.ndim == 2 and x.shape[1] == s.in_channels)
        self._cache = (x,) if training else None
        return x @ self.params["weight"].data.T + self.params["bias"].data

    def backward(self, grad_out):
        (x,) = self._take_cache()
        self.params["weight"].accumulate_grad(grad_out.T @ x)
        self.params["bias"].accumulate_grad(grad_out.sum(axis=0))
        return grad_out @ self.params["weight"].data


class Flatten(Layer):
    """Collapse all trailing axes into one: (B, ...) -> (B, prod)."""

    def __init__(self, spec: LayerSpec | None = None, rng=None, name: str = ""):
        super().__init__(spec or LayerSpec(kind="flatten"), name)

    def forward(self, x, training=False):
        self._cache = (x.shape,) if training else None
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        (shape,) = self._take_cache()
        return grad_out.reshape(shape)


_LAYER_CLASSES = {
    "conv1d": Conv1d,
    "deconv1d": Deconv1d,
    "batchnorm1d": BatchNorm1d,
    "relu": ReLU,
    "linear": Linear,
    "flatten": Flatten,
}


def build_layer(spec: LayerSpec, rng: np.random.Generator | None, name: str = "") -> Layer:
    return _LAYER_CLASSES[spec.kind](spec, rng, name)


class Sequential:
    """A named chain of layers with joint forward/backward."""

    def __init__(self, layers: list[Layer], name: str = "net"):
        self.name = name
        self.layers = layers
        for i, layer in enumerate(layers):
            layer.name = f"{name}.{i}"

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            for key, p in layer.params.items():
                out.append((f"{i}.{layer.spec.kind}.{key}", p))
        return out

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Named persistent non-parameter state (batchnorm running stats)."""
        out = []
        for i, layer in enumerate(self.layers):
            for key, arr in layer.state.items():
                out.append((f"{i}.{layer.spec.kind}.{key}", arr))
        return out

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def clone(self) -> "Sequential":
        return Sequential([layer.clone() for layer in self.layers], name=self.name)

    def specs(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]
