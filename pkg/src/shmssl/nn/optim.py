"""Bias-corrected Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


class Adam:
    """Standard Adam over a fixed list of parameter tensors.

    A step with all-zero gradients leaves every parameter unchanged (the
    bias-corrected first moment stays zero), but still advances step_count.
    """

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params: list[Tensor] = list(params)
        self.state = AdamState(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
            m=[np.zeros_like(p.data) for p in self.params],
            v=[np.zeros_like(p.data) for p in self.params],
        )
        self._scratch = [np.empty_like(p.data) for p in self.params]

    def step(self) -> None:
        st = self.state
        st.step_count += 1
        bc1 = 1.0 - st.beta1 ** st.step_count
        bc2 = 1.0 - st.beta2 ** st.step_count
        for i, p in enumerate(self.params):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            if grad.shape != p.data.shape:
                raise DimensionError(
                    f"gradient shape {grad.shape} misaligned with parameter shape {p.data.shape}"
                )
            m, v, buf = st.m[i], st.v[i], self._scratch[i]
            m *= st.beta1
            m += (1.0 - st.beta1) * grad
            v *= st.beta2
            np.multiply(grad, grad, out=buf)
            buf *= 1.0 - st.beta2
            v += buf
            np.divide(v, bc2, out=buf)
            np.sqrt(buf, out=buf)
            buf += st.eps
            np.divide(m, buf, out=buf)
            buf *= st.lr / bc1
            p.data -= buf

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
