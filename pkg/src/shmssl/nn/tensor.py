"""Parameter tensor: an n-dimensional float64 array with a gradient slot."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


class Tensor:
    """A float64 array plus an optional gradient of the same shape.

    Data is stored C-contiguous, so ``data.ravel()`` is the row-major flat
    view. Activations flowing between layers are plain ndarrays; Tensor is
    the currency for parameters and anything an optimizer touches.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, grad=None):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad = None
        if grad is not None:
            self.set_grad(grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def set_grad(self, grad) -> None:
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match parameter shape {self.data.shape}"
            )
        self.grad = grad

    def accumulate_grad(self, grad) -> None:
        """Add `grad` into the slot; takes ownership of a freshly computed array."""
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match parameter shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = grad
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def copy(self) -> "Tensor":
        out = Tensor(self.data.copy())
        if self.grad is not None:
            out.grad = self.grad.copy()
        return out

    @classmethod
    def zeros(cls, shape) -> "Tensor":
        return cls(np.zeros(shape, dtype=np.float64))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"
