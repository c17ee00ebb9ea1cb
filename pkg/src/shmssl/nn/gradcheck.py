"""Central-finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NumericError
from .tensor import Tensor

STEP = 1e-4
FLOOR = 1e-8


def _rel_err(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), FLOOR)


def gradient_check(
    loss_and_backward: Callable[[], float],
    loss_only: Callable[[], float],
    params: Sequence[Tensor],
    step: float = STEP,
    max_coords_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Return the max relative error between analytic and numeric gradients.

    `loss_and_backward` evaluates the scalar loss and populates each
    parameter's grad slot; `loss_only` evaluates the loss at the current
    parameter values without touching grads. Checks every coordinate unless
    `max_coords_per_param` caps the count (sampled from `rng`), which keeps
    big fragments tractable. A fragment with no parameters returns 0.
    """
    for p in params:
        p.zero_grad()
    loss_and_backward()
    analytic = []
    for p in params:
        analytic.append(np.zeros_like(p.data) if p.grad is None else p.grad.copy())

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.ravel()
        n = flat.size
        if max_coords_per_param is not None and n > max_coords_per_param:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        else:
            coords = range(n)
        gflat = grad.ravel()
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_only()
            flat[idx] = orig - step
            down = loss_only()
            flat[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError("non-finite loss encountered during finite differencing")
            numeric = (up - down) / (2.0 * step)
            worst = max(worst, _rel_err(gflat[idx], numeric))
    return worst


def input_gradient_check(
    loss_and_input_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x: np.ndarray,
    step: float = STEP,
) -> float:
    """Same check for gradients with respect to an input array."""
    _, analytic = loss_and_input_grad(x)
    flat = x.ravel()
    gflat = np.asarray(analytic).ravel()
    worst = 0.0
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        up, _ = loss_and_input_grad(x)
        flat[idx] = orig - step
        down, _ = loss_and_input_grad(x)
        flat[idx] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError("non-finite loss encountered during finite differencing")
        numeric = (up - down) / (2.0 * step)
        worst = max(worst, _rel_err(gflat[idx], numeric))
    return worst
