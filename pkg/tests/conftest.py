"""Shared test helpers: random layer fragments and finite-difference checks."""

import numpy as np
import pytest

from shmssl.nn import Sequential, build_layer, gradient_check
from shmssl.nn.losses import mse_loss


class Fragment:
    """A small net plus a fixed random input/target for MSE-based grad checks."""

    def __init__(self, specs, x_shape, seed, input_margin=0.0):
        self.net = Sequential([build_layer(s, np.random.default_rng(seed + 1)) for s in specs],
                              name="frag")
        rng = np.random.default_rng(seed)
        for _, p in self.net.parameters():
            p.data[...] = rng.normal(0.0, 0.7, p.data.shape)
        x = rng.standard_normal(x_shape)
        if input_margin:
            # Keep inputs away from ReLU kinks so finite differences stay valid.
            x = np.where(np.abs(x) < input_margin, input_margin * np.sign(x) + (x == 0), x)
        self.x = x
        y = self.net.forward(self.x, training=True)
        self.target = rng.standard_normal(y.shape)

    def loss_only(self):
        y = self.net.forward(self.x, training=True)
        return mse_loss(y, self.target)[0]

    def loss_and_backward(self):
        self.net.zero_grad()
        y = self.net.forward(self.x, training=True)
        loss, grad = mse_loss(y, self.target)
        self.net.backward(grad)
        return loss

    def params(self):
        return [p for _, p in self.net.parameters()]

    def check_params(self, **kwargs):
        return gradient_check(self.loss_and_backward, self.loss_only, self.params(), **kwargs)

    def check_input(self, step=1e-4):
        self.loss_and_backward()
        flat = self.x.ravel()
        y = self.net.forward(self.x, training=True)
        _, grad = mse_loss(y, self.target)
        analytic = self.net.backward(grad).ravel()
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = self.loss_only()
            flat[i] = orig - step
            down = self.loss_only()
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            worst = max(worst, abs(analytic[i] - numeric)
                        / max(abs(analytic[i]), abs(numeric), 1e-8))
        return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
