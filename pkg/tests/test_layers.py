"""Layer forward/backward contracts, shape formulas, and gradient checks."""

import numpy as np
import pytest

from conftest import Fragment
from shmssl.errors import DimensionError, UsageError
from shmssl.nn import (
    LayerSpec,
    Sequential,
    build_layer,
    conv_output_length,
    deconv_output_length,
    softmax,
)
from shmssl.errors import NumericError


def make_layer(kind, rng_seed=0, **kw):
    return build_layer(LayerSpec(kind, **kw), np.random.default_rng(rng_seed))


class TestConv1d:
    def test_identity_kernel(self):
        conv = make_layer("conv1d", in_channels=1, out_channels=1, kernel=1, stride=1)
        conv.params["weight"].data[:] = 1.0
        conv.params["bias"].data[:] = 0.0
        y = conv.forward(np.array([[[3.0, -2.0]]]))
        assert np.array_equal(y, [[[3.0, -2.0]]])

    def test_sliding_window_sum(self):
        # Direct sliding-window oracle: kernel [1, 1] over [1, 2, 3] -> [3, 5].
        conv = make_layer("conv1d", in_channels=1, out_channels=1, kernel=2, stride=1)
        conv.params["weight"].data[:] = 1.0
        conv.params["bias"].data[:] = 0.0
        y = conv.forward(np.array([[[1.0, 2.0, 3.0]]]))
        assert np.allclose(y, [[[3.0, 5.0]]])

    def test_output_length_formula(self, rng):
        for _ in range(25):
            kernel = int(rng.integers(1, 6))
            stride = int(rng.integers(1, 6))
            length = int(rng.integers(kernel, 40))
            conv = make_layer("conv1d", in_channels=2, out_channels=3,
                              kernel=kernel, stride=stride)
            y = conv.forward(rng.standard_normal((2, 2, length)))
            assert y.shape == (2, 3, (length - kernel) // stride + 1)

    def test_input_too_short(self):
        conv = make_layer("conv1d", in_channels=1, out_channels=1, kernel=5, stride=1)
        with pytest.raises(DimensionError, match="conv1d"):
            conv.forward(np.zeros((1, 1, 3)))

    def test_wrong_channels_names_layer(self):
        conv = make_layer("conv1d", in_channels=4, out_channels=1, kernel=1, stride=1)
        conv.name = "enc.0"
        with pytest.raises(DimensionError, match="enc.0"):
            conv.forward(np.zeros((1, 2, 8)))

    def test_backward_without_forward(self):
        conv = make_layer("conv1d", in_channels=1, out_channels=1, kernel=1, stride=1)
        with pytest.raises(UsageError):
            conv.backward(np.zeros((1, 1, 4)))

    def test_eval_forward_does_not_cache(self):
        conv = make_layer("conv1d", in_channels=1, out_channels=1, kernel=1, stride=1)
        conv.forward(np.zeros((1, 1, 4)), training=False)
        with pytest.raises(UsageError):
            conv.backward(np.zeros((1, 1, 4)))

    def test_zero_output_grad_gives_zero_grads(self):
        conv = make_layer("conv1d", in_channels=2, out_channels=2, kernel=3, stride=2)
        x = np.random.default_rng(3).standard_normal((2, 2, 9))
        y = conv.forward(x, training=True)
        gx = conv.backward(np.zeros_like(y))
        assert not gx.any()
        assert not conv.params["weight"].grad.any()
        assert not conv.params["bias"].grad.any()


class TestDeconv1d:
    def test_output_length_formula(self, rng):
        for _ in range(25):
            kernel = int(rng.integers(1, 6))
            stride = int(rng.integers(1, 6))
            pad = int(rng.integers(0, 3))
            length = int(rng.integers(1, 20))
            layer = make_layer("deconv1d", in_channels=2, out_channels=3,
                               kernel=kernel, stride=stride, output_padding=pad)
            y = layer.forward(rng.standard_normal((2, 2, length)))
            assert y.shape == (2, 3, (length - 1) * stride + kernel + pad)

    def test_matches_naive_transposed_convolution(self, rng):
        layer = make_layer("deconv1d", in_channels=2, out_channels=3,
                           kernel=3, stride=2, output_padding=1)
        x = rng.standard_normal((2, 2, 4))
        y = layer.forward(x)
        w = layer.params["weight"].data
        b = layer.params["bias"].data
        expected = np.zeros_like(y)
        for bi in range(2):
            for c in range(2):
                for t in range(4):
                    for o in range(3):
                        for j in range(3):
                            expected[bi, o, t * 2 + j] += x[bi, c, t] * w[c, o, j]
        expected += b[None, :, None]
        assert np.allclose(y, expected)


class TestMirrorShapes:
    def test_encoder_decoder_length_round_trip(self):
        lengths = [512]
        for k, s in zip((5, 3, 3, 3, 3), (5, 3, 3, 3, 3)):
            lengths.append(conv_output_length(lengths[-1], k, s))
        assert lengths == [512, 102, 34, 11, 3, 1]
        back = [1]
        for k, s, p in zip((3, 3, 3, 3, 5), (3, 3, 3, 3, 5), (0, 2, 1, 0, 2)):
            back.append(deconv_output_length(back[-1], k, s, p))
        assert back == [1, 3, 11, 34, 102, 512]


class TestReLU:
    def test_forward(self):
        relu = make_layer("relu")
        assert np.array_equal(relu.forward(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_backward_gate(self):
        relu = make_layer("relu")
        relu.forward(np.array([-1.0, 2.0]), training=True)
        assert np.array_equal(relu.backward(np.array([1.0, 1.0])), [0.0, 1.0])


class TestLinear:
    def test_hand_chain_rule(self):
        # y = W x with W = [[2]]: dW = [[3]], dx = [2] for x=3, gy=1.
        lin = make_layer("linear", in_channels=1, out_channels=1)
        lin.params["weight"].data[:] = 2.0
        lin.params["bias"].data[:] = 0.0
        y = lin.forward(np.array([[3.0]]), training=True)
        assert np.allclose(y, [[6.0]])
        gx = lin.backward(np.array([[1.0]]))
        assert np.allclose(lin.params["weight"].grad, [[3.0]])
        assert np.allclose(gx, [[2.0]])


class TestBatchNorm:
    def test_training_normalizes_batch(self, rng):
        bn = make_layer("batchnorm1d", in_channels=3)
        x = rng.standard_normal((8, 3, 10)) * 4 + 2
        y = bn.forward(x, training=True)
        assert np.allclose(y.mean(axis=(0, 2)), 0.0, atol=1e-12)
        assert np.allclose(y.std(axis=(0, 2)), 1.0, atol=1e-3)

    def test_running_stats_update_and_eval_uses_them(self, rng):
        bn = make_layer("batchnorm1d", in_channels=2)
        x = rng.standard_normal((16, 2, 50)) * 3 + 5
        for _ in range(60):
            bn.forward(x, training=True)
        mean_run = bn.state["running_mean"].copy()
        var_run = bn.state["running_var"].copy()
        assert np.allclose(mean_run, x.mean(axis=(0, 2)), atol=0.05)
        y = bn.forward(x, training=False)
        expected = (x - mean_run[None, :, None]) / np.sqrt(var_run[None, :, None] + 1e-5)
        assert np.allclose(y, expected)
        assert np.array_equal(bn.state["running_mean"], mean_run)  # eval never updates

    def test_single_value_batch_rejected(self):
        bn = make_layer("batchnorm1d", in_channels=2)
        with pytest.raises(DimensionError):
            bn.forward(np.zeros((1, 2, 1)), training=True)


class TestSoftmax:
    def test_symmetry(self):
        assert np.allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_overflow_safe(self):
        assert np.allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])

    def test_closed_form(self):
        out = softmax(np.log(np.array([1.0, 3.0])))
        assert np.allclose(out, [0.25, 0.75], atol=1e-12)

    def test_rows_sum_to_one_at_large_magnitude(self, rng):
        logits = rng.uniform(-1e3, 1e3, size=(40, 7))
        out = softmax(logits)
        assert np.all(out >= 0)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-9)

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            softmax(np.array([np.nan, 0.0]))


GRADCHECK_CASES = [
    ("conv1d", dict(in_channels=2, out_channels=3, kernel=3, stride=2), (2, 2, 9), 0.0),
    ("conv1d", dict(in_channels=1, out_channels=2, kernel=5, stride=5), (2, 1, 15), 0.0),
    ("deconv1d", dict(in_channels=3, out_channels=2, kernel=3, stride=3,
                      output_padding=2), (2, 3, 4), 0.0),
    ("batchnorm1d", dict(in_channels=3), (3, 3, 6), 0.0),
    ("linear", dict(in_channels=5, out_channels=4), (6, 5), 0.0),
    ("relu", dict(), (4, 7), 0.05),
]


@pytest.mark.parametrize("kind,kw,shape,margin", GRADCHECK_CASES)
def test_layer_gradients_match_finite_differences(kind, kw, shape, margin):
    for seed in range(5):
        frag = Fragment([LayerSpec(kind, **kw)], shape, seed=100 + seed, input_margin=margin)
        assert frag.check_params() < 1e-3
        assert frag.check_input() < 1e-3
