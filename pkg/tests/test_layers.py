import numpy as np
import pytest

from conftest import central_difference, rel_error
from pcgrid.mininet import layers


def check(forward, backward_grads, inputs, rng, tol=1e-4):
    """Compare analytic gradients of <G, forward(*inputs)> against finite differences."""
    out = forward(*inputs)
    G = rng.normal(size=out.shape)
    analytic = backward_grads(G)
    for x, a in zip(inputs, analytic):
        if a is None:
            continue

        def f(v, x=x):
            saved = x.copy()
            x[...] = v
            val = float((forward(*inputs) * G).sum())
            x[...] = saved
            return val

        numeric = central_difference(f, x)
        assert rel_error(a, numeric, floor=1e-6).max() <= tol


@pytest.mark.parametrize("padding", [0, 1, 2])
def test_conv3d(rng, padding):
    x = rng.normal(size=(2, 2, 4, 4, 4))
    w = rng.normal(size=(3, 2, 2, 2, 2))
    b = rng.normal(size=3)
    cache = {}

    def fwd(x, w, b):
        out, cache["c"] = layers.conv3d_forward(x, w, b, padding)
        return out

    def bwd(G):
        fwd(x, w, b)
        return layers.conv3d_backward(G, cache["c"])

    check(fwd, bwd, [x, w, b], rng)


def test_conv3d_matches_direct_sum(rng):
    x = rng.normal(size=(1, 2, 3, 3, 3))
    w = rng.normal(size=(1, 2, 2, 2, 2))
    out, _ = layers.conv3d_forward(x, w, np.zeros(1), 0)
    direct = sum(
        x[0, c, i:i + 2, j:j + 2, k:k + 2].ravel() @ w[0, c].ravel() for c in range(2)
        for i, j, k in [(0, 0, 0)]
    )
    assert out[0, 0, 0, 0, 0] == pytest.approx(direct, rel=1e-12)
    assert out.shape == (1, 1, 2, 2, 2)


def test_conv3d_skip_input_grad(rng):
    x = rng.normal(size=(1, 1, 4, 4, 4))
    out, cache = layers.conv3d_forward(x, rng.normal(size=(2, 1, 2, 2, 2)), np.zeros(2), 1)
    gx, gw, gb = layers.conv3d_backward(np.ones_like(out), cache, need_input_grad=False)
    assert gx is None and gw.shape == (2, 1, 2, 2, 2)


@pytest.mark.parametrize("stride, padding", [(2, 1), (1, 0)])
def test_conv_transpose3d(rng, stride, padding):
    x = rng.normal(size=(2, 2, 2, 2, 2))
    w = rng.normal(size=(2, 3, 4, 4, 4))
    b = rng.normal(size=3)
    cache = {}

    def fwd(x, w, b):
        out, cache["c"] = layers.conv_transpose3d_forward(x, w, b, stride, padding)
        return out

    def bwd(G):
        fwd(x, w, b)
        return layers.conv_transpose3d_backward(G, cache["c"])

    check(fwd, bwd, [x, w, b], rng)
    assert fwd(x, w, b).shape[2] == (2 - 1) * stride - 2 * padding + 4


def test_conv_transpose_is_adjoint_of_strided_conv(rng):
    # the transposed conv equals the gradient of a conv w.r.t. its input
    x = rng.normal(size=(1, 2, 4, 4, 4))
    w = rng.normal(size=(3, 2, 4, 4, 4))
    y = rng.normal(size=(1, 3, 2, 2, 2))
    full = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1), (1, 1)))
    conv = np.zeros((1, 3, 2, 2, 2))
    for i, j, k in np.ndindex(2, 2, 2):
        patch = full[0, :, 2 * i:2 * i + 4, 2 * j:2 * j + 4, 2 * k:2 * k + 4]
        conv[0, :, i, j, k] = np.tensordot(w, patch, axes=4)
    up, _ = layers.conv_transpose3d_forward(y, w, np.zeros(2), 2, 1)
    assert (conv * y).sum() == pytest.approx((up * x).sum(), rel=1e-12)


def test_maxpool(rng):
    # distinct values keep the argmax away from ties
    x = rng.permutation(2 * 2 * 64).reshape(2, 2, 4, 4, 4).astype(float) * 0.01
    cache = {}

    def fwd(x):
        out, cache["c"] = layers.maxpool3d_forward(x)
        return out

    def bwd(G):
        fwd(x)
        return [layers.maxpool3d_backward(G, cache["c"])]

    check(fwd, bwd, [x], rng)
    assert fwd(x).shape == (2, 2, 2, 2, 2)


@pytest.mark.parametrize("slope", [0.0, 0.2])
def test_leaky_relu(rng, slope):
    x = rng.normal(size=(5, 7))
    x[np.abs(x) < 1e-3] = 0.5
    out, cache = layers.leaky_relu_forward(x, slope)
    G = rng.normal(size=x.shape)
    np.testing.assert_array_equal(layers.leaky_relu_backward(G, cache), np.where(x > 0, G, slope * G))
    np.testing.assert_array_equal(out, np.where(x > 0, x, slope * x))


def test_relu(rng):
    x = rng.normal(size=(4, 4))
    out, mask = layers.relu_forward(x)
    assert (out >= 0).all()
    np.testing.assert_array_equal(layers.relu_backward(np.ones_like(x), mask), (x > 0).astype(float))


def test_linear(rng):
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(3, 4))
    b = rng.normal(size=3)

    def fwd(x, w, b):
        return layers.linear_forward(x, w, b)[0]

    def bwd(G):
        return layers.linear_backward(G, x, w)

    check(fwd, bwd, [x, w, b], rng)
