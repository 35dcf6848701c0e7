"""Minimal numpy layers with explicit backward passes.

Activations are batched ``(B, C, D, H, W)`` arrays for the volumetric
layers and ``(rows, features)`` arrays for dense layers. Each ``forward``
returns ``(output, cache)`` and each ``backward`` consumes the cache.
"""

from __future__ import annotations

import itertools

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv3d_forward(x, weight, bias, padding):
    """Stride-1 3D cross-correlation. ``weight`` is ``(out, in, k, k, k)``."""
    B, C = x.shape[:2]
    O, _, k = weight.shape[:3]
    p = padding
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k, k), axis=(2, 3, 4))
    Do, Ho, Wo = win.shape[2:5]
    cols = win.transpose(0, 2, 3, 4, 1, 5, 6, 7).reshape(B * Do * Ho * Wo, C * k**3)
    out = cols @ weight.reshape(O, -1).T + bias
    out = out.reshape(B, Do, Ho, Wo, O).transpose(0, 4, 1, 2, 3)
    return np.ascontiguousarray(out), (cols, x.shape, weight, p)


def conv3d_backward(grad, cache, need_input_grad=True):
    cols, x_shape, weight, p = cache
    B, C, D, H, W = x_shape
    O, _, k = weight.shape[:3]
    Do, Ho, Wo = grad.shape[2:]
    g = grad.transpose(0, 2, 3, 4, 1).reshape(-1, O)
    grad_w = (g.T @ cols).reshape(weight.shape)
    grad_b = g.sum(axis=0)
    if not need_input_grad:
        return None, grad_w, grad_b
    dcols = (weight.reshape(O, -1).T @ g.T).reshape(C, k, k, k, B, Do, Ho, Wo)
    dxp = np.zeros((C, B, D + 2 * p, H + 2 * p, W + 2 * p))
    for i, j, l in itertools.product(range(k), repeat=3):
        dxp[:, :, i:i + Do, j:j + Ho, l:l + Wo] += dcols[:, i, j, l]
    grad_x = dxp[:, :, p:p + D, p:p + H, p:p + W].transpose(1, 0, 2, 3, 4)
    return np.ascontiguousarray(grad_x), grad_w, grad_b


def conv_transpose3d_forward(x, weight, bias, stride, padding):
    """Transposed 3D convolution. ``weight`` is ``(in, out, k, k, k)``.

    Output size per axis is ``(D - 1) * stride - 2 * padding + k``.
    """
    B, C, D, H, W = x.shape
    _, O, k = weight.shape[:3]
    s, p = stride, padding
    full = np.zeros((B, O, (D - 1) * s + k, (H - 1) * s + k, (W - 1) * s + k))
    xt = x.transpose(0, 2, 3, 4, 1)  # (B, D, H, W, C)
    for i, j, l in itertools.product(range(k), repeat=3):
        contrib = xt @ weight[:, :, i, j, l]  # (B, D, H, W, O)
        full[:, :, i:i + s * D:s, j:j + s * H:s, l:l + s * W:s] += contrib.transpose(0, 4, 1, 2, 3)
    Dz, Hz, Wz = full.shape[2:]
    out = full[:, :, p:Dz - p, p:Hz - p, p:Wz - p] + bias[None, :, None, None, None]
    return np.ascontiguousarray(out), (x, weight, s, p)


def conv_transpose3d_backward(grad, cache):
    x, weight, s, p = cache
    B, C, D, H, W = x.shape
    _, O, k = weight.shape[:3]
    full = np.pad(grad, ((0, 0), (0, 0), (p, p), (p, p), (p, p)))
    xt = x.transpose(0, 2, 3, 4, 1).reshape(-1, C)
    grad_x = np.zeros((B, D, H, W, C))
    grad_w = np.zeros_like(weight)
    for i, j, l in itertools.product(range(k), repeat=3):
        g = full[:, :, i:i + s * D:s, j:j + s * H:s, l:l + s * W:s].transpose(0, 2, 3, 4, 1)
        grad_x += g @ weight[:, :, i, j, l].T
        grad_w[:, :, i, j, l] = xt.T @ g.reshape(-1, O)
    grad_b = grad.sum(axis=(0, 2, 3, 4))
    return np.ascontiguousarray(grad_x.transpose(0, 4, 1, 2, 3)), grad_w, grad_b


def maxpool3d_forward(x, size=2):
    """Non-overlapping max pooling; trailing rows that do not fill a window are dropped."""
    B, C, D, H, W = x.shape
    Do, Ho, Wo = D // size, H // size, W // size
    xc = x[:, :, : Do * size, : Ho * size, : Wo * size]
    blocks = xc.reshape(B, C, Do, size, Ho, size, Wo, size).transpose(0, 1, 2, 4, 6, 3, 5, 7)
    blocks = blocks.reshape(B, C, Do, Ho, Wo, size**3)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, size)


def maxpool3d_backward(grad, cache):
    shape, arg, size = cache
    B, C, D, H, W = shape
    Do, Ho, Wo = grad.shape[2:]
    blocks = np.zeros((B, C, Do, Ho, Wo, size**3))
    np.put_along_axis(blocks, arg[..., None], grad[..., None], axis=-1)
    blocks = blocks.reshape(B, C, Do, Ho, Wo, size, size, size).transpose(0, 1, 2, 5, 3, 6, 4, 7)
    grad_x = np.zeros(shape)
    grad_x[:, :, : Do * size, : Ho * size, : Wo * size] = blocks.reshape(
        B, C, Do * size, Ho * size, Wo * size
    )
    return grad_x


def leaky_relu_forward(x, slope=0.2):
    return np.where(x > 0, x, slope * x), (x > 0, slope)


def leaky_relu_backward(grad, cache):
    mask, slope = cache
    return np.where(mask, grad, slope * grad)


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(grad, mask):
    return grad * mask


def linear_forward(x, weight, bias):
    """``weight`` is ``(out, in)``."""
    return x @ weight.T + bias, x


def linear_backward(grad, x, weight):
    return grad @ weight, grad.T @ x, grad.sum(axis=0)
