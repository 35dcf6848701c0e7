"""Training losses with gradients w.r.t. the predicted cloud."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_core import DomainError, as_cloud, check_resolution
from .gridding import gridding_backward, gridding_forward
from .neighbors import nearest


@dataclass(frozen=True)
class LossValue:
    value: float
    grad_pred: np.ndarray


def _nonempty(cloud, name):
    cloud = as_cloud(cloud)
    if len(cloud) == 0:
        raise DomainError(f"{name} cloud is empty")
    return cloud


def gridding_loss(pred, gt, N_G: int) -> LossValue:
    """Mean absolute difference between the gridded values of two clouds."""
    N_G = check_resolution(N_G)
    pred = _nonempty(pred, "predicted")
    gt = _nonempty(gt, "ground-truth")
    w_pred, record = gridding_forward(pred, N_G)
    w_gt, _ = gridding_forward(gt, N_G)
    diff = w_pred - w_gt
    value = float(np.abs(diff).sum() / N_G**3)
    grad = gridding_backward(record, np.sign(diff) / N_G**3)
    return LossValue(value, grad)


def chamfer_l2(R, T) -> LossValue:
    """Sum of the two directional mean squared nearest-neighbor distances.

    The gradient w.r.t. ``R`` holds nearest-neighbor assignments fixed.
    """
    R = _nonempty(R, "first")
    T = _nonempty(T, "second")
    r2t, d_r = nearest(R, T)
    t2r, d_t = nearest(T, R)
    value = float(d_r.mean() + d_t.mean())

    grad = 2.0 * (R - T[r2t]) / len(R)
    np.add.at(grad, t2r, 2.0 * (R[t2r] - T) / len(T))
    return LossValue(value, grad)


def chamfer_l1(R, T) -> LossValue:
    """Half the sum of the directional mean (unsquared) nearest-neighbor distances."""
    R = _nonempty(R, "first")
    T = _nonempty(T, "second")
    r2t, d_r = nearest(R, T)
    t2r, d_t = nearest(T, R)
    dist_r = np.sqrt(d_r)
    dist_t = np.sqrt(d_t)
    value = float(0.5 * (dist_r.mean() + dist_t.mean()))

    def unit(vec, norm):
        out = np.zeros_like(vec)
        nz = norm > 0
        out[nz] = vec[nz] / norm[nz, None]
        return out

    grad = 0.5 * unit(R - T[r2t], dist_r) / len(R)
    np.add.at(grad, t2r, 0.5 * unit(R[t2r] - T, dist_t) / len(T))
    return LossValue(value, grad)
