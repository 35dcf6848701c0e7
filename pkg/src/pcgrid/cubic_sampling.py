"""Cubic feature sampling and fixed-size random subsampling of coarse clouds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_core import CELL_OFFSETS, ContractError, DomainError, as_cloud, grid_bounds


@dataclass(frozen=True)
class SamplingRecord:
    """Flat spatial indices (``t^3`` space) gathered for each point and vertex slot."""

    t: int
    channels: int
    index: np.ndarray  # (m, 8)


def _check_fgrid(fgrid) -> np.ndarray:
    fgrid = np.asarray(fgrid, dtype=np.float64)
    if fgrid.ndim != 4 or not (fgrid.shape[1] == fgrid.shape[2] == fgrid.shape[3]):
        raise ContractError(f"feature grid must have shape (c, t, t, t), got {fgrid.shape}")
    t = fgrid.shape[1]
    if t < 2 or t % 2:
        raise ContractError(f"feature grid resolution must be even and >= 2, got {t}")
    return fgrid


def cubic_vertices(cloud, t: int) -> np.ndarray:
    """``(m, 8, 3)`` vertex coordinates from the floor/ceil of ``t/2 * p`` per axis.

    When a scaled coordinate is an integer, floor and ceil coincide and the
    repeated vertex is kept, so every point always has 8 slots.
    """
    cloud = as_cloud(cloud)
    lo, hi = grid_bounds(t)
    q = np.clip(cloud * (t / 2), lo, hi)
    corners = np.stack([np.floor(q), np.ceil(q)], axis=1).astype(np.int64)  # (m, 2, 3)
    axes = np.arange(3)
    return corners[:, CELL_OFFSETS, axes]


def cubic_feature_sampling_forward(cloud, fgrid) -> tuple[np.ndarray, SamplingRecord]:
    """Concatenate the features of each point's 8 enclosing vertices.

    Args:
        cloud: ``(m, 3)`` normalized points.
        fgrid: ``(c, t, t, t)`` feature map; spatial axes follow the grid
            convention (index ``v + t/2``).

    Returns:
        ``(m, 8 * c)`` features, vertex slot major, and the gather record.
    """
    fgrid = _check_fgrid(fgrid)
    c, t = fgrid.shape[0], fgrid.shape[1]
    verts = cubic_vertices(cloud, t) + t // 2
    index = (verts[..., 0] * t + verts[..., 1]) * t + verts[..., 2]
    flat = fgrid.reshape(c, -1)
    features = flat[:, index].transpose(1, 2, 0).reshape(len(index), 8 * c)
    return features, SamplingRecord(t=t, channels=c, index=index)


def cubic_feature_sampling_backward(record: SamplingRecord, grad_features):
    """Scatter feature co-gradients back with weight 1.

    Returns:
        ``(grad_fgrid, grad_points)``; the point gradient is identically zero
        because the vertex selection is piecewise constant.
    """
    c, t, m = record.channels, record.t, record.index.shape[0]
    grad_features = np.asarray(grad_features, dtype=np.float64)
    if grad_features.shape != (m, 8 * c):
        raise ContractError(
            f"grad_features shape {grad_features.shape}, expected {(m, 8 * c)}"
        )
    grad = np.zeros((c, t**3))
    g = grad_features.reshape(m, 8, c)
    for ch in range(c):
        grad[ch] = np.bincount(record.index.ravel(), weights=g[:, :, ch].ravel(), minlength=t**3)
    return grad.reshape(c, t, t, t), np.zeros((m, 3))


def random_subsample(cloud, k: int, seed=None, features=None, rng=None):
    """Pick ``k`` rows of ``cloud`` (and ``features``) at random.

    Without replacement when the cloud has at least ``k`` points. Smaller
    clouds keep every point once and are padded with rows drawn with
    replacement, then shuffled.

    Returns:
        ``(points, features_or_None, indices)``.
    """
    cloud = as_cloud(cloud)
    if k < 1:
        raise DomainError(f"sample count must be >= 1, got {k}")
    n = len(cloud)
    if n == 0:
        raise DomainError("cannot subsample an empty cloud")
    if rng is None:
        rng = np.random.default_rng(seed)
    if n >= k:
        idx = rng.choice(n, size=k, replace=False)
    else:
        idx = rng.permutation(np.concatenate([np.arange(n), rng.integers(0, n, size=k - n)]))
    feats = None if features is None else np.asarray(features)[idx]
    return cloud[idx], feats, idx
