"""Evaluation metrics for completed point clouds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .grid_core import DomainError, as_cloud
from .losses import chamfer_l2
from .neighbors import ball_query, nearest


@dataclass(frozen=True)
class MetricReport:
    name: str
    value: float
    params: dict = field(default_factory=dict)


def _nonempty(cloud, name="point"):
    cloud = as_cloud(cloud)
    if len(cloud) == 0:
        raise DomainError(f"{name} cloud is empty")
    return cloud


def precision_recall(R, T, d: float) -> tuple[float, float]:
    """Fractions of ``R`` within ``d`` of ``T`` and of ``T`` within ``d`` of ``R`` (strict)."""
    if not d > 0:
        raise DomainError(f"distance threshold must be positive, got {d}")
    R = _nonempty(R, "reconstructed")
    T = _nonempty(T, "ground-truth")
    _, d_r = nearest(R, T)
    _, d_t = nearest(T, R)
    return float(np.mean(np.sqrt(d_r) < d)), float(np.mean(np.sqrt(d_t) < d))


def f_score(R, T, d: float = 0.01) -> float:
    """Harmonic mean of precision and recall at threshold ``d`` (0 if both vanish)."""
    p, r = precision_recall(R, T, d)
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def bbox_diagonal(cloud) -> float:
    cloud = _nonempty(cloud)
    return float(np.linalg.norm(cloud.max(axis=0) - cloud.min(axis=0)))


def consistency(frames) -> float:
    """Mean CD-L2 between consecutive frames of one instance."""
    frames = list(frames)
    if len(frames) < 2:
        raise DomainError(f"consistency needs at least 2 frames, got {len(frames)}")
    cds = [chamfer_l2(a, b).value for a, b in zip(frames[:-1], frames[1:])]
    return float(sum(cds) / (len(frames) - 1))


def fidelity(inp, output) -> float:
    """Mean squared distance from each input point to its nearest output point."""
    inp = _nonempty(inp, "input")
    output = _nonempty(output, "output")
    _, d2 = nearest(inp, output)
    return float(d2.mean())


def mmd(output, references) -> float:
    """Smallest CD-L2 between ``output`` and any reference cloud."""
    references = list(references)
    if not references:
        raise DomainError("reference set is empty")
    return min(chamfer_l2(output, ref).value for ref in references)


def farthest_point_sampling(R, M: int, seed=None, start: int | None = None) -> np.ndarray:
    """Greedy max-min selection of ``M`` indices.

    The first index is ``start`` if given, otherwise drawn from ``seed``.
    Ties in the max-min criterion resolve to the lowest index.
    """
    R = _nonempty(R)
    n = len(R)
    if M > n or M < 1:
        raise DomainError(f"cannot pick {M} seeds from {n} points")
    chosen = np.empty(M, dtype=np.int64)
    if start is None:
        chosen[0] = np.random.default_rng(seed).integers(n)
    elif 0 <= start < n:
        chosen[0] = start
    else:
        raise DomainError(f"start index {start} out of range for {n} points")
    mind = ((R - R[chosen[0]]) ** 2).sum(axis=1)
    for i in range(1, M):
        chosen[i] = int(np.argmax(mind))
        mind = np.minimum(mind, ((R - R[chosen[i]]) ** 2).sum(axis=1))
    return chosen


def u_imbalance(size: int, n_hat: float) -> float:
    return (size - n_hat) ** 2 / n_hat


def u_clutter(patch: np.ndarray, p: float) -> float:
    """Spread of within-patch nearest-neighbor distances about the uniform spacing.

    Patches with fewer than 2 points have no neighbor distances and score 0.
    """
    size = len(patch)
    if size < 2:
        return 0.0
    if size <= 1024:
        d2 = ((patch[:, None, :] - patch[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        dist = np.sqrt(d2.min(axis=1))
    else:
        dist = cKDTree(patch).query(patch, k=2)[0][:, 1]
    d_hat = math.sqrt(2 * math.pi * p / (size * math.sqrt(3)))
    return float(np.mean((dist - d_hat) ** 2 / d_hat))


def uniformity(R, p: float = 0.01, M: int = 10, seed=None) -> float:
    """Patch-averaged product of count imbalance and spacing clutter.

    Patches are balls of radius ``sqrt(p)`` around ``M`` farthest-point seeds.
    """
    R = _nonempty(R)
    if not 0 < p < 1:
        raise DomainError(f"patch fraction must lie in (0, 1), got {p}")
    if M < 1:
        raise DomainError(f"patch count must be >= 1, got {M}")
    n_hat = p * len(R)
    if n_hat < 2:
        raise DomainError(f"cloud too small: expected patch size {n_hat:.3g} < 2")
    radius = math.sqrt(p)
    total = 0.0
    for c in farthest_point_sampling(R, M, seed):
        patch = R[ball_query(R, R[c], radius)]
        total += u_imbalance(len(patch), n_hat) * u_clutter(patch, p)
    return total / M
