"""Nearest-neighbor queries between point sets."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

# Below this many reference points a direct scan is used.
BRUTE_FORCE_LIMIT = 256
# kd-tree candidates examined per tied query before a full scan
TIE_CANDIDATES = 32


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense ``(len(a), len(b))`` matrix of squared Euclidean distances."""
    return ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)


def nearest_brute(query: np.ndarray, ref: np.ndarray, chunk: int = 2048):
    """O(n m) nearest neighbors; ties go to the lowest reference index."""
    idx = np.empty(len(query), dtype=np.int64)
    for s in range(0, len(query), chunk):
        idx[s:s + chunk] = np.argmin(squared_distances(query[s:s + chunk], ref), axis=1)
    return idx, ((query - ref[idx]) ** 2).sum(axis=1)


def nearest(query, ref):
    """Index of, and squared distance to, the nearest ``ref`` point of each query.

    Distances are recomputed from the matched pair so they agree bit-for-bit
    with :func:`nearest_brute` whenever both pick the same neighbor.
    """
    query = np.asarray(query, dtype=np.float64).reshape(-1, 3)
    ref = np.asarray(ref, dtype=np.float64).reshape(-1, 3)
    if len(ref) == 0:
        raise ValueError("reference set is empty")
    if len(query) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if len(ref) < BRUTE_FORCE_LIMIT:
        return nearest_brute(query, ref)
    tree = cKDTree(ref)
    _, pair = tree.query(query, k=2)
    idx = np.asarray(pair[:, 0], dtype=np.int64)
    d0 = ((query - ref[idx]) ** 2).sum(axis=1)
    d1 = ((query - ref[pair[:, 1]]) ** 2).sum(axis=1)
    # near-ties are resolved so the lowest index wins, as in the brute-force path
    tied = np.flatnonzero(_near_tie(d0, d1))
    if len(tied):
        idx[tied], d0[tied] = _resolve_ties(tree, query[tied], ref)
    return idx, d0


def _near_tie(d_min, d_other):
    return d_other - d_min <= 1e-12 * np.maximum(d_other, 1e-300)


def _resolve_ties(tree, query, ref, k=TIE_CANDIDATES):
    """Lowest-index exact minimum among the ``k`` kd-tree candidates.

    Queries whose farthest candidate is still tied may have more tied
    points outside the candidate set and fall back to a full scan.
    """
    k = min(k, len(ref))
    _, cand = tree.query(query, k=k)
    cand = cand.reshape(len(query), k)
    d = ((query[:, None, :] - ref[cand]) ** 2).sum(axis=2)
    d_min = d.min(axis=1)
    idx = np.where(d == d_min[:, None], cand, len(ref)).min(axis=1)
    full = np.flatnonzero(_near_tie(d_min, d.max(axis=1)) & (k < len(ref)))
    if len(full):
        idx[full], d_min[full] = nearest_brute(query[full], ref)
    return idx, d_min


def ball_query(points: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Indices of ``points`` within ``radius`` (inclusive) of ``center``, ascending."""
    d2 = ((points - center) ** 2).sum(axis=1)
    return np.flatnonzero(d2 <= radius * radius)
