"""Point cloud to scalar grid: hard voxelization and differentiable gridding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_core import (
    CELL_OFFSETS,
    ContractError,
    as_cloud,
    check_resolution,
    flat_index,
    grid_bounds,
)


@dataclass(frozen=True)
class GriddingRecord:
    """Per-point state cached by :func:`gridding_forward` for the backward pass.

    Attributes:
        N: grid resolution.
        q: ``(n, 3)`` point coordinates in grid units (after clamping).
        cells: ``(n, 3)`` minimal vertex of each point's enclosing cell.
        vertex_index: ``(n, 8)`` flat indices of the 8 cell vertices.
        weights: ``(n, 8)`` trilinear weights ``w(v, p)``.
        neighbor: ``(n, 8)`` whether the point is a neighboring point of
            that vertex (strict L-inf distance < 1).
        slot_counts: ``(n, 8)`` neighbor count of each referenced vertex.
        active: ``(n, 3)`` coordinates left untouched by the clamp.
        count_vertices, counts: sparse vertex -> neighbor count map.
    """

    N: int
    q: np.ndarray
    cells: np.ndarray
    vertex_index: np.ndarray
    weights: np.ndarray
    neighbor: np.ndarray
    slot_counts: np.ndarray
    active: np.ndarray
    count_vertices: np.ndarray
    counts: np.ndarray

    @property
    def n_points(self) -> int:
        return self.q.shape[0]


def _cell_geometry(cloud, N):
    raw = cloud * (N / 2)
    lo, hi = grid_bounds(N)
    q = np.clip(raw, lo, hi)
    cells = np.floor(q).astype(np.int64)
    verts = cells[:, None, :] + CELL_OFFSETS[None, :, :]
    delta = np.abs(verts - q[:, None, :])
    neighbor = (delta < 1.0).all(axis=2)
    return q, cells, verts, delta, neighbor, q == raw


def voxelize(cloud, N: int) -> np.ndarray:
    """Binary occupancy: 1 at every vertex with at least one neighboring point."""
    N = check_resolution(N)
    cloud = as_cloud(cloud)
    grid = np.zeros(N**3)
    if len(cloud):
        _, _, verts, _, neighbor, _ = _cell_geometry(cloud, N)
        grid[flat_index(verts, N)[neighbor]] = 1.0
    return grid.reshape(N, N, N)


def gridding_forward(cloud, N: int) -> tuple[np.ndarray, GriddingRecord]:
    """Scatter a cloud onto an ``N^3`` lattice with averaged trilinear weights.

    Each vertex value is the mean of ``w(v, p)`` over the neighboring points
    ``p`` of ``v``, and 0 where a vertex has no neighbors. Per-vertex sums are
    accumulated in a canonical order (sorted by vertex, then by weight) so
    the result does not depend on the order of the input points. Only
    occupied vertices are visited.
    """
    N = check_resolution(N)
    cloud = as_cloud(cloud)
    n = len(cloud)
    q, cells, verts, delta, neighbor, active = _cell_geometry(cloud, N)
    weights = np.prod(1.0 - delta, axis=2)
    weights[~neighbor] = 0.0
    vidx = flat_index(verts, N)

    flat_v = vidx[neighbor]
    flat_w = weights[neighbor]
    order = np.lexsort((flat_w, flat_v))
    sorted_v = flat_v[order]
    starts = np.flatnonzero(np.concatenate(([True], sorted_v[1:] != sorted_v[:-1])))[: len(sorted_v)]
    count_vertices = sorted_v[starts]
    counts = np.diff(np.r_[starts, len(sorted_v)])
    values = np.zeros(N**3)
    if len(starts):
        values[count_vertices] = np.add.reduceat(flat_w[order], starts) / counts
    slot_counts = np.zeros((n, 8), dtype=np.int64)
    slot_counts[neighbor] = counts[np.searchsorted(count_vertices, flat_v)]

    record = GriddingRecord(
        N=N,
        q=q,
        cells=cells,
        vertex_index=vidx,
        weights=weights,
        neighbor=neighbor,
        slot_counts=slot_counts,
        active=active,
        count_vertices=count_vertices,
        counts=counts,
    )
    return values.reshape(N, N, N), record


def gridding_backward(record: GriddingRecord, grad_W) -> np.ndarray:
    """Co-gradient of the grid values to per-point normalized coordinates.

    Uses the piecewise derivative of ``|v - x|`` with the ``x <= v`` branch
    taken at ties, treats neighbor counts as constant, and chains through the
    ``N/2`` scaling (clamped coordinates receive zero gradient).
    """
    N = record.N
    grad_W = np.asarray(grad_W, dtype=np.float64)
    if grad_W.size != N**3:
        raise ContractError(f"grad_W has {grad_W.size} entries, expected {N**3}")
    if not np.isfinite(grad_W).all():
        raise ContractError("grad_W contains non-finite values")
    if record.n_points == 0:
        return np.zeros((0, 3))
    g = grad_W.reshape(-1)[record.vertex_index]
    g = np.where(record.neighbor, g / np.maximum(record.slot_counts, 1), 0.0)

    verts = record.cells[:, None, :] + CELL_OFFSETS[None, :, :]
    diff = record.q[:, None, :] - verts
    factors = 1.0 - np.abs(diff)
    sign = np.where(diff > 0, -1.0, 1.0)

    grad = np.empty((record.n_points, 3))
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        partial = sign[:, :, axis] * factors[:, :, others[0]] * factors[:, :, others[1]]
        grad[:, axis] = (g * partial).sum(axis=1)
    return grad * (N / 2) * record.active
