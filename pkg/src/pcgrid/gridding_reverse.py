"""Scalar grid to coarse point cloud: one weighted-mean point per cell."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_core import CELL_OFFSETS, ContractError, DomainError, flat_index

# Cells whose weight sum has smaller magnitude are skipped.
SKIP_TOL = 1e-8


@dataclass(frozen=True)
class ReverseRecord:
    """Which cell emitted each point, and that cell's weight sum."""

    N: int
    cells: np.ndarray  # (m, 3) minimal vertex, grid units
    weight_sums: np.ndarray  # (m,)
    centers: np.ndarray  # (m, 3) emitted points in grid units

    @property
    def n_points(self) -> int:
        return self.cells.shape[0]


def _as_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        N = round(grid.size ** (1 / 3))
        if N**3 != grid.size:
            raise ContractError(f"{grid.size} values do not form a cubic grid")
        grid = grid.reshape(N, N, N)
    if grid.ndim != 3 or len(set(grid.shape)) != 1:
        raise ContractError(f"expected an (N, N, N) grid, got shape {grid.shape}")
    if grid.shape[0] < 2 or grid.shape[0] % 2:
        raise DomainError(f"grid resolution must be even and >= 2, got {grid.shape[0]}")
    return grid


def _cell_sums_sparse(grid, occupied):
    """Weight sums and moments of the cells touching ``occupied`` vertices, x-major order."""
    N = grid.shape[0]
    half, M = N // 2, N - 1
    cand = (occupied[:, None, :] - CELL_OFFSETS[None, :, :]).reshape(-1, 3)
    cand = cand[((cand >= 0) & (cand < M)).all(axis=1)]
    cand = np.unique((cand[:, 0] * M + cand[:, 1]) * M + cand[:, 2])
    cells = np.stack(np.unravel_index(cand, (M, M, M)), axis=1)
    total = np.zeros(len(cells))
    moment = np.zeros((len(cells), 3))
    for off in CELL_OFFSETS:
        v = cells + off
        w = grid[v[:, 0], v[:, 1], v[:, 2]]
        total += w
        moment += w[:, None] * (v - half)
    return cells, total, moment


def _cell_sums_dense(grid):
    """Weight sums and moments of all ``(N-1)^3`` cells, x-major order."""
    N = grid.shape[0]
    half, M = N // 2, N - 1
    total = np.zeros((M, M, M))
    moment = np.zeros((M, M, M, 3))
    r = np.arange(M, dtype=np.float64) - half
    base = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
    for off in CELL_OFFSETS:
        w = grid[off[0]:off[0] + M, off[1]:off[1] + M, off[2]:off[2] + M]
        total += w
        moment += w[..., None] * (base + off)
    cells = np.argwhere(np.ones((M, M, M), dtype=bool))
    return cells, total.reshape(-1), moment.reshape(-1, 3)


def gridding_reverse_forward(grid) -> tuple[np.ndarray, ReverseRecord]:
    """Emit ``sum(w v) / sum(w)`` for every complete cell with nonzero weight sum.

    Cells are enumerated x-major, z-fastest, which fixes the output order.
    Points are returned normalized by ``N/2``. Sparse grids only visit the
    cells around nonzero vertices; both paths add the 8 vertices in the
    same order, so they agree bit for bit.
    """
    grid = _as_grid(grid)
    if not np.isfinite(grid).all():
        raise DomainError("grid contains non-finite values")
    N = grid.shape[0]
    half = N // 2
    occupied = np.argwhere(grid != 0)
    if len(occupied) * 8 < (N - 1) ** 3:
        cells, total, moment = _cell_sums_sparse(grid, occupied)
    else:
        cells, total, moment = _cell_sums_dense(grid)

    keep = np.abs(total) >= SKIP_TOL
    sums = total[keep]
    centers = moment[keep] / sums[:, None]
    record = ReverseRecord(N=N, cells=cells[keep] - half, weight_sums=sums, centers=centers)
    return centers / half, record


def gridding_reverse_backward(record: ReverseRecord, cloud, grad_points) -> np.ndarray:
    """Accumulate ``dL/dw'`` from per-point co-gradients of the emitted cloud.

    For vertex ``theta`` of an emitting cell, ``d x / d w'_theta`` equals
    ``(x_theta - x) / sum(w')`` in grid units, divided by ``N/2`` for the
    normalized output.
    """
    N = record.N
    m = record.n_points
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    grad_points = np.asarray(grad_points, dtype=np.float64).reshape(-1, 3)
    if len(cloud) != m or len(grad_points) != m:
        raise ContractError(
            f"record has {m} points, cloud {len(cloud)}, gradient {len(grad_points)}"
        )
    grad = np.zeros(N**3)
    if m == 0:
        return grad.reshape(N, N, N)
    centers = cloud * (N / 2)
    verts = record.cells[:, None, :] + CELL_OFFSETS[None, :, :]
    contrib = ((verts - centers[:, None, :]) * grad_points[:, None, :]).sum(axis=2)
    contrib /= record.weight_sums[:, None] * (N / 2)
    np.add.at(grad, flat_index(verts, N).ravel(), contrib.ravel())
    return grad.reshape(N, N, N)
