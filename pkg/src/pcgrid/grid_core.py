"""Shared conventions for point clouds and vertex lattices.

Clouds are ``(n, 3)`` float64 arrays in the open cube ``(-1, 1)^3``. A scalar
grid of resolution ``N`` is an ``(N, N, N)`` array whose entry ``[a, b, c]``
holds the value of vertex ``(a - N/2, b - N/2, c - N/2)``. C-order flattening
of that array is the canonical flat index (x-major, z-fastest).
"""

from __future__ import annotations

import itertools

import numpy as np

# Upper-boundary clamp margin, in grid units.
CLAMP_EPS = 1e-6

# The 8 cell-vertex offsets in fixed order; row j is theta_j.
CELL_OFFSETS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.int64)


class DomainError(ValueError):
    """Input lies outside the domain an operation accepts."""


class ContractError(ValueError):
    """Arguments are individually valid but mutually inconsistent."""


def check_resolution(N: int, minimum: int = 4) -> int:
    if isinstance(N, bool) or int(N) != N:
        raise DomainError(f"resolution must be an integer, got {N!r}")
    N = int(N)
    if N < minimum or N % 2:
        raise DomainError(f"resolution must be even and >= {minimum}, got {N}")
    return N


def as_cloud(points, *, strict: bool = False) -> np.ndarray:
    """Coerce ``points`` to an ``(n, 3)`` float64 array.

    Non-finite coordinates always raise. With ``strict=True`` every
    coordinate must also lie in the open interval (-1, 1); that check is
    applied at I/O boundaries.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ContractError(f"expected an (n, 3) array, got shape {arr.shape}")
    bad = ~np.isfinite(arr).all(axis=1)
    if bad.any():
        raise DomainError(f"point {int(np.argmax(bad))} has a non-finite coordinate")
    if strict:
        out = (np.abs(arr) >= 1.0).any(axis=1)
        if out.any():
            i = int(np.argmax(out))
            raise DomainError(f"point {i} {arr[i].tolist()} lies outside (-1, 1)^3")
    return arr


def grid_bounds(N: int) -> tuple[float, float]:
    """Clamp interval for grid-space coordinates at resolution ``N``."""
    half = N // 2
    return -float(half), half - 1 - CLAMP_EPS


def scale_to_grid(points, N: int) -> np.ndarray:
    """Map normalized coordinates to grid units (times ``N/2``), clamped.

    The clamp keeps every coordinate inside ``[-N/2, N/2 - 1 - eps]`` so
    that a complete enclosing cell always exists.
    """
    pts = as_cloud(points)
    lo, hi = grid_bounds(N)
    return np.clip(pts * (N / 2), lo, hi)


def clamp_mask(points, N: int) -> np.ndarray:
    """Boolean ``(n, 3)`` mask of coordinates that the clamp leaves untouched."""
    pts = as_cloud(points)
    lo, hi = grid_bounds(N)
    raw = pts * (N / 2)
    return (raw >= lo) & (raw <= hi)


def enclosing_cell(q, N: int) -> np.ndarray:
    """Integer minimal-vertex coordinates of the cell containing each ``q``."""
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    lo, hi = grid_bounds(N)
    if not np.isfinite(q).all() or (q < lo).any() or (q > hi).any():
        raise DomainError(f"grid-space point outside [{lo}, {hi}] at N={N}")
    cell = np.floor(q).astype(np.int64)
    return cell[0] if single else cell


def flat_index(v, N: int) -> np.ndarray:
    """Flat index of vertex coordinates ``v`` (shape ``(..., 3)``)."""
    v = np.asarray(v, dtype=np.int64) + N // 2
    return (v[..., 0] * N + v[..., 1]) * N + v[..., 2]


def vertex_coord(idx, N: int) -> np.ndarray:
    """Inverse of :func:`flat_index`."""
    idx = np.asarray(idx, dtype=np.int64)
    x, rem = np.divmod(idx, N * N)
    y, z = np.divmod(rem, N)
    return np.stack([x, y, z], axis=-1) - N // 2


def neighboring_points(v, q) -> np.ndarray:
    """Indices of grid-space points strictly within L-inf distance 1 of ``v``."""
    q = np.asarray(q, dtype=np.float64).reshape(-1, 3)
    v = np.asarray(v, dtype=np.float64)
    return np.flatnonzero((np.abs(q - v) < 1.0).all(axis=1))


def vertex_coordinates(N: int) -> np.ndarray:
    """``(N, N, N, 3)`` array of vertex coordinates in grid units."""
    r = np.arange(N, dtype=np.float64) - N // 2
    return np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
