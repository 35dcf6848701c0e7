"""Synthetic complete/partial clouds sampled from primitive surfaces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .grid_core import DomainError, as_cloud

KINDS = ("sphere", "box", "cylinder")


@dataclass(frozen=True)
class ShapeSpec:
    """A posed primitive surface.

    ``size`` is the radius for spheres, the three half-extents for boxes and
    ``(radius, half_height)`` for cylinders. ``rotation`` holds xyz Euler
    angles in radians.
    """

    kind: str
    n_points: int
    seed: int = 0
    size: tuple = (0.5,)
    rotation: tuple = (0.0, 0.0, 0.0)
    translation: tuple = (0.0, 0.0, 0.0)


def _sample_sphere(rng, n, size):
    (radius,) = size
    v = rng.standard_normal((n, 3))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def _sample_box(rng, n, size):
    a, b, c = size
    half = np.array([a, b, c], dtype=np.float64)
    # faces normal to x, y, z; each axis has two faces of equal area
    areas = np.array([b * c, a * c, a * b])
    face_axis = rng.choice(3, size=n, p=areas / areas.sum())
    side = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    pts = (rng.random((n, 3)) * 2 - 1) * half
    pts[np.arange(n), face_axis] = side * half[face_axis]
    return pts


def _sample_cylinder(rng, n, size):
    radius, half_h = size
    lateral = 2 * math.pi * radius * 2 * half_h
    cap = math.pi * radius**2
    part = rng.choice(3, size=n, p=np.array([lateral, cap, cap]) / (lateral + 2 * cap))
    theta = rng.random(n) * 2 * math.pi
    # area-uniform radius on the caps
    rad = np.where(part == 0, radius, radius * np.sqrt(rng.random(n)))
    z = np.where(part == 0, (rng.random(n) * 2 - 1) * half_h, np.where(part == 1, half_h, -half_h))
    return np.stack([rad * np.cos(theta), rad * np.sin(theta), z], axis=1)


_SAMPLERS = {"sphere": _sample_sphere, "box": _sample_box, "cylinder": _sample_cylinder}
_SIZE_ARITY = {"sphere": 1, "box": 3, "cylinder": 2}


def generate_complete(spec: ShapeSpec) -> np.ndarray:
    """Uniformly sample ``spec.n_points`` points on the posed primitive surface."""
    if spec.kind not in _SAMPLERS:
        raise DomainError(f"unknown primitive {spec.kind!r}; expected one of {KINDS}")
    if len(spec.size) != _SIZE_ARITY[spec.kind] or min(spec.size) <= 0:
        raise DomainError(f"invalid size {spec.size} for {spec.kind}")
    if spec.n_points < 1:
        raise DomainError("n_points must be >= 1")
    rng = np.random.default_rng(spec.seed)
    local = _SAMPLERS[spec.kind](rng, spec.n_points, tuple(float(s) for s in spec.size))
    rot = Rotation.from_euler("xyz", spec.rotation).as_matrix()
    pts = local @ rot.T + np.asarray(spec.translation, dtype=np.float64)
    try:
        return as_cloud(pts, strict=True)
    except DomainError as exc:
        raise DomainError(f"pose places the {spec.kind} outside (-1, 1)^3: {exc}") from None


def random_spec(kind: str, n_points: int, seed: int) -> ShapeSpec:
    """Random size and pose that keep the primitive inside the cube with margin."""
    rng = np.random.default_rng([seed, 7919])
    if kind == "sphere":
        size = (float(rng.uniform(0.35, 0.6)),)
    elif kind == "box":
        size = tuple(float(s) for s in rng.uniform(0.2, 0.45, size=3))
    elif kind == "cylinder":
        size = (float(rng.uniform(0.2, 0.4)), float(rng.uniform(0.25, 0.45)))
    else:
        raise DomainError(f"unknown primitive {kind!r}; expected one of {KINDS}")
    extent = math.sqrt(sum(s * s for s in size)) if kind != "sphere" else size[0]
    slack = max(0.0, 0.9 - extent)
    translation = tuple(float(t) for t in rng.uniform(-slack, slack, size=3) / math.sqrt(3))
    rotation = tuple(float(a) for a in rng.uniform(-math.pi, math.pi, size=3))
    return ShapeSpec(kind, n_points, seed, size, rotation, translation)


def occlusion_split(cloud, fraction: float, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Indices kept and removed by a half-space occlusion along a random direction.

    The ``round(fraction * n)`` points with the largest projection onto the
    view direction are removed. Both index arrays are ascending.
    """
    cloud = as_cloud(cloud)
    if not 0 < fraction < 1:
        raise DomainError(f"removal fraction must lie in (0, 1), got {fraction}")
    n = len(cloud)
    n_removed = int(round(fraction * n))
    if n_removed >= n:
        raise DomainError(f"removing {n_removed} of {n} points leaves nothing")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    order = np.argsort(cloud @ direction, kind="stable")
    kept = np.sort(order[: n - n_removed])
    removed = np.sort(order[n - n_removed:])
    return kept, removed


def make_partial(cloud, fraction: float, seed=None) -> np.ndarray:
    """Drop the ``fraction`` of points facing a random view direction."""
    kept, _ = occlusion_split(cloud, fraction, seed)
    return as_cloud(cloud)[kept]
