"""Point cloud, grid and checkpoint file formats."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .config import RunConfig, config_text, parse_config
from .grid_core import DomainError

GRID_MAGIC = b"GRDD"
GRID_VERSION = 1
CKPT_MAGIC = b"GRNC"
CKPT_VERSION = 1

_PLY_HEADER = (
    "ply\n"
    "format binary_little_endian 1.0\n"
    "element vertex {n}\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "end_header\n"
)


class FormatError(ValueError):
    """A file does not match its declared layout."""


def _check_domain(points: np.ndarray, path) -> np.ndarray:
    bad = ~(np.isfinite(points).all(axis=1) & (np.abs(points) < 1.0).all(axis=1))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(f"{path}: point {i} {points[i].tolist()} outside the open cube (-1, 1)^3")
    return points


def read_xyz(path) -> np.ndarray:
    """Read whitespace-separated ``x y z`` lines; blank lines are skipped."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise FormatError(f"{path}: line {lineno}: expected 3 values, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: not a number") from None
    return _check_domain(np.array(rows, dtype=np.float64).reshape(-1, 3), path)


def write_xyz(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with open(path, "w") as fh:
        for x, y, z in pts:
            fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


def read_ply(path) -> np.ndarray:
    """Read a binary little-endian PLY holding only float ``x y z`` vertices."""
    data = Path(path).read_bytes()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise FormatError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()[1:]
    lines = [ln.strip() for ln in header if ln.strip() and not ln.startswith(("comment", "obj_info"))]
    if not lines or lines[0] != "format binary_little_endian 1.0":
        raise FormatError(f"{path}: only binary_little_endian 1.0 is supported")
    elem = lines[1].split() if len(lines) > 1 else []
    if len(elem) != 3 or elem[:2] != ["element", "vertex"]:
        raise FormatError(f"{path}: expected a single vertex element")
    try:
        n = int(elem[2])
    except ValueError:
        raise FormatError(f"{path}: bad vertex count {elem[2]!r}") from None
    props = [ln.split() for ln in lines[2:]]
    if props != [["property", "float", a] for a in "xyz"]:
        raise FormatError(f"{path}: unsupported layout; only float x, y, z vertex properties")
    body = data[end + len(b"end_header\n"):]
    if len(body) != 12 * n:
        raise FormatError(f"{path}: expected {12 * n} payload bytes, found {len(body)}")
    pts = np.frombuffer(body, dtype="<f4").reshape(n, 3).astype(np.float64)
    return _check_domain(pts, path)


def write_ply(path, points) -> None:
    pts = np.asarray(points, dtype="<f4").reshape(-1, 3)
    with open(path, "wb") as fh:
        fh.write(_PLY_HEADER.format(n=len(pts)).encode("ascii"))
        fh.write(pts.tobytes())


def read_cloud(path) -> np.ndarray:
    """Dispatch on suffix: ``.ply`` is binary PLY, anything else is XYZ text."""
    return read_ply(path) if Path(path).suffix.lower() == ".ply" else read_xyz(path)


def write_cloud(path, points) -> None:
    if Path(path).suffix.lower() == ".ply":
        write_ply(path, points)
    else:
        write_xyz(path, points)


def write_grid(path, grid) -> None:
    """``GRDD``, u32 version, u32 N, then N^3 float32 values in C order."""
    g = np.asarray(grid)
    N = g.shape[0]
    if g.shape != (N, N, N):
        raise DomainError(f"grid must be cubic, got shape {g.shape}")
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC + struct.pack("<II", GRID_VERSION, N))
        fh.write(np.ascontiguousarray(g, dtype="<f4").tobytes())


def read_grid(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != GRID_MAGIC:
        raise FormatError(f"{path}: bad grid magic")
    version, N = struct.unpack_from("<II", data, 4)
    if version != GRID_VERSION:
        raise FormatError(f"{path}: unsupported grid version {version}")
    if len(data) - 12 != 4 * N**3:
        raise FormatError(f"{path}: payload holds {len(data) - 12} bytes, N={N} needs {4 * N**3}")
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(N, N, N).astype(np.float64)


def save_checkpoint(path, cfg: RunConfig, params) -> None:
    """``GRNC``, u32 version, config text, then each tensor as name, shape, float32 data.

    Strings are u32-length-prefixed UTF-8. Tensors follow the parameter
    declaration order, so files are byte-identical for identical inputs.
    """
    out = [CKPT_MAGIC, struct.pack("<I", CKPT_VERSION)]

    def put_str(s):
        b = s.encode("utf-8")
        out.append(struct.pack("<I", len(b)) + b)

    put_str(config_text(cfg))
    tensors = list(params.items())
    out.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        put_str(name)
        out.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path):
    """Return ``(cfg, params)`` widened to float64; shapes are checked against the config."""
    from .mininet.model import Params, param_shapes

    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"{path}: truncated checkpoint")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    def get_u32():
        return struct.unpack("<I", take(4))[0]

    def get_str():
        return take(get_u32()).decode("utf-8")

    if take(4) != CKPT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic")
    version = get_u32()
    if version != CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    cfg = parse_config(get_str())
    tensors = {}
    for _ in range(get_u32()):
        name = get_str()
        ndim = get_u32()
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).astype(np.float64)
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    expected = param_shapes(cfg.net)
    got = {k: v.shape for k, v in tensors.items()}
    if got != dict(expected):
        raise FormatError(f"{path}: tensor shapes do not match the stored config")
    return cfg, Params(tensors)
