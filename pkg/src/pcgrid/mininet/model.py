"""Toy coarse-to-fine completion network built on the gridding operators.

Pipeline: gridding -> 3D conv encoder (conv, leaky ReLU, 2^3 max-pool per
stage) -> two dense layers -> transposed-conv decoder with additive skips
-> gridding reverse (coarse cloud) -> random subsample -> cubic feature
sampling over the decoder maps -> per-point MLP -> offsets added to the
tiled coarse points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..config import NetConfig
from ..cubic_sampling import (
    cubic_feature_sampling_backward,
    cubic_feature_sampling_forward,
    random_subsample,
)
from ..grid_core import ContractError, as_cloud
from ..gridding import gridding_forward
from ..gridding_reverse import gridding_reverse_backward, gridding_reverse_forward
from . import layers as L

KERNEL = 4
ENC_PAD = 2
DEC_STRIDE = 2
DEC_PAD = 1


class DegenerateOutputError(RuntimeError):
    """The decoder produced a grid whose cells all have zero weight."""


class Params:
    """Named parameter tensors in declaration order, with an update counter."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        self.tensors = dict(tensors)
        self.version = 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def copy(self) -> "Params":
        out = Params({k: v.copy() for k, v in self.tensors.items()})
        out.version = self.version
        return out

    def bump(self):
        self.version += 1

    @property
    def size(self) -> int:
        return sum(v.size for v in self.tensors.values())


def param_shapes(cfg: NetConfig) -> dict[str, tuple]:
    k = KERNEL
    shapes = {}
    prev = 1
    for i, c in enumerate(cfg.channels):
        shapes[f"enc{i}.w"] = (c, prev, k, k, k)
        shapes[f"enc{i}.b"] = (c,)
        prev = c
    flat = cfg.channels[-1] * cfg.bottleneck_res**3
    shapes["fc0.w"] = (cfg.bottleneck, flat)
    shapes["fc0.b"] = (cfg.bottleneck,)
    shapes["fc1.w"] = (flat, cfg.bottleneck)
    shapes["fc1.b"] = (flat,)
    outs = [1, *cfg.channels[:-1]]
    for i in reversed(range(len(cfg.channels))):
        shapes[f"dec{i}.w"] = (cfg.channels[i], outs[i], k, k, k)
        shapes[f"dec{i}.b"] = (outs[i],)
    dims = cfg.head_dims
    for i in range(len(dims) - 1):
        shapes[f"mlp{i}.w"] = (dims[i + 1], dims[i])
        shapes[f"mlp{i}.b"] = (dims[i + 1],)
    return shapes


def _fan_in(name: str, shape: tuple) -> int:
    if name.startswith("dec"):
        return shape[0] * int(np.prod(shape[2:]))
    return int(np.prod(shape[1:]))


def init_params(cfg: NetConfig, seed: int = 0) -> Params:
    """Uniform ``+-sqrt(1/fan_in)`` init; the last head layer starts at zero."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    shapes = param_shapes(cfg)
    last = f"mlp{len(cfg.head_dims) - 2}"
    tensors = {}
    for name, shape in shapes.items():
        layer = name.rsplit(".", 1)[0]
        if layer == last:
            tensors[name] = np.zeros(shape)
            continue
        w_shape = shapes[f"{layer}.w"]
        bound = math.sqrt(1.0 / _fan_in(f"{layer}.w", w_shape))
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return Params(tensors)


@dataclass
class ForwardRecord:
    """Intermediate state needed by :func:`backward` for one batch."""

    version: int
    cfg: NetConfig
    caches: dict = field(default_factory=dict)
    grid_out: np.ndarray | None = None  # (B, N, N, N)
    coarse: list = field(default_factory=list)
    reverse_records: list = field(default_factory=list)
    sub_index: list = field(default_factory=list)
    sampling_records: list = field(default_factory=list)  # [sample][map]

    @property
    def batch_size(self) -> int:
        return len(self.coarse)


def forward_batch(partials, params: Params, cfg: NetConfig, rng=None, seed=None):
    """Run the network on a batch of partial clouds.

    The volumetric and dense layers run batched; gridding, gridding reverse,
    subsampling and cubic sampling run per cloud.

    Args:
        rng: one numpy Generator shared by the batch, or a list with one
            Generator per cloud; built from ``seed`` when omitted.

    Returns:
        ``(coarse_list, final_list, record)``.

    Raises:
        DegenerateOutputError: some decoder grid has zero weight in every cell.
    """
    partials = [as_cloud(p) for p in partials]
    if not partials or any(len(p) == 0 for p in partials):
        raise ContractError("partial clouds must be nonempty")
    if rng is None:
        rng = np.random.default_rng(seed)
    rngs = list(rng) if isinstance(rng, (list, tuple)) else [rng] * len(partials)
    if len(rngs) != len(partials):
        raise ContractError(f"got {len(rngs)} generators for {len(partials)} clouds")
    rec = ForwardRecord(version=params.version, cfg=cfg)
    c = rec.caches
    P = params
    n_stages = len(cfg.channels)
    B = len(partials)

    h = np.stack([gridding_forward(p, cfg.grid_res)[0] for p in partials])[:, None]
    skips = [h]
    for i in range(n_stages):
        h, c[f"enc{i}.conv"] = L.conv3d_forward(h, P[f"enc{i}.w"], P[f"enc{i}.b"], ENC_PAD)
        h, c[f"enc{i}.act"] = L.leaky_relu_forward(h, cfg.leaky_slope)
        h, c[f"enc{i}.pool"] = L.maxpool3d_forward(h)
        skips.append(h)

    z, c["fc0"] = L.linear_forward(h.reshape(B, -1), P["fc0.w"], P["fc0.b"])
    z, c["fc0.act"] = L.relu_forward(z)
    z, c["fc1"] = L.linear_forward(z, P["fc1.w"], P["fc1.b"])
    z, c["fc1.act"] = L.relu_forward(z)
    d = z.reshape(h.shape) + skips[-1]

    maps = [d] if cfg.sample_bottleneck else []
    for i in reversed(range(n_stages)):
        d, c[f"dec{i}.conv"] = L.conv_transpose3d_forward(
            d, P[f"dec{i}.w"], P[f"dec{i}.b"], DEC_STRIDE, DEC_PAD
        )
        d, c[f"dec{i}.act"] = L.relu_forward(d)
        d = d + skips[i]
        if i > 0:
            maps.append(d)
    rec.grid_out = d[:, 0]

    subs, feats = [], []
    for b in range(B):
        coarse, rrec = gridding_reverse_forward(rec.grid_out[b])
        if len(coarse) == 0:
            raise DegenerateOutputError(
                f"decoder grid {b} has no cell with nonzero weight"
            )
        rec.coarse.append(coarse)
        rec.reverse_records.append(rrec)
        sub, _, idx = random_subsample(coarse, cfg.subsample, rng=rngs[b])
        rec.sub_index.append(idx)
        subs.append(sub)
        row, srecs = [], []
        for fmap in maps:
            f, srec = cubic_feature_sampling_forward(sub, fmap[b])
            row.append(f)
            srecs.append(srec)
        rec.sampling_records.append(srecs)
        feats.append(np.concatenate(row, axis=1))

    a = np.concatenate(feats, axis=0)
    n_head = len(cfg.head_dims) - 1
    for i in range(n_head):
        a, c[f"mlp{i}"] = L.linear_forward(a, P[f"mlp{i}.w"], P[f"mlp{i}.b"])
        if i < n_head - 1:
            a, c[f"mlp{i}.act"] = L.relu_forward(a)
    offsets = a.reshape(B, cfg.output_points, 3)
    finals = [np.repeat(subs[b], cfg.tile, axis=0) + offsets[b] for b in range(B)]
    return rec.coarse, finals, rec


def forward(partial, params: Params, cfg: NetConfig, rng=None, seed=None):
    """Run the network on one partial cloud.

    Args:
        partial: ``(n, 3)`` normalized input points (nonempty).
        params: network parameters.
        cfg: network shape.
        rng: numpy Generator driving the coarse-cloud subsample; built from
            ``seed`` when not given.

    Returns:
        ``(coarse, final, record)``: the full coarse cloud from gridding
        reverse, the ``tile * subsample`` final points, and the record.
    """
    coarse, finals, rec = forward_batch([partial], params, cfg, rng=rng, seed=seed)
    return coarse[0], finals[0], rec


def backward(rec: ForwardRecord, params: Params, grad_coarse=None, grad_final=None):
    """Parameter gradients given co-gradients of the coarse and final clouds.

    ``grad_coarse`` and ``grad_final`` are arrays for a single-cloud record
    or lists (one entry per cloud, ``None`` for zero) for a batch.
    Coordinate gradients do not flow through cubic feature sampling, so the
    coarse cloud receives gradient only via its own loss and the tiled copy
    inside the final cloud.
    """
    if rec.version != params.version:
        raise ContractError("forward record is stale: parameters changed since forward")
    cfg = rec.cfg
    c = rec.caches
    P = params
    B = rec.batch_size
    grads = {name: np.zeros_like(v) for name, v in params.items()}
    n_stages = len(cfg.channels)
    K = cfg.output_points

    def per_sample(arg):
        if arg is None:
            return [None] * B
        if not isinstance(arg, (list, tuple)):
            arg = [arg]
        if len(arg) != B:
            raise ContractError(f"expected {B} gradient entries, got {len(arg)}")
        return list(arg)

    gc_list = per_sample(grad_coarse)
    gf_list = per_sample(grad_final)
    gfinal = np.zeros((B, K, 3))
    for b, gf in enumerate(gf_list):
        if gf is not None:
            gf = np.asarray(gf, dtype=np.float64)
            if gf.shape != (K, 3):
                raise ContractError(f"grad_final shape {gf.shape}, expected {(K, 3)}")
            gfinal[b] = gf

    # offset head
    g = gfinal.reshape(B * cfg.subsample, 3 * cfg.tile)
    n_head = len(cfg.head_dims) - 1
    for i in reversed(range(n_head)):
        if i < n_head - 1:
            g = L.relu_backward(g, c[f"mlp{i}.act"])
        g, grads[f"mlp{i}.w"], grads[f"mlp{i}.b"] = L.linear_backward(g, c[f"mlp{i}"], P[f"mlp{i}.w"])
    g = g.reshape(B, cfg.subsample, -1)

    n_maps = len(rec.sampling_records[0])
    map_grads = [[] for _ in range(n_maps)]
    gW = np.zeros_like(rec.grid_out)
    for b in range(B):
        start = 0
        for j, srec in enumerate(rec.sampling_records[b]):
            width = 8 * srec.channels
            gmap, _ = cubic_feature_sampling_backward(srec, g[b, :, start:start + width])
            map_grads[j].append(gmap)
            start += width

        m = len(rec.coarse[b])
        gc = gc_list[b]
        gc = np.zeros((m, 3)) if gc is None else np.array(gc, dtype=np.float64)
        if gc.shape != (m, 3):
            raise ContractError(f"grad_coarse shape {gc.shape}, expected {(m, 3)}")
        # tiled coarse points
        grad_sub = gfinal[b].reshape(cfg.subsample, cfg.tile, 3).sum(axis=1)
        np.add.at(gc, rec.sub_index[b], grad_sub)
        gW[b] = gridding_reverse_backward(rec.reverse_records[b], rec.coarse[b], gc)
    map_grads = [np.stack(mg) for mg in map_grads]

    # decoder, finest stage first
    skip_grads = [None] * (n_stages + 1)
    g = gW[:, None]
    map_iter = iter(reversed(map_grads))
    for i in range(n_stages):
        skip_grads[i] = g
        g = L.relu_backward(g, c[f"dec{i}.act"])
        g, grads[f"dec{i}.w"], grads[f"dec{i}.b"] = L.conv_transpose3d_backward(g, c[f"dec{i}.conv"])
        if i + 1 < n_stages or cfg.sample_bottleneck:
            g = g + next(map_iter)

    # bottleneck
    skip_grads[n_stages] = g
    shape = g.shape
    z = g.reshape(B, -1)
    z = L.relu_backward(z, c["fc1.act"])
    z, grads["fc1.w"], grads["fc1.b"] = L.linear_backward(z, c["fc1"], P["fc1.w"])
    z = L.relu_backward(z, c["fc0.act"])
    z, grads["fc0.w"], grads["fc0.b"] = L.linear_backward(z, c["fc0"], P["fc0.w"])
    g = z.reshape(shape) + skip_grads[n_stages]

    # encoder
    for i in reversed(range(n_stages)):
        g = L.maxpool3d_backward(g, c[f"enc{i}.pool"])
        g = L.leaky_relu_backward(g, c[f"enc{i}.act"])
        g, grads[f"enc{i}.w"], grads[f"enc{i}.b"] = L.conv3d_backward(
            g, c[f"enc{i}.conv"], need_input_grad=i > 0
        )
        if i > 0:
            g = g + skip_grads[i]
    return grads
