"""Deterministic Adam training loop for the toy completion network."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig
from ..gridding import gridding_backward, gridding_forward
from ..grid_core import DomainError, as_cloud
from ..losses import chamfer_l2
from .adam import Adam
from .model import DegenerateOutputError, Params, backward, forward, forward_batch, init_params

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainResult:
    params: Params
    history: list = field(default_factory=list)  # combined loss per step
    components: list = field(default_factory=list)  # per-step dict of loss terms


def _grid_l1(pred, gt_grid, N_G):
    """Gridding loss against a pre-gridded target; returns (value, grad wrt pred)."""
    w_pred, record = gridding_forward(pred, N_G)
    diff = w_pred - gt_grid
    return float(np.abs(diff).sum() / N_G**3), gridding_backward(record, np.sign(diff) / N_G**3)


def batch_loss(partials, gts, params, cfg: RunConfig, rng, gt_grids=None, need_grad=True):
    """Mean combined loss over a batch and its parameter gradients.

    ``rng`` is a Generator or a list with one Generator per cloud; it drives
    the coarse-cloud subsample. Per cloud the combined loss is ``coarse_weight * GL(coarse) +
    final_weight * GL(final) + cd_weight * CD_L2(final)``, GL being the
    gridding loss at ``loss_res``.

    Returns:
        ``(loss, terms, grads)`` where ``terms`` averages each component.
    """
    N_G = cfg.loss_res
    B = len(partials)
    if gt_grids is None:
        gt_grids = [gridding_forward(gt, N_G)[0] for gt in gts]
    coarse, final, rec = forward_batch(partials, params, cfg.net, rng=rng)

    total = 0.0
    terms: dict = {}
    g_coarse, g_final = [], []
    for b in range(B):
        gc = np.zeros_like(coarse[b])
        gf = np.zeros_like(final[b])
        parts = {}
        if cfg.coarse_weight:
            parts["grid_coarse"], g = _grid_l1(coarse[b], gt_grids[b], N_G)
            gc += cfg.coarse_weight * g
        if cfg.final_weight:
            parts["grid_final"], g = _grid_l1(final[b], gt_grids[b], N_G)
            gf += cfg.final_weight * g
        cd = chamfer_l2(final[b], gts[b])
        parts["cd_final"] = cd.value
        if cfg.cd_weight:
            gf += cfg.cd_weight * cd.grad_pred
        total += (
            cfg.coarse_weight * parts.get("grid_coarse", 0.0)
            + cfg.final_weight * parts.get("grid_final", 0.0)
            + cfg.cd_weight * cd.value
        ) / B
        for k, v in parts.items():
            terms[k] = terms.get(k, 0.0) + v / B
        g_coarse.append(gc / B)
        g_final.append(gf / B)
    grads = backward(rec, params, g_coarse, g_final) if need_grad else None
    return total, terms, grads


def lr_at(cfg: RunConfig, epoch: int) -> float:
    """Step schedule: multiply by ``lr_decay_factor`` every ``lr_decay_epochs`` epochs."""
    return cfg.lr * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_epochs)


def train(dataset, cfg: RunConfig, epochs: int | None = None, seed: int | None = None,
          params: Params | None = None, callback=None) -> TrainResult:
    """Fit the network to ``(partial, complete)`` pairs.

    Each epoch visits the dataset once in a seeded random order, in
    minibatches of ``cfg.batch_size``; every minibatch is one Adam step on
    the mean combined loss. The coarse-cloud subsample of sample ``i`` is
    drawn from a generator seeded by ``(seed, i)`` at every visit, so the
    objective depends only on the parameters.

    Raises:
        TrainingError: a step produced a non-finite loss or a degenerate grid.
    """
    cfg = cfg.validate()
    dataset = [(as_cloud(p), as_cloud(c)) for p, c in dataset]
    if not dataset:
        raise DomainError("training dataset is empty")
    epochs = cfg.epochs if epochs is None else epochs
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if params is None:
        params = init_params(cfg.net, seed)
    opt = Adam(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    gt_grids = [gridding_forward(c, cfg.loss_res)[0] for _, c in dataset]
    result = TrainResult(params)

    step = 0
    for epoch in range(epochs):
        opt.lr = lr_at(cfg, epoch)
        order = rng.permutation(len(dataset))
        for s in range(0, len(order), cfg.batch_size):
            batch = order[s:s + cfg.batch_size]
            try:
                total, terms, grads = batch_loss(
                    [dataset[i][0] for i in batch],
                    [dataset[i][1] for i in batch],
                    params, cfg,
                    [np.random.default_rng([seed, int(i)]) for i in batch],
                    [gt_grids[i] for i in batch],
                )
            except (DegenerateOutputError, DomainError) as exc:
                raise TrainingError(f"step {step}: {exc}") from None
            if not math.isfinite(total):
                raise TrainingError(f"step {step}: non-finite loss {total}")
            result.history.append(total)
            result.components.append(terms)
            if callback is not None:
                callback(step, total, terms)
            log.debug("step %d epoch %d loss %.6g", step, epoch, total)
            opt.step(params, grads)
            step += 1
    return result


def complete(partial, params: Params, cfg: RunConfig, seed: int | None = None):
    """Inference: return ``(coarse, final)`` for one partial cloud."""
    coarse, final, _ = forward(partial, params, cfg.net, seed=cfg.seed if seed is None else seed)
    return coarse, final
