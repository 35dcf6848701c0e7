"""Command-line interface: ``pcgrid <command> ...``.

Every failure prints one line ``pcgrid: error: <kind>: <message>`` to
stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, load_config
from .grid_core import CLAMP_EPS, ContractError, DomainError
from .gridding import gridding_forward, voxelize
from .gridding_reverse import gridding_reverse_forward
from .losses import chamfer_l1, chamfer_l2
from .metrics import bbox_diagonal, f_score, fidelity, mmd, uniformity
from .mininet.model import DegenerateOutputError
from .mininet.train import TrainingError, complete, train
from .synth import KINDS, generate_complete, make_partial, random_spec

METRICS = ("cd-l1", "cd-l2", "fscore", "uniformity", "consistency", "fidelity", "mmd")
CLOUD_SUFFIXES = (".xyz", ".ply")

log = logging.getLogger("pcgrid")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _cloud_files(path: Path) -> dict[str, Path]:
    if path.is_file():
        return {path.stem: path}
    if not path.is_dir():
        raise UsageError(f"no such file or directory: {path}")
    files = {}
    for f in sorted(path.iterdir()):
        if f.suffix.lower() in CLOUD_SUFFIXES:
            if f.stem in files:
                raise UsageError(f"duplicate stem {f.stem!r} in {path}")
            files[f.stem] = f
    if not files:
        raise UsageError(f"no .xyz or .ply files in {path}")
    return files


def _pair_stems(a: dict, b: dict, a_name: str, b_name: str) -> list[str]:
    only_a = sorted(set(a) - set(b))
    only_b = sorted(set(b) - set(a))
    if only_a or only_b:
        raise UsageError(
            f"unmatched stems: {a_name} only {only_a}, {b_name} only {only_b}"
        )
    return sorted(a)


def cmd_grid(args):
    grid, _ = gridding_forward(io.read_cloud(args.input), args.N)
    io.write_grid(args.output, grid)


def cmd_ungrid(args):
    points, _ = gridding_reverse_forward(io.read_grid(args.input))
    io.write_cloud(args.output, points)


def cmd_voxelize(args):
    io.write_grid(args.output, voxelize(io.read_cloud(args.input), args.N))


def cmd_eval(args):
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in METRICS]
    if unknown or not metrics:
        raise UsageError(f"unknown metrics {unknown}; choose from {','.join(METRICS)}")
    if args.d <= 0 or not 0 < args.p < 1:
        raise UsageError("--d must be > 0 and --p in (0, 1)")
    pred_files = _cloud_files(Path(args.pred))
    gt_files = _cloud_files(Path(args.gt))
    stems = _pair_stems(pred_files, gt_files, "pred", "gt")
    if "consistency" in metrics and len(stems) < 2:
        raise UsageError("consistency needs at least 2 clouds")
    input_files = None
    if args.input is not None:
        input_files = _cloud_files(Path(args.input))
        _pair_stems(pred_files, input_files, "pred", "input")

    preds = {s: io.read_cloud(pred_files[s]) for s in stems}
    gts = {s: io.read_cloud(gt_files[s]) for s in stems}
    refs = [gts[s] for s in stems]

    rows = []
    for i, s in enumerate(stems):
        R, T = preds[s], gts[s]
        row = {}
        for m in metrics:
            if m == "cd-l1":
                row[m] = chamfer_l1(R, T).value
            elif m == "cd-l2":
                row[m] = chamfer_l2(R, T).value
            elif m == "fscore":
                row[m] = f_score(R, T, args.d * bbox_diagonal(T))
            elif m == "uniformity":
                row[m] = uniformity(R, p=args.p, M=args.patches, seed=args.seed)
            elif m == "consistency":
                # CD to the previous cloud in stem order; the mean over rows is the sequence consistency
                row[m] = chamfer_l2(preds[stems[i - 1]], R).value if i else None
            elif m == "fidelity":
                inp = io.read_cloud(input_files[s]) if input_files else T
                row[m] = fidelity(inp, R)
            elif m == "mmd":
                row[m] = mmd(R, refs)
        rows.append((s, row))

    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["stem", *metrics])
    for s, row in rows:
        writer.writerow([s, *("" if row[m] is None else repr(float(row[m])) for m in metrics)])
    means = []
    for m in metrics:
        vals = [row[m] for _, row in rows if row[m] is not None]
        means.append(repr(float(np.mean(vals))))
    writer.writerow(["mean", *means])
    if args.output:
        Path(args.output).write_text(out.getvalue())
    else:
        sys.stdout.write(out.getvalue())


def cmd_synth(args):
    if args.count < 1 or args.points < 1:
        raise UsageError("--count and --points must be >= 1")
    if not 0 < args.partial_frac < 1:
        raise UsageError("--partial-frac must lie in (0, 1)")
    kinds = KINDS if args.kind == "mixed" else (args.kind,)
    root = Path(args.output)
    (root / "complete").mkdir(parents=True, exist_ok=True)
    (root / "partial").mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        kind = kinds[i % len(kinds)]
        shape_seed = args.seed * 100003 + i
        cloud = generate_complete(random_spec(kind, args.points, shape_seed))
        partial = make_partial(cloud, args.partial_frac, shape_seed)
        stem = f"{kind}_{i:04d}"
        io.write_xyz(root / "complete" / f"{stem}.xyz", cloud)
        io.write_xyz(root / "partial" / f"{stem}.xyz", partial)


def load_dataset(root) -> list:
    root = Path(root)
    partial = _cloud_files(root / "partial")
    full = _cloud_files(root / "complete")
    stems = _pair_stems(partial, full, "partial", "complete")
    return [(io.read_cloud(partial[s]), io.read_cloud(full[s])) for s in stems]


def cmd_train(args):
    cfg = load_config(args.config)
    dataset = load_dataset(args.data)

    def report(step, loss, terms):
        parts = " ".join(f"{k}={v:.6g}" for k, v in sorted(terms.items()))
        print(f"step {step} loss {loss:.9g} {parts}", flush=True)

    result = train(dataset, cfg, callback=report)
    io.save_checkpoint(args.out, cfg, result.params)


def cmd_complete(args):
    cfg, params = io.load_checkpoint(args.ckpt)
    _, final = complete(io.read_cloud(args.input), params, cfg, seed=args.seed)
    # offsets may push points past the cube; keep outputs readable by the loaders
    io.write_cloud(args.out, np.clip(final, -1 + CLAMP_EPS, 1 - CLAMP_EPS))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pcgrid", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("grid", help="grid a point cloud")
    s.add_argument("input")
    s.add_argument("-N", type=int, required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("ungrid", help="reverse a grid into points")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_ungrid)

    s = sub.add_parser("voxelize", help="binary occupancy baseline")
    s.add_argument("input")
    s.add_argument("-N", type=int, required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_voxelize)

    s = sub.add_parser("eval", help="metrics CSV over pred/gt pairs")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--input", help="partial inputs for fidelity (default: gt)")
    s.add_argument("--metrics", default="cd-l1,cd-l2,fscore")
    s.add_argument("--d", type=float, default=0.01, help="F-Score threshold, fraction of gt bbox diagonal")
    s.add_argument("--p", type=float, default=0.01, help="uniformity patch area fraction")
    s.add_argument("--patches", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--kind", choices=[*KINDS, "mixed"], default="mixed")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--points", type=int, default=2048)
    s.add_argument("--partial-frac", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train the toy completion network")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("complete", help="complete a partial cloud")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_complete)
    return p


_ERROR_KINDS = (
    (UsageError, "usage"),
    (ConfigError, "config"),
    (io.FormatError, "format"),
    (DomainError, "domain"),
    (ContractError, "contract"),
    (TrainingError, "training"),
    (DegenerateOutputError, "degenerate"),
    (OSError, "io"),
)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        args.func(args)
    except tuple(cls for cls, _ in _ERROR_KINDS) as exc:
        kind = next(name for cls, name in _ERROR_KINDS if isinstance(exc, cls))
        msg = " ".join(str(exc).split())
        print(f"pcgrid: error: {kind}: {msg}", file=sys.stderr)
        return 2 if kind == "usage" else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
