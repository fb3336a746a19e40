"""Command line entry point: ``ilplayer {generate,train,eval,ablate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..datasets import DatasetFormatError, generate, load_dataset, save_dataset
from .ablation import run_ablation_grid
from .config import ExperimentConfig, load_config, parse_config_text
from .models import evaluate, load_checkpoint, save_checkpoint
from .results import emit_results
from .training import train

EXIT_INVARIANT = 3


def _generate(args):
    params = {"seed": args.seed}
    if args.task == "rc":
        params.update(m=args.m, box=args.box)
        if args.n is not None:
            params["n"] = args.n
    elif args.task == "wsc":
        params["universe"] = args.m
    elif args.noise is not None:
        params["noise"] = args.noise
    for key in ("train_size", "test_size"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    ds = generate(args.task, **params)
    save_dataset(ds, args.out)
    print(f"wrote {args.out}: {len(ds.train)} train / {len(ds.test)} test items")


def _train(args):
    config = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("epochs", args.epochs)) if v is not None}
    config = config.with_overrides(**overrides)
    dataset = load_dataset(args.dataset)
    model, record = train(config, dataset)
    out_dir = Path(args.out_dir)
    csv_path, json_path = emit_results([record], out_dir)
    if model is not None:
        save_checkpoint(model, config, out_dir / "checkpoint.json")
    final = record.final
    print(f"accuracy {final.accuracy:.2f}% (best {record.best.accuracy:.2f}%), "
          f"fallback fraction {final.fallback_fraction:.4f}; wrote {csv_path} and {json_path}")


def _eval(args):
    dataset = load_dataset(args.dataset)
    model, _ = load_checkpoint(args.checkpoint, dataset)
    metrics, _ = evaluate(model, dataset, args.split)
    print(json.dumps(metrics.__dict__, indent=2, sort_keys=True))


def _ablate(args):
    path = Path(args.grid)
    spec = parse_config_text(path.read_text())
    base = ExperimentConfig.from_dict(spec.get("base", {}))
    if "dataset" in spec:
        dataset = load_dataset(path.parent / spec["dataset"])
    else:
        gen = dict(spec["generate"])
        dataset = generate(gen.pop("task", base.task), **gen)
    records = run_ablation_grid(base, spec.get("grid", {}), dataset, spec.get("seeds", [base.seed]))
    out_dir = Path(args.out_dir or spec.get("out_dir", "ablation_results"))
    csv_path, json_path = emit_results(records, out_dir)
    print(f"{len(records)} runs; wrote {csv_path} and {json_path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilplayer", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate and label a dataset")
    g.add_argument("--task", choices=["rc", "wsc", "knapsack"], required=True)
    g.add_argument("--m", type=int, default=1, help="constraint count (rc) or universe size (wsc)")
    g.add_argument("--box", choices=["binary", "dense"], default="binary")
    g.add_argument("--n", type=int, default=None, help="dimension (rc only)")
    g.add_argument("--noise", type=float, default=None, help="feature noise (knapsack only)")
    g.add_argument("--train-size", type=int, default=None)
    g.add_argument("--test-size", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_generate)

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--config", required=True, help="JSON or key = value file")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out-dir", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.set_defaults(func=_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", choices=["train", "test"], default="test")
    e.set_defaults(func=_eval)

    a = sub.add_parser("ablate", help="run an ablation grid")
    a.add_argument("--grid", required=True, help="grid file with base, grid, seeds and dataset keys")
    a.add_argument("--out-dir", default=None)
    a.set_defaults(func=_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (DatasetFormatError, FloatingPointError, RuntimeError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


if __name__ == "__main__":
    sys.exit(main())
