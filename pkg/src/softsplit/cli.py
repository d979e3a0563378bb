"""Command-line entry point.

    softsplit simulate --config cfg.json --policy static:3 --episodes 20 \
        --seeds 0,1,2 --out runs/static3
    softsplit train    --config cfg.json --iters 200 --out runs/train
    softsplit sweep    --config cfg.json --axis g_th --values 14000,16000,18000

`SIM_LOG=debug|info` controls log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import from_dict, load_config
from .errors import SoftSplitError
from .harness import run_experiment, run_sweep, run_training


def _setup_logging() -> None:
    level_name = os.environ.get("SIM_LOG", "info").lower()
    level = {"debug": logging.DEBUG, "info": logging.INFO}.get(level_name, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load(args) -> "ExperimentConfig":
    if args.config:
        raw = json.loads(Path(args.config).read_text())
    else:
        raw = {}
    run = raw.setdefault("run", {})
    if getattr(args, "policy", None):
        run["policy"] = args.policy
    if getattr(args, "episodes", None):
        run["episodes"] = args.episodes
    if getattr(args, "seeds", None):
        run["seeds"] = [int(s) for s in args.seeds.split(",")]
    if getattr(args, "out", None):
        run["out_dir"] = args.out
    if getattr(args, "checkpoint", None):
        run["checkpoint"] = args.checkpoint
    return from_dict(raw)


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="softsplit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="evaluate a policy over seeded episodes")
    sim.add_argument("--config", help="JSON experiment config")
    sim.add_argument("--policy", help="hmarl | static:<f> | random | optimal")
    sim.add_argument("--episodes", type=int)
    sim.add_argument("--seeds", help="comma-separated seed list")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--checkpoint", help="trained parameters (required for hmarl)")

    tr = sub.add_parser("train", help="train the hierarchical policies")
    tr.add_argument("--config", help="JSON experiment config")
    tr.add_argument("--iters", type=int, help="training iterations")
    tr.add_argument("--out", help="output directory")

    sw = sub.add_parser("sweep", help="evaluate across compute budgets")
    sw.add_argument("--config", help="JSON experiment config")
    sw.add_argument("--axis", default="g_th", choices=["g_th"])
    sw.add_argument("--values", help="comma-separated budget values")
    sw.add_argument("--policy", help="hmarl | static:<f> | random | optimal")
    sw.add_argument("--out", help="output directory")
    sw.add_argument("--checkpoint", help="trained parameters (required for hmarl)")

    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "simulate":
            metrics = run_experiment(cfg)
            mean_obj = sum(m.objective_mean for m in metrics) / len(metrics)
            print(f"{len(metrics)} episodes, mean objective {mean_obj:.4f}")
        elif args.command == "train":
            ckpt = run_training(cfg, iters=args.iters)
            print(f"checkpoint written to {ckpt}")
        elif args.command == "sweep":
            values = [float(v) for v in args.values.split(",")] if args.values else None
            results = run_sweep(cfg, values=values)
            for v, metrics in results.items():
                mean_obj = sum(m.objective_mean for m in metrics) / len(metrics)
                print(f"g_th={v:.0f}: mean objective {mean_obj:.4f}")
    except SoftSplitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
