"""Command line entry point: ``iher train`` and ``iher eval``."""

from __future__ import annotations

import argparse
import logging
import sys

from .checkpoint import CheckpointError, load_checkpoint
from .config import ABLATIONS, ALGOS, ConfigError, load_config
from .trainer import evaluate, train


def build_parser():
    p = argparse.ArgumentParser(prog="iher", description="Imaginary hindsight experience replay trainer")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a training job")
    t.add_argument("--config", help="flat key = value config file")
    t.add_argument("--task", help="point-reach | point-push | point-slide")
    t.add_argument("--seed", type=int)
    t.add_argument("--algo", choices=ALGOS)
    t.add_argument("--ablation", choices=ABLATIONS)
    t.add_argument("--out", default="runs/latest", help="output directory for metrics.csv and checkpoint")
    t.add_argument("-q", "--quiet", action="store_true")

    e = sub.add_parser("eval", help="evaluate a saved checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=12345)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
            cfg = load_config(args.config, task=args.task, seed=args.seed, algo=args.algo, ablation=args.ablation)
            trainer = train(cfg, args.out)
            last = trainer.history[-1]
            print(f"done: {last.epoch} epochs, {last.real_steps_total} real steps, "
                  f"success {last.eval_success_rate:.3f}; outputs in {args.out}")
        else:
            if args.episodes <= 0:
                raise ConfigError("--episodes must be positive")
            trainer = load_checkpoint(args.checkpoint)
            rate = evaluate(trainer.agent.policy, trainer.env, args.episodes, args.seed)
            print(f"task {trainer.config.task}: success rate {rate:.4f} over {args.episodes} episodes")
    except (ConfigError, CheckpointError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
