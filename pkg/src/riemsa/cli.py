"""Command line entry point.

Usage::

    riemsa <experiment> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

The positional experiment must match the config file's ``experiment``
field; ``--seed`` overrides the config seed.  Exit status: 0 success,
1 tolerance/invariant failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import EXPERIMENTS, ConfigError, parse_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riemsa",
        description="Fixed step-size stochastic approximation experiments on manifolds",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS, help="experiment to run")
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    parser.add_argument("--out", default=None, help="output directory (default: config 'out' or cwd)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker processes for replicate chains")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                f"config is for experiment {cfg.experiment!r}, not {args.experiment!r}"
            )
        return run_experiment(cfg, out_dir=args.out, seed_override=args.seed,
                              threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
