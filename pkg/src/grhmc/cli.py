"""Command-line entry points: run one experiment, run a suite, re-compute ESS."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config, load_suite
from .diagnostics import ess
from .experiment import experiment_table_text, run_experiment, run_suite


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=("desk", "paper"), help="run-size preset")
    parser.add_argument("--seed", type=int, help="base seed (replica i uses seed+i)")
    parser.add_argument("--replicas", type=int, help="number of independent replicas")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--parallel", type=int, help="worker processes for replicas")


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": args.seed,
        "replicas": args.replicas,
        "out_dir": args.out,
        "parallel": args.parallel,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="grhmc",
        description="Continuous-time randomized HMC with adaptive diagonal scaling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config", help="YAML experiment config")
    p_run.add_argument("--method", help="override the tuning method")
    _add_shared(p_run)

    p_suite = sub.add_parser("suite", help="run a suite of (target, method) pairs")
    p_suite.add_argument("suite_file", help="YAML suite description")
    _add_shared(p_suite)

    p_ess = sub.add_parser("ess", help="effective sample sizes from saved sample dumps")
    p_ess.add_argument("samples_dir", help="directory containing replica_*_samples.csv")

    args = parser.parse_args(argv)

    if args.command == "run":
        overrides = _overrides(args)
        if args.method is not None:
            overrides["method"] = args.method
        cfg = load_config(args.config, preset=args.preset, overrides=overrides)
        result = run_experiment(cfg)
        sys.stdout.write(experiment_table_text(result))
        return 0

    if args.command == "suite":
        suite = load_suite(args.suite_file, preset=args.preset, overrides=_overrides(args))
        out_dir = Path(args.out) if args.out else Path(f"results/{suite.name}")
        results = run_suite(suite, out_dir=out_dir)
        n = sum(len(v) for v in results.values())
        print(f"completed {n} experiments; tables written to {out_dir}")
        return 0

    if args.command == "ess":
        directory = Path(args.samples_dir)
        files = sorted(directory.glob("replica_*_samples.csv"))
        if len(files) < 2:
            print("need at least two replica_*_samples.csv files", file=sys.stderr)
            return 2
        chains = np.stack([np.loadtxt(f, delimiter=",", ndmin=2) for f in files])
        values = ess(chains)
        for j, v in enumerate(values):
            print(f"coordinate {j + 1}: ESS = {v:.0f}")
        print(f"total samples: {chains.shape[0] * chains.shape[1]}")
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
