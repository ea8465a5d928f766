#!/usr/bin/env python3
"""Pendubot swing-up study: model-based vs data-driven refinement.

Runs both optimizers on the swing-up problem from configs/pendubot.yaml and
writes per-iteration logs, final trajectories, and the joint |dg| comparison
table (compare.csv) to the output directory.

Usage:
    python3 scripts/run_swingup.py [--out DIR] [--seed N]
"""
import argparse
import os
import sys

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, os.path.join(REPO_ROOT, "src"))

from trajopt.cli import main  # noqa: E402


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config",
                        default=os.path.join(REPO_ROOT, "configs", "pendubot.yaml"))
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", default=None)
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    argv = ["compare", "--config", args.config]
    if args.out is not None:
        argv += ["--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    sys.exit(main(argv))
