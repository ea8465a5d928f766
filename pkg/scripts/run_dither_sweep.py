#!/usr/bin/env python3
"""Dither-amplitude suboptimality sweep on the pendubot swing-up.

Reruns the data-driven optimizer with the dither bounds halved per row,
measuring the distance of each final trajectory to a tightly-converged
model-based reference.  Writes sweep.csv (and caches the reference
trajectory) in the output directory.

Usage:
    python3 scripts/run_dither_sweep.py [--halvings K] [--out DIR] [--seed N]
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
    parser.add_argument("--halvings", type=int, default=5,
                        help="number of dither halvings (paper-scale: 15)")
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", default=None)
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    argv = ["sweep", "--config", args.config, "--halvings", str(args.halvings)]
    if args.out is not None:
        argv += ["--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    sys.exit(main(argv))
