"""Command-line front end: solve / compare / sweep with CSV artifacts."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import csvio
from .config import ConfigError, Problem, build_problem, load_config
from .dynamics import Trajectory
from .optimizer import (DATA_DRIVEN, MODEL_BASED, SolverError, dither_sweep,
                        reference_optimum, run)


def _load(args) -> Problem:
    raw = load_config(args.config)
    return build_problem(raw, out_override=args.out, seed_override=args.seed)


def _reference_trajectory(problem: Problem) -> Trajectory:
    x = problem.cost.x_ref
    u = problem.cost.u_ref
    return Trajectory(x, u, x[0])


def _write_error(out_dir, message) -> int:
    csvio.write_text(os.path.join(out_dir, "error.txt"), message + "\n")
    print(f"error: {message}", file=sys.stderr)
    return 1


def _batch_dumper(out_dir, enabled):
    if not enabled:
        return None

    def dump(k, batches):
        csvio.write_batches(os.path.join(out_dir, f"batches_k{k:04d}.csv"),
                            k, batches)
    return dump


def cmd_solve(args) -> int:
    problem = _load(args)
    out = problem.output_dir
    os.makedirs(out, exist_ok=True)
    try:
        records, final = run(problem.solver, problem.plant, problem.cost,
                             problem.initial,
                             on_batches=_batch_dumper(out, args.dump_batches))
    except SolverError as err:
        csvio.write_iterations(os.path.join(out, "iterations.csv"), err.records)
        return _write_error(out, str(err))
    csvio.write_iterations(os.path.join(out, "iterations.csv"), records)
    csvio.write_trajectory(os.path.join(out, "trajectory.csv"), final)
    csvio.write_trajectory(os.path.join(out, "reference.csv"),
                           _reference_trajectory(problem))
    if args.plot:
        _plot_run(out, records, final, problem)
    if records:
        print(f"{problem.solver.mode}: {len(records)} iterations, "
              f"final |dg| = {abs(records[-1].dg):.3e}")
    return 0


def cmd_compare(args) -> int:
    problem = _load(args)
    out = problem.output_dir
    os.makedirs(out, exist_ok=True)
    results = {}
    for mode in (MODEL_BASED, DATA_DRIVEN):
        cfg = replace(problem.solver, mode=mode, dg_tol=None)
        try:
            records, final = run(cfg, problem.plant, problem.cost,
                                 problem.initial)
        except SolverError as err:
            csvio.write_iterations(
                os.path.join(out, f"iterations_{mode}.csv"), err.records)
            return _write_error(out, f"{mode}: {err}")
        results[mode] = records
        csvio.write_iterations(os.path.join(out, f"iterations_{mode}.csv"),
                               records)
        csvio.write_trajectory(os.path.join(out, f"trajectory_{mode}.csv"),
                               final)
    csvio.write_compare(os.path.join(out, "compare.csv"),
                        results[MODEL_BASED], results[DATA_DRIVEN])
    return 0


def cmd_sweep(args) -> int:
    problem = _load(args)
    out = problem.output_dir
    os.makedirs(out, exist_ok=True)
    cache = os.path.join(out, "reference_trajectory.csv")
    if os.path.exists(cache):
        reference = csvio.read_trajectory(cache)
    else:
        try:
            reference = reference_optimum(problem.solver, problem.plant,
                                          problem.cost, problem.initial)
        except SolverError as err:
            return _write_error(out, f"reference run: {err}")
        csvio.write_trajectory(cache, reference)
    rows = dither_sweep(problem.solver, problem.plant, problem.cost,
                        problem.initial, args.halvings, reference=reference)
    csvio.write_sweep(os.path.join(out, "sweep.csv"), rows)
    for r in rows:
        status = f"dist = {r.dist:.6e}" if r.dist is not None else f"FAILED ({r.error})"
        print(f"j={r.j} delta_x={r.delta_x:.3e} delta_u={r.delta_u:.3e} {status}")
    return 0


def _plot_run(out, records, final, problem):
    """Optional self-contained SVG plots; the CSVs are the contract."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots()
    ax.semilogy([r.k for r in records], [abs(r.dg) for r in records])
    ax.set_xlabel("iteration")
    ax.set_ylabel("|dg|")
    fig.savefig(os.path.join(out, "dg.svg"))
    plt.close(fig)

    ts = np.arange(final.horizon + 1) * problem.dt
    fig, axes = plt.subplots(final.n + final.m, 1, sharex=True,
                             figsize=(6, 2 * (final.n + final.m)))
    for i in range(final.n):
        axes[i].plot(ts, problem.cost.x_ref[:, i], "--", label="reference")
        axes[i].plot(ts, final.x[:, i], label="solution")
        axes[i].set_ylabel(f"x{i + 1}")
    for j in range(final.m):
        ax = axes[final.n + j]
        ax.plot(ts[:-1], problem.cost.u_ref[:, j], "--")
        ax.plot(ts[:-1], final.u[:, j])
        ax.set_ylabel(f"u{j + 1}")
    axes[0].legend()
    axes[-1].set_xlabel("time [s]")
    fig.savefig(os.path.join(out, "trajectory.svg"))
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajopt",
        description="Trajectory optimization with exact or data-identified "
                    "linearizations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run config (YAML)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")

    p_solve = sub.add_parser("solve", help="run a single optimization")
    common(p_solve)
    p_solve.add_argument("--dump-batches", action="store_true",
                         help="dump identification batches per iteration")
    p_solve.add_argument("--plot", action="store_true",
                         help="also emit SVG plots")
    p_solve.set_defaults(func=cmd_solve)

    p_cmp = sub.add_parser("compare",
                           help="run both modes on the same problem")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep",
                             help="dither-halving suboptimality sweep")
    common(p_sweep)
    p_sweep.add_argument("--halvings", type=int, default=5,
                         help="number of dither halvings")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
