"""Outer optimization loops: model-based and data-driven trajectory refinement.

Both loops repeat descent -> curve update -> projection.  The model-based
step linearizes the plant exactly; the data-driven step replaces the
linearization with a least-squares estimate from dithered closed-loop
experiments and also synthesizes its tracking controller from that estimate,
so it only ever touches the plant through rollouts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cost import TrackingCost, derivative_stack, total_cost
from .dynamics import (Curve, RolloutOracle, Trajectory, curvature_stack,
                       jacobians, stacks)
from .identification import DitherConfig, identify_about
from .lqr import HessianNotPositiveDefinite, solve_descent_riccati
from .projection import FeedbackPolicy, project, synthesize_policy

MODEL_BASED = "model_based"
DATA_DRIVEN = "data_driven"
REFERENCE_DG_TOL = 1e-10


class SolverError(RuntimeError):
    """Wraps a failure inside the loop, preserving the log up to that point."""

    def __init__(self, iteration, cause, records):
        super().__init__(f"iteration {iteration} failed: {cause}")
        self.iteration = iteration
        self.cause = cause
        self.records = records


@dataclass(frozen=True)
class SolverConfig:
    mode: str = MODEL_BASED
    gamma: float = 1.0
    max_iters: int = 50
    dg_tol: float | None = None  # default depends on mode
    dither: DitherConfig = field(default_factory=DitherConfig)
    reg_Q: np.ndarray | None = None  # explicit tracking-regulator weights;
    reg_R: np.ndarray | None = None  # None = reuse the descent recursion gains
    curvature_switch: float = 1e4  # |dg| below which the model-based step
    # augments the subproblem with exact second-order dynamics terms (0 = off)

    def __post_init__(self):
        if self.mode not in (MODEL_BASED, DATA_DRIVEN):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.dg_tol is not None and self.dg_tol <= 0:
            raise ValueError("dg_tol must be positive")
        if self.curvature_switch < 0:
            raise ValueError("curvature_switch must be nonnegative")

    @property
    def stop_tol(self) -> float:
        if self.dg_tol is not None:
            return self.dg_tol
        return 1e-8 if self.mode == MODEL_BASED else 1e-4


@dataclass(frozen=True)
class IterationRecord:
    k: int
    cost: float
    dg: float
    descent_norm: float
    kappa_max: float = math.nan  # data-driven only
    dist: float = math.nan       # distance to a reference solution, if given


def _tracking_policy(cfg: SolverConfig, model, desc) -> FeedbackPolicy:
    """Feedback for the projection: the descent recursion's own gains, unless
    explicit regulator weights were configured."""
    if cfg.reg_Q is None and cfg.reg_R is None:
        return FeedbackPolicy(desc.gains)
    if cfg.reg_Q is None or cfg.reg_R is None:
        raise ValueError("regulator weights must be given together")
    return synthesize_policy(model, np.atleast_2d(cfg.reg_Q),
                             np.atleast_2d(cfg.reg_R))


def trajectory_distance(a, b) -> float:
    ax, au = stacks(a)
    bx, bu = stacks(b)
    return float(np.sqrt(np.sum((ax - bx) ** 2) + np.sum((au - bu) ** 2)))


def _descent_norm(desc) -> float:
    return float(np.sqrt(np.sum(desc.dx ** 2) + np.sum(desc.du ** 2)))


def _updated_curve(traj: Trajectory, desc, gamma: float) -> Curve:
    return Curve(traj.x + gamma * desc.dx, traj.u + gamma * desc.du, traj.x_init)


def _adjoint(model, derivs):
    lam = np.zeros((model.horizon + 1, model.n))
    lam[-1] = derivs.q[-1]
    for t in reversed(range(model.horizon)):
        lam[t] = derivs.q[t] + model.A[t].T @ lam[t + 1]
    return lam


def _curvature_corrected(traj, plant, model, derivs):
    """Subproblem Hessians with exact second-order dynamics terms added.

    The gradient stacks (hence dg) are untouched; only the quadratic model
    changes, so the minimizer is the exact Newton direction of the reduced
    problem instead of its quasi-Newton approximation.
    """
    Gxx, Gxu, Guu = curvature_stack(traj, _adjoint(model, derivs), plant)
    return replace(derivs, Qh=derivs.Qh + Gxx, S=derivs.S + Gxu,
                   Rh=derivs.Rh + Guu)


def model_based_step(traj: Trajectory, plant, cost: TrackingCost,
                     cfg: SolverConfig, k: int = 0):
    """One descent/update/projection step on exact linearizations.

    Far from a solution the subproblem uses the cost Hessian alone; once the
    quasi-Newton direction predicts |dg| <= curvature_switch, the step retries
    with second-order dynamics terms, falling back whenever that subproblem
    loses convexity on the feasible subspace.
    """
    model = jacobians(traj, plant, mode="exact")
    derivs = derivative_stack(traj, cost)
    desc = solve_descent_riccati(model, derivs)
    if (cfg.curvature_switch > 0 and abs(desc.dg) <= cfg.curvature_switch
            and hasattr(plant, "jacobian_step")):
        try:
            desc = solve_descent_riccati(
                model, _curvature_corrected(traj, plant, model, derivs),
                convexity="recursion")
        except HessianNotPositiveDefinite:
            pass
    policy = _tracking_policy(cfg, model, desc)
    new_traj = project(_updated_curve(traj, desc, cfg.gamma), policy, plant)
    record = IterationRecord(k=k, cost=total_cost(new_traj, cost), dg=desc.dg,
                             descent_norm=_descent_norm(desc))
    return new_traj, record


def data_driven_step(traj: Trajectory, plant_oracle, cost: TrackingCost,
                     cfg: SolverConfig, policy_prev: FeedbackPolicy, k: int = 0):
    """One model-free step: identify, descend on the estimate, re-project.

    The experiments track the current trajectory with the previous iteration's
    controller; the projection uses the controller synthesized from the fresh
    estimate.
    """
    model, batches = identify_about(traj, policy_prev, cfg.dither,
                                    plant_oracle, iteration=k)
    derivs = derivative_stack(traj, cost)
    desc = solve_descent_riccati(model, derivs)
    policy = _tracking_policy(cfg, model, desc)
    new_traj = project(_updated_curve(traj, desc, cfg.gamma), policy, plant_oracle)
    record = IterationRecord(k=k, cost=total_cost(new_traj, cost), dg=desc.dg,
                             descent_norm=_descent_norm(desc),
                             kappa_max=float(np.max(batches.kappas)))
    return new_traj, record, policy, batches


def run(cfg: SolverConfig, plant, cost: TrackingCost, initial_traj: Trajectory,
        reference: Trajectory | None = None, on_batches=None):
    """Iterate until |dg| falls below the stopping tolerance or max_iters.

    Returns (records, final trajectory).  ``on_batches(k, batches)``, if
    given, is called with each data-driven iteration's raw batches.
    """
    records: list[IterationRecord] = []
    traj = initial_traj
    policy_prev = FeedbackPolicy.zero(traj.horizon, traj.n, traj.m)
    oracle = plant if isinstance(plant, RolloutOracle) else RolloutOracle(plant)
    for k in range(cfg.max_iters):
        try:
            if cfg.mode == MODEL_BASED:
                traj, rec = model_based_step(traj, plant, cost, cfg, k=k)
            else:
                traj, rec, policy_prev, batches = data_driven_step(
                    traj, oracle, cost, cfg, policy_prev, k=k)
                if on_batches is not None:
                    on_batches(k, batches)
        except Exception as err:  # preserve partial log for the caller
            raise SolverError(k, err, records) from err
        if reference is not None:
            rec = replace(rec, dist=trajectory_distance(traj, reference))
        records.append(rec)
        if abs(rec.dg) <= cfg.stop_tol:
            break
    return records, traj


def reference_optimum(cfg: SolverConfig, plant, cost: TrackingCost,
                      initial_traj: Trajectory,
                      dg_tol=REFERENCE_DG_TOL) -> Trajectory:
    """Tightly-converged model-based solution used as the comparison optimum."""
    ref_cfg = replace(cfg, mode=MODEL_BASED, dg_tol=dg_tol)
    _, traj = run(ref_cfg, plant, cost, initial_traj)
    return traj


@dataclass(frozen=True)
class SweepRow:
    j: int
    delta_x: float
    delta_u: float
    dist: float | None     # None when the run failed
    error: str | None = None


def dither_sweep(cfg: SolverConfig, plant, cost: TrackingCost,
                 initial_traj: Trajectory, n_halvings: int,
                 reference: Trajectory | None = None) -> list[SweepRow]:
    """Rerun the data-driven loop with halved dither bounds, tabulating suboptimality.

    Row j uses bounds (delta_x / 2^j, delta_u / 2^j); failed runs are recorded
    and the sweep continues.
    """
    if n_halvings < 1:
        raise ValueError("n_halvings must be at least 1")
    if reference is None:
        reference = reference_optimum(cfg, plant, cost, initial_traj)
    rows = []
    for j in range(n_halvings):
        dd_cfg = replace(cfg, mode=DATA_DRIVEN,
                         dither=cfg.dither.scaled(0.5 ** j))
        try:
            _, traj = run(dd_cfg, plant, cost, initial_traj)
        except SolverError as err:
            rows.append(SweepRow(j=j, delta_x=dd_cfg.dither.delta_x,
                                 delta_u=dd_cfg.dither.delta_u,
                                 dist=None, error=str(err.cause)))
            continue
        rows.append(SweepRow(j=j, delta_x=dd_cfg.dither.delta_x,
                             delta_u=dd_cfg.dither.delta_u,
                             dist=trajectory_distance(traj, reference)))
    return rows
