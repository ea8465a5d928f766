"""Declarative run configuration: YAML parsing, validation, problem assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

from . import cost as cost_mod
from .dynamics import (CubicPlant, LinearPlant, Pendubot, PendubotParams,
                       RolloutOracle, Trajectory, rollout_open_loop)
from .identification import DitherConfig, identify_about
from .optimizer import SolverConfig
from .projection import FeedbackPolicy

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Validation failure; the message names the offending field."""


def _require(cond, field, msg):
    if not cond:
        raise ConfigError(f"{field}: {msg}")


def _get(d, field, default=None, required=False):
    if field.split(".")[-1] in d:
        return d[field.split(".")[-1]]
    if required:
        raise ConfigError(f"{field}: missing required field")
    return default


def _as_weight(value, dim, field):
    """Accept a diagonal list or a full symmetric matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim == 1:
        _require(arr.shape[0] == dim, field, f"expected {dim} diagonal entries")
        return np.diag(arr)
    _require(arr.shape == (dim, dim), field, f"expected a {dim}x{dim} matrix")
    return arr


@dataclass
class Problem:
    """Everything a run needs: plant, cost, solver config, initial trajectory."""

    plant: object
    cost: cost_mod.TrackingCost
    solver: SolverConfig
    initial: Trajectory
    dt: float
    seed: int
    output_dir: str


def load_config(path) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    version = raw.get("schema_version")
    _require(version == SCHEMA_VERSION, "schema_version",
             f"expected {SCHEMA_VERSION}, got {version!r}")
    return raw


def build_problem(raw: dict, out_override=None, seed_override=None) -> Problem:
    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    output_dir = out_override or raw.get("output_dir", "out")

    plant, dt = _build_plant(raw.get("plant"))
    horizon = raw.get("horizon", {})
    T = int(_get(horizon, "horizon.steps", required=True))
    _require(T >= 1, "horizon.steps", "must be at least 1")

    solver = _build_solver(raw.get("solver", {}), seed)
    cost = _build_cost(raw.get("cost"), plant, dt, T, solver)
    initial = _build_initial(raw.get("initial", {}), plant, T)
    return Problem(plant=plant, cost=cost, solver=solver, initial=initial,
                   dt=dt, seed=seed, output_dir=output_dir)


def _build_plant(section):
    _require(isinstance(section, dict), "plant", "missing plant section")
    kind = _get(section, "plant.kind", required=True)
    dt = float(section.get("dt", 0.01))
    _require(dt > 0, "plant.dt", "must be strictly positive")
    if kind == "pendubot":
        params = dict(section.get("params", {}))
        params["dt"] = dt
        try:
            return Pendubot(PendubotParams(**params)), dt
        except (TypeError, ValueError) as err:
            raise ConfigError(f"plant.params: {err}") from None
    if kind == "linear":
        A = section.get("A")
        B = section.get("B")
        _require(A is not None and B is not None, "plant.A/plant.B",
                 "linear plant requires A and B")
        return LinearPlant(np.asarray(A, dtype=float), np.asarray(B, dtype=float)), dt
    if kind == "cubic":
        return CubicPlant(dt=dt), dt
    raise ConfigError(f"plant.kind: unknown plant {kind!r}")


def _build_solver(section, seed) -> SolverConfig:
    dither_raw = dict(section.get("dither", {}))
    dither_raw.setdefault("seed", seed)
    # YAML 1.1 reads exponents like 1.0e12 as strings; coerce numeric fields.
    for key in ("delta_x", "delta_u", "M_bound"):
        if key in dither_raw:
            dither_raw[key] = float(dither_raw[key])
    for key in ("L", "seed", "max_retries"):
        if key in dither_raw:
            dither_raw[key] = int(dither_raw[key])
    try:
        dither = DitherConfig(**dither_raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"solver.dither: {err}") from None
    reg = section.get("regulator", {}) or {}
    try:
        return SolverConfig(
            mode=section.get("mode", "model_based"),
            gamma=float(section.get("gamma", 1.0)),
            max_iters=int(section.get("max_iters", 50)),
            dg_tol=(None if section.get("dg_tol") is None
                    else float(section["dg_tol"])),
            dither=dither,
            reg_Q=(None if reg.get("Q") is None
                   else np.asarray(reg["Q"], dtype=float)),
            reg_R=(None if reg.get("R") is None
                   else np.asarray(reg["R"], dtype=float)),
            curvature_switch=float(section.get("curvature_switch", 1e4)),
        )
    except ValueError as err:
        raise ConfigError(f"solver: {err}") from None


def _build_cost(section, plant, dt, T, solver: SolverConfig):
    _require(isinstance(section, dict), "cost", "missing cost section")
    n, m = plant.n, plant.m
    Q = _as_weight(_get(section, "cost.Q", required=True), n, "cost.Q")
    R = _as_weight(_get(section, "cost.R", required=True), m, "cost.R")
    if solver.reg_Q is not None:
        _require(solver.reg_Q.shape == (n, n), "solver.regulator.Q",
                 f"expected a {n}x{n} matrix")
    if solver.reg_R is not None:
        _require(solver.reg_R.shape == (m, m), "solver.regulator.R",
                 f"expected a {m}x{m} matrix")

    x_ref, u_ref = _build_reference(section.get("reference"), n, m, dt, T)
    Q_T = _build_terminal(section.get("terminal", {}), plant, Q, R, solver,
                          x_ref, u_ref)
    try:
        return cost_mod.TrackingCost(Q=Q, R=R, Q_T=Q_T, x_ref=x_ref, u_ref=u_ref)
    except ValueError as err:
        raise ConfigError(f"cost: {err}") from None


def _build_reference(section, n, m, dt, T):
    _require(isinstance(section, dict), "cost.reference", "missing reference section")
    kind = section.get("kind", "step")
    if kind == "step":
        start = np.asarray(_get(section, "cost.reference.start_state",
                                required=True), dtype=float)
        end = np.asarray(_get(section, "cost.reference.end_state",
                              required=True), dtype=float)
        _require(start.shape == (n,), "cost.reference.start_state",
                 f"expected {n} entries")
        _require(end.shape == (n,), "cost.reference.end_state",
                 f"expected {n} entries")
        step_time = float(section.get("step_time", 0.5 * T * dt))
        x_ref = cost_mod.step_reference(start, end, step_time, dt, T)
        u_ref = np.tile(np.asarray(section.get("input", np.zeros(m)),
                                   dtype=float).reshape(1, m), (T, 1))
        return x_ref, u_ref
    if kind == "csv":
        from .csvio import read_trajectory
        path = _get(section, "cost.reference.csv", required=True)
        try:
            ref = read_trajectory(path)
        except OSError as err:
            raise ConfigError(f"cost.reference.csv: {err}") from None
        _require(ref.horizon == T and ref.n == n and ref.m == m,
                 "cost.reference.csv", "reference does not match plant/horizon")
        return ref.x, ref.u
    raise ConfigError(f"cost.reference.kind: unknown kind {kind!r}")


def _build_terminal(section, plant, Q, R, solver, x_ref, u_ref):
    mode = section.get("mode", "dare")
    if mode == "explicit":
        value = _get(section, "cost.terminal.Q_T", required=True)
        return _as_weight(value, Q.shape[0], "cost.terminal.Q_T")
    if mode != "dare":
        raise ConfigError(f"cost.terminal.mode: unknown mode {mode!r}")
    x_eq = np.asarray(section.get("equilibrium_state", x_ref[-1]), dtype=float)
    u_eq = np.asarray(section.get("equilibrium_input",
                                  np.zeros(plant.m)), dtype=float)
    lin = section.get("linearization", "exact")
    if lin == "exact":
        _require(hasattr(plant, "jacobian_step"), "cost.terminal.linearization",
                 "plant has no analytic Jacobians; use 'identified'")
        A_eq, B_eq = plant.jacobian_step(x_eq, u_eq)
    elif lin == "identified":
        A_eq, B_eq = _identify_equilibrium(plant, x_eq, u_eq, solver.dither)
    else:
        raise ConfigError(
            f"cost.terminal.linearization: unknown mode {lin!r}")
    try:
        return cost_mod.terminal_weight_dare(A_eq, B_eq, Q, R)
    except cost_mod.DareError as err:
        raise ConfigError(f"cost.terminal: {err}") from None


def _identify_equilibrium(plant, x_eq, u_eq, dither: DitherConfig):
    """One-step dithered experiments about an equilibrium, rollout access only."""
    oracle = RolloutOracle(plant)
    nominal = rollout_open_loop(x_eq, u_eq.reshape(1, -1), oracle)
    policy = FeedbackPolicy.zero(1, plant.n, plant.m)
    model, _ = identify_about(nominal, policy, dither, oracle, iteration=0)
    return model.A[0], model.B[0]


def _build_initial(section, plant, T) -> Trajectory:
    kind = section.get("kind", "standstill")
    if kind == "standstill":
        state = np.asarray(_get(section, "initial.state", required=True),
                           dtype=float)
        _require(state.shape == (plant.n,), "initial.state",
                 f"expected {plant.n} entries")
        inp = np.asarray(section.get("input", np.zeros(plant.m)), dtype=float)
        traj = rollout_open_loop(state, np.tile(inp.reshape(1, -1), (T, 1)), plant)
        drift = float(np.max(np.abs(traj.x - state)))
        _require(drift <= 1e-9, "initial.state",
                 f"not an equilibrium under the given input (drift {drift:.2e})")
        return traj
    if kind == "csv":
        from .csvio import read_trajectory
        path = _get(section, "initial.csv", required=True)
        try:
            traj = read_trajectory(path)
        except OSError as err:
            raise ConfigError(f"initial.csv: {err}") from None
        _require(traj.horizon == T and traj.n == plant.n and traj.m == plant.m,
                 "initial.csv", "trajectory does not match plant/horizon")
        return traj
    raise ConfigError(f"initial.kind: unknown kind {kind!r}")
