"""Dithered closed-loop experiments and per-step least-squares identification.

The model-free optimizer estimates the time-varying linearization of the
plant about the current trajectory from L perturbed rollouts: dithers enter
through the tracking controller's references, batch matrices collect the
columnwise deviations, and each step's (A, B) is fit by least squares through
the Gram normal equations, gated by a condition-number bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DimensionError, LtvModel, Trajectory
from .projection import DivergenceError, FeedbackPolicy

KAPPA_INF = float("inf")


class IllConditioned(RuntimeError):
    """Data batches fail the condition-number gate; caller should resample."""

    def __init__(self, t, kappa):
        super().__init__(f"batch Gram matrix at t={t} has condition number "
                         f"{kappa:.3e} above the bound")
        self.t = t
        self.kappa = kappa


@dataclass(frozen=True)
class DitherConfig:
    delta_x: float = 0.01
    delta_u: float = 0.1
    L: int = 6
    dist_u: str = "uniform_zero_to_delta"
    dist_x: str = "uniform_symmetric"
    seed: int = 0
    max_retries: int = 10
    M_bound: float = 1e8

    def __post_init__(self):
        if self.delta_x < 0 or self.delta_u < 0:
            raise ValueError("dither bounds must be nonnegative")
        if self.L < 1:
            raise ValueError("L must be at least 1")
        if self.M_bound <= 1:
            raise ValueError("M_bound must exceed 1")
        for name in ("dist_u", "dist_x"):
            if getattr(self, name) not in ("uniform_zero_to_delta", "uniform_symmetric"):
                raise ValueError(f"unknown distribution tag for {name}")

    def scaled(self, factor: float) -> "DitherConfig":
        return DitherConfig(delta_x=self.delta_x * factor,
                            delta_u=self.delta_u * factor,
                            L=self.L, dist_u=self.dist_u, dist_x=self.dist_x,
                            seed=self.seed, max_retries=self.max_retries,
                            M_bound=self.M_bound)


@dataclass(frozen=True)
class Dithers:
    d_x: np.ndarray  # (L, T, n)
    d_u: np.ndarray  # (L, T, m)


@dataclass(frozen=True)
class DataBatches:
    """Columnwise deviations of L perturbed rollouts from the nominal trajectory."""

    dX: np.ndarray      # (T, n, L)
    dU: np.ndarray      # (T, m, L)
    dXp: np.ndarray     # (T, n, L)
    kappas: np.ndarray  # (T,) condition numbers of the stacked Gram matrices

    @property
    def horizon(self):
        return self.dX.shape[0]


def _draw(rng, dist, bound, shape):
    if bound == 0.0:
        return np.zeros(shape)
    if dist == "uniform_zero_to_delta":
        return rng.uniform(0.0, bound, size=shape)
    return rng.uniform(-bound, bound, size=shape)


def generate_dithers(cfg: DitherConfig, n, m, T, iteration, retry=0) -> Dithers:
    """Bounded exploration dithers, deterministic in (seed, iteration, retry)."""
    rng = np.random.default_rng(
        np.random.SeedSequence([int(cfg.seed), int(iteration), int(retry)]))
    d_x = _draw(rng, cfg.dist_x, cfg.delta_x, (cfg.L, T, n))
    d_u = _draw(rng, cfg.dist_u, cfg.delta_u, (cfg.L, T, m))
    return Dithers(d_x=d_x, d_u=d_u)


def run_experiments(traj: Trajectory, policy: FeedbackPolicy,
                    dithers: Dithers, plant_oracle) -> list[Trajectory]:
    """Closed-loop rollouts tracking the dithered references.

    Each experiment perturbs the initial condition with its time-0 state
    dither and feeds dithered (state, input) references to the controller;
    the real input is whatever the controller produces.
    """
    T, n, m = traj.horizon, traj.n, traj.m
    L = dithers.d_x.shape[0]
    if dithers.d_x.shape != (L, T, n) or dithers.d_u.shape != (L, T, m):
        raise DimensionError("dither stacks do not fit the trajectory")
    if policy.horizon != T:
        raise DimensionError("policy and trajectory disagree on horizon")
    perturbed = []
    for i in range(L):
        x = np.zeros((T + 1, n))
        u = np.zeros((T, m))
        x[0] = traj.x_init + dithers.d_x[i, 0]
        for t in range(T):
            u[t] = policy(traj.x[t] + dithers.d_x[i, t],
                          traj.u[t] + dithers.d_u[i, t], x[t], t)
            x[t + 1] = plant_oracle.step(x[t], u[t])
            norm = float(np.linalg.norm(x[t + 1]))
            if not np.isfinite(norm) or norm > 1e6:
                raise DivergenceError(t, norm)
        perturbed.append(Trajectory(x, u, x[0]))
    return perturbed


def build_batches(traj: Trajectory, perturbed: list[Trajectory]) -> DataBatches:
    T, n, m = traj.horizon, traj.n, traj.m
    L = len(perturbed)
    dX = np.zeros((T, n, L))
    dU = np.zeros((T, m, L))
    dXp = np.zeros((T, n, L))
    for i, p in enumerate(perturbed):
        if p.horizon != T or p.n != n or p.m != m:
            raise DimensionError("perturbed trajectory does not match the nominal one")
        dX[:, :, i] = p.x[:-1] - traj.x[:-1]
        dU[:, :, i] = p.u - traj.u
        dXp[:, :, i] = p.x[1:] - traj.x[1:]
    kappas = np.array([gram_condition(dX[t], dU[t]) for t in range(T)])
    return DataBatches(dX=dX, dU=dU, dXp=dXp, kappas=kappas)


def gram_condition(dX_t, dU_t) -> float:
    """Condition number of [dX; dU] [dX; dU]' (inf when rank-deficient)."""
    F = np.vstack([dX_t, dU_t])
    eigs = np.linalg.eigvalsh(F @ F.T)
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo <= 0.0 or not np.isfinite(hi) or hi == 0.0:
        return KAPPA_INF
    return hi / lo


def identify_ltv(batches: DataBatches, cfg: DitherConfig) -> LtvModel:
    """Least-squares fit [A_t B_t] = dXp_t pinv([dX_t; dU_t]) at every step.

    The pseudoinverse is realized through the Gram normal equations, which is
    safe here because the condition-number gate bounds kappa before inversion.
    """
    T, n = batches.dX.shape[0], batches.dX.shape[1]
    m = batches.dU.shape[1]
    A = np.zeros((T, n, n))
    B = np.zeros((T, n, m))
    for t in range(T):
        kappa = batches.kappas[t]
        if not np.isfinite(kappa) or kappa > cfg.M_bound:
            raise IllConditioned(t, kappa)
        F = np.vstack([batches.dX[t], batches.dU[t]])
        AB = np.linalg.solve(F @ F.T, F @ batches.dXp[t].T).T
        A[t] = AB[:, :n]
        B[t] = AB[:, n:]
    return LtvModel(A, B, "identified")


def identify_about(traj: Trajectory, policy: FeedbackPolicy, cfg: DitherConfig,
                   plant_oracle, iteration: int):
    """Full learning step with resampling on ill-conditioned batches.

    Returns (model, batches); raises :class:`IllConditioned` once retries are
    exhausted.
    """
    if cfg.L < traj.n + traj.m:
        raise ValueError(f"L = {cfg.L} experiments cannot excite n + m = "
                         f"{traj.n + traj.m} directions")
    last_error = None
    for retry in range(cfg.max_retries + 1):
        dithers = generate_dithers(cfg, traj.n, traj.m, traj.horizon,
                                   iteration, retry)
        perturbed = run_experiments(traj, policy, dithers, plant_oracle)
        batches = build_batches(traj, perturbed)
        try:
            return identify_ltv(batches, cfg), batches
        except IllConditioned as err:
            last_error = err
    raise last_error
