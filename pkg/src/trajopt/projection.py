"""Tracking controller and the projection of curves onto the trajectory manifold."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Curve, DimensionError, LtvModel, Trajectory

BLOWUP_BOUND = 1e6


class DivergenceError(RuntimeError):
    def __init__(self, t, norm):
        super().__init__(f"closed-loop rollout diverged at t={t} (|x| = {norm:.3e})")
        self.t = t
        self.norm = norm


@dataclass(frozen=True)
class FeedbackPolicy:
    """Time-varying linear tracking law u = mu + K_t (alpha - x).

    Evaluating the policy at x = alpha returns mu exactly, so projecting a
    trajectory reproduces it.
    """

    K: np.ndarray  # (T, m, n)

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 3:
            raise DimensionError("gain stack must be (T, m, n)")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def horizon(self):
        return self.K.shape[0]

    def __call__(self, alpha_t, mu_t, x_t, t) -> np.ndarray:
        return np.atleast_1d(mu_t) + self.K[t] @ (np.asarray(alpha_t) - np.asarray(x_t))

    @classmethod
    def zero(cls, T, n, m) -> "FeedbackPolicy":
        return cls(np.zeros((T, m, n)))


def synthesize_policy(model: LtvModel, reg_Q, reg_R) -> FeedbackPolicy:
    """Finite-horizon LQR gains about the model, terminal weight reg_Q."""
    reg_Q = np.atleast_2d(np.asarray(reg_Q, dtype=float))
    reg_R = np.atleast_2d(np.asarray(reg_R, dtype=float))
    T, n, m = model.horizon, model.n, model.m
    if reg_Q.shape != (n, n) or reg_R.shape != (m, m):
        raise DimensionError("regulator weights do not fit the model")
    K = np.zeros((T, m, n))
    P = reg_Q.copy()
    for t in reversed(range(T)):
        A, B = model.A[t], model.B[t]
        BtP = B.T @ P
        K[t] = np.linalg.solve(reg_R + BtP @ B, BtP @ A)
        P = reg_Q + A.T @ P @ A - (BtP @ A).T @ K[t]
        P = 0.5 * (P + P.T)
    return FeedbackPolicy(K)


def project(curve: Curve, policy: FeedbackPolicy, plant_oracle,
            blowup_bound=BLOWUP_BOUND) -> Trajectory:
    """Closed-loop rollout tracking the curve; always returns a feasible trajectory."""
    T = curve.horizon
    if policy.horizon != T:
        raise DimensionError("policy and curve disagree on horizon")
    if curve.n != plant_oracle.n or curve.m != plant_oracle.m:
        raise DimensionError("curve does not fit the plant")
    x = np.zeros((T + 1, curve.n))
    u = np.zeros((T, curve.m))
    x[0] = curve.x_init
    for t in range(T):
        u[t] = policy(curve.alpha[t], curve.mu[t], x[t], t)
        x[t + 1] = plant_oracle.step(x[t], u[t])
        norm = float(np.linalg.norm(x[t + 1]))
        if not np.isfinite(norm) or norm > blowup_bound:
            raise DivergenceError(t, norm)
    return Trajectory(x, u, curve.x_init)
