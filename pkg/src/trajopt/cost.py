"""Quadratic tracking cost, its exact derivative stacks, and the DARE terminal weight."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DimensionError, stacks

DARE_TOL = 1e-10
MAX_DARE_ITERS = 10000


class DareError(RuntimeError):
    """Raised when the Riccati fixed-point iteration fails to converge."""


def _check_spd(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.allclose(M, M.T):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return M


@dataclass(frozen=True)
class TrackingCost:
    """Sum of quadratic stage penalties about a reference curve, plus a terminal term.

    total = sum_t (x_t - x*_t)' Q (x_t - x*_t) + (u_t - u*_t)' R (u_t - u*_t)
            + (x_T - x*_T)' Q_T (x_T - x*_T)
    """

    Q: np.ndarray
    R: np.ndarray
    Q_T: np.ndarray
    x_ref: np.ndarray  # (T+1, n)
    u_ref: np.ndarray  # (T, m)

    def __post_init__(self):
        Q = _check_spd(self.Q, "Q")
        R = _check_spd(self.R, "R")
        Q_T = _check_spd(self.Q_T, "Q_T")
        x_ref = np.atleast_2d(np.asarray(self.x_ref, dtype=float))
        u_ref = np.atleast_2d(np.asarray(self.u_ref, dtype=float))
        if x_ref.shape[0] != u_ref.shape[0] + 1:
            raise DimensionError("x_ref must have one more row than u_ref")
        if x_ref.shape[1] != Q.shape[0] or u_ref.shape[1] != R.shape[0]:
            raise DimensionError("reference dimensions do not match the weights")
        if Q_T.shape != Q.shape:
            raise DimensionError("Q_T must have the same shape as Q")
        for a in (Q, R, Q_T, x_ref, u_ref):
            a.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Q_T", Q_T)
        object.__setattr__(self, "x_ref", x_ref)
        object.__setattr__(self, "u_ref", u_ref)

    @property
    def horizon(self):
        return self.u_ref.shape[0]


@dataclass(frozen=True)
class QuadDerivStack:
    """Per-step cost gradients and Hessian blocks along a trajectory.

    ``q`` has T+1 rows (terminal gradient included); the blockwise Hessian
    [[Qh_t, S_t], [S_t', Rh_t]] must be positive definite at every step.
    """

    q: np.ndarray   # (T+1, n)
    r: np.ndarray   # (T, m)
    Qh: np.ndarray  # (T, n, n)
    S: np.ndarray   # (T, n, m)
    Rh: np.ndarray  # (T, m, m)
    QT: np.ndarray  # (n, n)

    @property
    def horizon(self):
        return self.r.shape[0]

    @property
    def n(self):
        return self.q.shape[1]

    @property
    def m(self):
        return self.r.shape[1]


def total_cost(traj_or_curve, cost: TrackingCost) -> float:
    x, u = stacks(traj_or_curve)
    if x.shape != cost.x_ref.shape or u.shape != cost.u_ref.shape:
        raise DimensionError("trajectory does not match the cost reference")
    ex = x - cost.x_ref
    eu = u - cost.u_ref
    stage = np.einsum("ti,ij,tj->", ex[:-1], cost.Q, ex[:-1])
    stage += np.einsum("ti,ij,tj->", eu, cost.R, eu)
    terminal = ex[-1] @ cost.Q_T @ ex[-1]
    return float(stage + terminal)


def derivative_stack(traj_or_curve, cost: TrackingCost) -> QuadDerivStack:
    """Exact gradient/Hessian stacks of :func:`total_cost` (no 1/2 convention)."""
    x, u = stacks(traj_or_curve)
    if x.shape != cost.x_ref.shape or u.shape != cost.u_ref.shape:
        raise DimensionError("trajectory does not match the cost reference")
    T, n = cost.horizon, cost.Q.shape[0]
    m = cost.R.shape[0]
    q = np.zeros((T + 1, n))
    q[:-1] = 2.0 * (x[:-1] - cost.x_ref[:-1]) @ cost.Q
    q[-1] = 2.0 * cost.Q_T @ (x[-1] - cost.x_ref[-1])
    r = 2.0 * (u - cost.u_ref) @ cost.R
    Qh = np.broadcast_to(2.0 * cost.Q, (T, n, n)).copy()
    Rh = np.broadcast_to(2.0 * cost.R, (T, m, m)).copy()
    S = np.zeros((T, n, m))
    return QuadDerivStack(q=q, r=r, Qh=Qh, S=S, Rh=Rh, QT=2.0 * cost.Q_T)


def terminal_weight_dare(A_eq, B_eq, Q, R, tol=DARE_TOL,
                         max_iters=MAX_DARE_ITERS) -> np.ndarray:
    """Fixed point of the discrete-time algebraic Riccati equation.

    Iterates the Riccati difference equation backward from P = Q until the
    update stalls below ``tol``; adequate at the small state dimensions used
    here.
    """
    A = np.atleast_2d(np.asarray(A_eq, dtype=float))
    B = np.asarray(B_eq, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    Q = _check_spd(Q, "Q")
    R = _check_spd(R, "R")
    P = Q.copy()
    for _ in range(max_iters):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = A.T @ P @ A - (BtP @ A).T @ K + Q
        P_next = 0.5 * (P_next + P_next.T)
        if np.max(np.abs(P_next - P)) <= tol:
            return P_next
        P = P_next
    raise DareError(f"DARE fixed point not reached in {max_iters} iterations")


def step_reference(start_state, end_state, step_time, dt, T):
    """Step reference: ``start_state`` before ``step_time`` seconds, ``end_state`` after."""
    start = np.atleast_1d(np.asarray(start_state, dtype=float))
    end = np.atleast_1d(np.asarray(end_state, dtype=float))
    if start.shape != end.shape:
        raise DimensionError("start and end states must have equal dimension")
    x_ref = np.tile(start, (T + 1, 1))
    k_step = int(round(step_time / dt))
    x_ref[min(max(k_step, 0), T):] = end
    return x_ref
