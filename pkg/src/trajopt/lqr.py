"""Descent-direction subproblem: affine time-varying LQR.

The production path is a backward Riccati recursion with affine terms;
:func:`solve_descent_kkt` assembles the equivalent dense equality-constrained
QP and solves its KKT system, serving as an independent correctness oracle.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cost import QuadDerivStack
from .dynamics import DimensionError, LtvModel

HESSIAN_REG_EPS = 1e-8


class HessianNotPositiveDefinite(RuntimeError):
    def __init__(self, t):
        super().__init__(f"stage Hessian block at t={t} is not positive definite")
        self.t = t


@dataclass(frozen=True)
class DescentDirection:
    """Solution of the time-varying LQR subproblem.

    ``dg`` is the predicted cost differential q'dx + r'du along the solution;
    ``gains``/``feedforward`` reproduce du_t = -gains_t @ dx_t + feedforward_t
    (absent for the dense KKT solver).
    """

    dx: np.ndarray  # (T+1, n)
    du: np.ndarray  # (T, m)
    dg: float
    gains: np.ndarray | None = None        # (T, m, n)
    feedforward: np.ndarray | None = None  # (T, m)


def _check_sizes(model: LtvModel, derivs: QuadDerivStack):
    if model.horizon != derivs.horizon:
        raise DimensionError("model and derivative stacks disagree on horizon")
    if model.n != derivs.n or model.m != derivs.m:
        raise DimensionError("model and derivative stacks disagree on dimensions")


def _stage_hessians(derivs: QuadDerivStack):
    """Validate blockwise positive definiteness, regularizing once if needed."""
    T = derivs.horizon
    Qh = derivs.Qh.copy()
    S = derivs.S.copy()
    Rh = derivs.Rh.copy()
    n, m = derivs.n, derivs.m
    for t in range(T):
        block = np.block([[Qh[t], S[t]], [S[t].T, Rh[t]]])
        try:
            np.linalg.cholesky(block)
            continue
        except np.linalg.LinAlgError:
            pass
        warnings.warn(f"regularizing stage Hessian at t={t} "
                      f"(+{HESSIAN_REG_EPS:g} I)", stacklevel=3)
        Qh[t] = Qh[t] + HESSIAN_REG_EPS * np.eye(n)
        Rh[t] = Rh[t] + HESSIAN_REG_EPS * np.eye(m)
        block = np.block([[Qh[t], S[t]], [S[t].T, Rh[t]]])
        try:
            np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            raise HessianNotPositiveDefinite(t) from None
    return Qh, S, Rh


def dg_of(derivs: QuadDerivStack, dx, du) -> float:
    """Predicted cost differential of a candidate direction."""
    return float(np.sum(derivs.q * dx) + np.sum(derivs.r * du))


def solve_descent_riccati(model: LtvModel, derivs: QuadDerivStack,
                          convexity: str = "blockwise") -> DescentDirection:
    """Unique minimizer of the descent QP via backward Riccati recursion.

    ``convexity="blockwise"`` demands positive definite stage Hessian blocks
    up front (regularizing once).  ``convexity="recursion"`` admits indefinite
    stage blocks and instead verifies the recursion's input Hessians Huu are
    positive definite, which is exactly the condition for the QP to have a
    unique minimizer on the feasible subspace; it is used for the
    curvature-corrected subproblem whose state blocks need not be PD.
    """
    _check_sizes(model, derivs)
    if convexity not in ("blockwise", "recursion"):
        raise ValueError(f"unknown convexity mode {convexity!r}")
    T, n, m = model.horizon, model.n, model.m
    if convexity == "blockwise":
        Qh, S, Rh = _stage_hessians(derivs)
    else:
        Qh, S, Rh = derivs.Qh, derivs.S, derivs.Rh

    K = np.zeros((T, m, n))
    kff = np.zeros((T, m))
    P = derivs.QT.copy()
    p = derivs.q[-1].copy()
    for t in reversed(range(T)):
        A, B = model.A[t], model.B[t]
        Huu = Rh[t] + B.T @ P @ B
        try:
            np.linalg.cholesky(Huu)
        except np.linalg.LinAlgError:
            raise HessianNotPositiveDefinite(t) from None
        Hxu = S[t] + A.T @ P @ B
        hu = derivs.r[t] + B.T @ p
        K[t] = np.linalg.solve(Huu, Hxu.T)
        kff[t] = -np.linalg.solve(Huu, hu)
        P = Qh[t] + A.T @ P @ A - Hxu @ K[t]
        P = 0.5 * (P + P.T)
        p = derivs.q[t] + A.T @ p + Hxu @ kff[t]

    dx = np.zeros((T + 1, n))
    du = np.zeros((T, m))
    for t in range(T):
        du[t] = -K[t] @ dx[t] + kff[t]
        dx[t + 1] = model.A[t] @ dx[t] + model.B[t] @ du[t]
    return DescentDirection(dx=dx, du=du, dg=dg_of(derivs, dx, du),
                            gains=K, feedforward=kff)


def constraint_matrix(model: LtvModel) -> np.ndarray:
    """Dense constraint matrix [H_x H_u] of the linearized dynamics.

    Variables are ordered (dx_0, ..., dx_T, du_0, ..., du_{T-1}); the first
    block row pins dx_0 = 0 and H_x is unit lower block-bidiagonal.
    """
    T, n, m = model.horizon, model.n, model.m
    sx, su = n * (T + 1), m * T
    H = np.zeros((sx, sx + su))
    H[:n, :n] = np.eye(n)
    for t in range(T):
        r = (t + 1) * n
        H[r:r + n, r:r + n] = np.eye(n)
        H[r:r + n, t * n:(t + 1) * n] = -model.A[t]
        H[r:r + n, sx + t * m:sx + (t + 1) * m] = -model.B[t]
    return H


def solve_descent_kkt(model: LtvModel, derivs: QuadDerivStack) -> DescentDirection:
    """Dense KKT oracle for the descent QP; intended for validation at small sizes."""
    _check_sizes(model, derivs)
    T, n, m = model.horizon, model.n, model.m
    Qh, S, Rh = _stage_hessians(derivs)
    sx, su = n * (T + 1), m * T
    s = sx + su

    hess = np.zeros((s, s))
    grad = np.zeros(s)
    for t in range(T):
        hess[t * n:(t + 1) * n, t * n:(t + 1) * n] = Qh[t]
        hess[t * n:(t + 1) * n, sx + t * m:sx + (t + 1) * m] = S[t]
        hess[sx + t * m:sx + (t + 1) * m, t * n:(t + 1) * n] = S[t].T
        hess[sx + t * m:sx + (t + 1) * m, sx + t * m:sx + (t + 1) * m] = Rh[t]
        grad[t * n:(t + 1) * n] = derivs.q[t]
        grad[sx + t * m:sx + (t + 1) * m] = derivs.r[t]
    hess[T * n:sx, T * n:sx] = derivs.QT
    grad[T * n:sx] = derivs.q[-1]

    H = constraint_matrix(model)
    kkt = np.block([[hess, H.T], [H, np.zeros((sx, sx))]])
    rhs = np.concatenate([-grad, np.zeros(sx)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        raise RuntimeError("singular KKT matrix (LICQ/PD contract violated)") from None
    zeta = sol[:s]
    dx = zeta[:sx].reshape(T + 1, n)
    du = zeta[sx:].reshape(T, m)
    return DescentDirection(dx=dx, du=du, dg=dg_of(derivs, dx, du))
