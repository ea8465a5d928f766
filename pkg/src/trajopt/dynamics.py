"""Plant models, rollout machinery, and the trajectory/curve data model.

The optimizer only ever sees a :class:`RolloutOracle`, which exposes the
plant through closed-loop stepping alone.  Jacobian access (exact or
finite-difference) lives on the plant objects themselves and is reserved
for model-based runs and the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81
DEFAULT_FD_STEP = 1e-5


class DimensionError(ValueError):
    """Raised when stacked state/input data do not fit the plant."""


def _as_matrix(a, rows, cols, name):
    a = np.asarray(a, dtype=float)
    if a.shape != (rows, cols):
        raise DimensionError(f"{name}: expected shape {(rows, cols)}, got {a.shape}")
    return a


@dataclass(frozen=True)
class Curve:
    """A state/input stack pair, not required to be dynamically feasible."""

    alpha: np.ndarray  # (T+1, n)
    mu: np.ndarray     # (T, m)
    x_init: np.ndarray # (n,)

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        x_init = np.atleast_1d(np.asarray(self.x_init, dtype=float))
        if alpha.ndim != 2 or mu.ndim != 2:
            raise DimensionError("alpha and mu must be 2-d stacks")
        if alpha.shape[0] != mu.shape[0] + 1:
            raise DimensionError(
                f"alpha has {alpha.shape[0]} rows, expected {mu.shape[0] + 1}")
        if alpha.shape[1] != x_init.shape[0]:
            raise DimensionError("alpha and x_init disagree on state dimension")
        for a in (alpha, mu, x_init):
            a.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "x_init", x_init)

    @property
    def horizon(self):
        return self.mu.shape[0]

    @property
    def n(self):
        return self.alpha.shape[1]

    @property
    def m(self):
        return self.mu.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """A curve that satisfies the plant recursion from ``x_init``.

    Feasibility is not enforced at construction (it depends on the plant);
    use :func:`residual` to check it.
    """

    x: np.ndarray      # (T+1, n)
    u: np.ndarray      # (T, m)
    x_init: np.ndarray # (n,)

    def __post_init__(self):
        c = Curve(self.x, self.u, self.x_init)
        object.__setattr__(self, "x", c.alpha)
        object.__setattr__(self, "u", c.mu)
        object.__setattr__(self, "x_init", c.x_init)

    @property
    def horizon(self):
        return self.u.shape[0]

    @property
    def n(self):
        return self.x.shape[1]

    @property
    def m(self):
        return self.u.shape[1]

    def as_curve(self) -> Curve:
        return Curve(self.x, self.u, self.x_init)


@dataclass(frozen=True)
class LtvModel:
    """Per-step linearization stacks about a trajectory."""

    A: np.ndarray  # (T, n, n)
    B: np.ndarray  # (T, n, m)
    source: str    # "exact" | "finite-difference" | "identified"

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 3 or B.ndim != 3 or A.shape[0] != B.shape[0]:
            raise DimensionError("A and B must be (T, ., .) stacks of equal length")
        if A.shape[1] != A.shape[2] or B.shape[1] != A.shape[1]:
            raise DimensionError("inconsistent model dimensions")
        if self.source not in ("exact", "finite-difference", "identified"):
            raise ValueError(f"unknown model source {self.source!r}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def horizon(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.B.shape[2]


@dataclass(frozen=True)
class PendubotParams:
    """Physical parameters of the two-link pendubot (torque on joint 1 only)."""

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    d1: float = 0.5
    d2: float = 0.5
    I1zz: float = 0.33
    I2zz: float = 0.33
    f1: float = 0.1
    f2: float = 0.1
    g: float = GRAVITY
    dt: float = 0.01

    def __post_init__(self):
        for name in ("m1", "m2", "l1", "l2", "d1", "d2", "I1zz", "I2zz", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    # lumped coefficients of the manipulator equations
    @property
    def a1(self):
        return self.I1zz + self.m1 * self.d1 ** 2 + self.m2 * self.l1 ** 2

    @property
    def a2(self):
        return self.I2zz + self.m2 * self.d2 ** 2

    @property
    def a3(self):
        return self.m2 * self.l1 * self.d2

    @property
    def a4(self):
        return self.g * (self.m1 * self.d1 + self.m2 * self.l1)

    @property
    def a5(self):
        return self.g * self.m2 * self.d2


class Pendubot:
    """Forward-Euler discretization of the pendubot, state (q1, q2, q1d, q2d)."""

    n = 4
    m = 1

    def __init__(self, params: PendubotParams | None = None):
        self.params = params or PendubotParams()

    def inertia(self, q2: float) -> np.ndarray:
        p = self.params
        c2 = np.cos(q2)
        return np.array([
            [p.a1 + p.a2 + 2 * p.a3 * c2, p.a2 + p.a3 * c2],
            [p.a2 + p.a3 * c2, p.a2],
        ])

    def derivative(self, state, inp) -> np.ndarray:
        """Continuous-time state derivative (q1d, q2d, q1dd, q2dd)."""
        p = self.params
        q1, q2, qd1, qd2 = np.asarray(state, dtype=float)
        u = float(np.atleast_1d(inp)[0])
        s2 = np.sin(q2)
        # C(q, qd) qd lumps Coriolis and centrifugal forces
        coriolis = p.a3 * s2 * np.array([-(2 * qd1 * qd2 + qd2 ** 2), qd1 ** 2])
        friction = np.array([p.f1 * qd1, p.f2 * qd2])
        gravity = np.array([
            p.a4 * np.cos(q1) + p.a5 * np.cos(q1 + q2),
            p.a5 * np.cos(q1 + q2),
        ])
        rhs = np.array([u, 0.0]) - coriolis - friction - gravity
        qdd = _solve2x2(self.inertia(q2), rhs)
        return np.array([qd1, qd2, qdd[0], qdd[1]])

    def step(self, state, inp) -> np.ndarray:
        return np.asarray(state, dtype=float) + self.params.dt * self.derivative(state, inp)

    def jacobian_step(self, state, inp):
        """Exact Jacobians (A, B) of the Euler-discretized dynamics."""
        p = self.params
        q1, q2, qd1, qd2 = np.asarray(state, dtype=float)
        u = float(np.atleast_1d(inp)[0])
        s2, c2 = np.sin(q2), np.cos(q2)
        s1 = np.sin(q1)
        s12 = np.sin(q1 + q2)

        M = self.inertia(q2)
        coriolis = p.a3 * s2 * np.array([-(2 * qd1 * qd2 + qd2 ** 2), qd1 ** 2])
        friction = np.array([p.f1 * qd1, p.f2 * qd2])
        gravity = np.array([p.a4 * np.cos(q1) + p.a5 * np.cos(q1 + q2),
                            p.a5 * np.cos(q1 + q2)])
        qdd = _solve2x2(M, np.array([u, 0.0]) - coriolis - friction - gravity)

        dG_dq1 = np.array([-p.a4 * s1 - p.a5 * s12, -p.a5 * s12])
        dG_dq2 = np.array([-p.a5 * s12, -p.a5 * s12])
        dCqd_dq2 = p.a3 * c2 * np.array([-(2 * qd1 * qd2 + qd2 ** 2), qd1 ** 2])
        dM_dq2 = np.array([[-2 * p.a3 * s2, -p.a3 * s2], [-p.a3 * s2, 0.0]])
        dCqd_dqd1 = p.a3 * s2 * np.array([-2 * qd2, 2 * qd1])
        dCqd_dqd2 = p.a3 * s2 * np.array([-2 * (qd1 + qd2), 0.0])

        dqdd = np.zeros((2, 5))  # columns: q1, q2, qd1, qd2, u
        dqdd[:, 0] = _solve2x2(M, -dG_dq1)
        dqdd[:, 1] = _solve2x2(M, -dM_dq2 @ qdd - dCqd_dq2 - dG_dq2)
        dqdd[:, 2] = _solve2x2(M, -dCqd_dqd1 - np.array([p.f1, 0.0]))
        dqdd[:, 3] = _solve2x2(M, -dCqd_dqd2 - np.array([0.0, p.f2]))
        dqdd[:, 4] = _solve2x2(M, np.array([1.0, 0.0]))

        Ac = np.zeros((4, 4))
        Ac[0, 2] = 1.0
        Ac[1, 3] = 1.0
        Ac[2:, :] = dqdd[:, :4]
        A = np.eye(4) + p.dt * Ac
        B = p.dt * np.concatenate([np.zeros(2), dqdd[:, 4]]).reshape(4, 1)
        return A, B


def _solve2x2(M, b):
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return np.array([
        (M[1, 1] * b[0] - M[0, 1] * b[1]) / det,
        (M[0, 0] * b[1] - M[1, 0] * b[0]) / det,
    ])


class LinearPlant:
    """LTI test plant x+ = A x + B u."""

    def __init__(self, A, B):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionError("LinearPlant: incompatible (A, B)")
        self.A = A
        self.B = B
        self.n = A.shape[0]
        self.m = B.shape[1]

    def step(self, state, inp):
        return self.A @ np.asarray(state, dtype=float) + self.B @ np.atleast_1d(inp)

    def jacobian_step(self, state, inp):
        return self.A.copy(), self.B.copy()


class CubicPlant:
    """Scalar plant x+ = x + dt * (-x^3 + u), cheap nonlinear test case."""

    n = 1
    m = 1

    def __init__(self, dt=0.1):
        if dt <= 0:
            raise ValueError("dt must be strictly positive")
        self.dt = dt

    def step(self, state, inp):
        x = float(np.atleast_1d(state)[0])
        u = float(np.atleast_1d(inp)[0])
        return np.array([x + self.dt * (-x ** 3 + u)])

    def jacobian_step(self, state, inp):
        x = float(np.atleast_1d(state)[0])
        A = np.array([[1.0 + self.dt * (-3.0 * x ** 2)]])
        B = np.array([[self.dt]])
        return A, B


class RolloutOracle:
    """Restricted plant view: stepping only, no derivative information.

    Model-free code paths receive this wrapper instead of the plant, so the
    no-Jacobian contract is enforced by the API rather than by convention.
    """

    def __init__(self, plant):
        self._plant = plant
        self.n = plant.n
        self.m = plant.m
        self.step_calls = 0

    def step(self, state, inp):
        self.step_calls += 1
        return self._plant.step(state, inp)


def rollout_open_loop(x_init, u_stack, plant) -> Trajectory:
    """Integrate the plant recursion under a fixed input stack."""
    x_init = np.atleast_1d(np.asarray(x_init, dtype=float))
    u_stack = np.atleast_2d(np.asarray(u_stack, dtype=float))
    if x_init.shape[0] != plant.n or u_stack.shape[1] != plant.m:
        raise DimensionError("rollout_open_loop: inputs do not fit the plant")
    T = u_stack.shape[0]
    x = np.zeros((T + 1, plant.n))
    x[0] = x_init
    for t in range(T):
        x[t + 1] = plant.step(x[t], u_stack[t])
    return Trajectory(x, u_stack, x_init)


def residual(candidate, plant) -> float:
    """Max dynamics defect of a curve/trajectory; zero iff it is a trajectory."""
    x, u = stacks(candidate)
    worst = float(np.linalg.norm(x[0] - candidate.x_init))
    for t in range(u.shape[0]):
        defect = np.linalg.norm(x[t + 1] - plant.step(x[t], u[t]))
        worst = max(worst, float(defect))
    return worst


def stacks(obj):
    """Return the (state stack, input stack) of a Trajectory or Curve."""
    if hasattr(obj, "x"):
        return obj.x, obj.u
    return obj.alpha, obj.mu


def jacobians(trajectory: Trajectory, plant, mode="exact",
              h_fd=DEFAULT_FD_STEP) -> LtvModel:
    """Per-step Jacobian stacks about a trajectory (privileged test oracle).

    Exact mode requires the plant to provide analytic Jacobians;
    finite-difference mode uses central differences of ``plant.step``.
    """
    T, n, m = trajectory.horizon, trajectory.n, trajectory.m
    A = np.zeros((T, n, n))
    B = np.zeros((T, n, m))
    if mode == "exact":
        if not hasattr(plant, "jacobian_step"):
            raise ValueError("plant has no analytic Jacobians; use finite-difference")
        for t in range(T):
            A[t], B[t] = plant.jacobian_step(trajectory.x[t], trajectory.u[t])
        return LtvModel(A, B, "exact")
    if mode == "finite-difference":
        for t in range(T):
            A[t], B[t] = _fd_jacobian(plant, trajectory.x[t], trajectory.u[t], h_fd)
        return LtvModel(A, B, "finite-difference")
    raise ValueError(f"unknown Jacobian mode {mode!r}")


def curvature_stack(trajectory: Trajectory, lam, plant, h=DEFAULT_FD_STEP):
    """Adjoint-weighted second derivatives of the step map along a trajectory.

    Returns per-step blocks (Gxx, Gxu, Guu) of the Hessian of
    lam_{t+1}' f(x, u) at (x_t, u_t), computed by central differences of the
    plant's analytic Jacobians.  Requires the Jacobian oracle, so this is
    available to the model-based path only.
    """
    if not hasattr(plant, "jacobian_step"):
        raise ValueError("plant has no analytic Jacobians; curvature unavailable")
    T, n, m = trajectory.horizon, trajectory.n, trajectory.m
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (T + 1, n):
        raise DimensionError("adjoint stack must be (T+1, n)")
    Gxx = np.zeros((T, n, n))
    Gxu = np.zeros((T, n, m))
    Guu = np.zeros((T, m, m))
    for t in range(T):
        lamp = lam[t + 1]
        x, u = trajectory.x[t], trajectory.u[t]

        def grad(xp, up):
            A, B = plant.jacobian_step(xp, up)
            return np.concatenate([A.T @ lamp, B.T @ lamp])

        G = np.zeros((n + m, n + m))
        for i in range(n + m):
            dx = np.zeros(n)
            du = np.zeros(m)
            if i < n:
                dx[i] = h
            else:
                du[i - n] = h
            G[:, i] = (grad(x + dx, u + du) - grad(x - dx, u - du)) / (2 * h)
        G = 0.5 * (G + G.T)
        Gxx[t] = G[:n, :n]
        Gxu[t] = G[:n, n:]
        Guu[t] = G[n:, n:]
    return Gxx, Gxu, Guu


def _fd_jacobian(plant, x, u, h):
    n, m = x.shape[0], np.atleast_1d(u).shape[0]
    A = np.zeros((n, n))
    B = np.zeros((n, m))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        A[:, i] = (plant.step(x + e, u) - plant.step(x - e, u)) / (2 * h)
    u = np.atleast_1d(u)
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        B[:, j] = (plant.step(x, u + e) - plant.step(x, u - e)) / (2 * h)
    return A, B
