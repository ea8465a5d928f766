import numpy as np
import pytest

from conftest import random_stable_lti
from trajopt import (CubicPlant, DitherConfig, FeedbackPolicy, RolloutOracle,
                     SolverConfig, SolverError, Trajectory,
                     data_driven_step, dither_sweep, model_based_step,
                     reference_optimum, rollout_open_loop, run,
                     trajectory_distance, total_cost)
from trajopt.cost import TrackingCost, terminal_weight_dare
from trajopt.optimizer import DATA_DRIVEN, MODEL_BASED, _adjoint
from trajopt.dynamics import LtvModel, jacobians


def cubic_problem(T=30):
    """Scalar regulation problem: drive x+ = x + dt(-x^3 + u) to 0.5."""
    plant = CubicPlant(dt=0.1)
    x_ref = np.full((T + 1, 1), 0.5)
    u_ref = np.full((T, 1), 0.125)  # equilibrium input at x = 0.5
    A, B = plant.jacobian_step([0.5], [0.125])
    Q = np.array([[1.0]])
    R = np.array([[0.1]])
    cost = TrackingCost(Q=Q, R=R, Q_T=terminal_weight_dare(A, B, Q, R),
                        x_ref=x_ref, u_ref=u_ref)
    initial = rollout_open_loop([0.0], np.zeros((T, 1)), plant)
    return plant, cost, initial


def lti_problem(rng, T=20):
    plant = random_stable_lti(rng)
    x_ref = np.zeros((T + 1, 3))
    u_ref = np.zeros((T, 2))
    cost = TrackingCost(Q=np.eye(3), R=np.eye(2), Q_T=2.0 * np.eye(3),
                        x_ref=x_ref, u_ref=u_ref)
    initial = rollout_open_loop(rng.standard_normal(3), np.zeros((T, 2)), plant)
    return plant, cost, initial


class TestSolverConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="mode"):
            SolverConfig(mode="hybrid")
        with pytest.raises(ValueError, match="gamma"):
            SolverConfig(gamma=0.0)
        with pytest.raises(ValueError, match="gamma"):
            SolverConfig(gamma=1.5)
        with pytest.raises(ValueError, match="max_iters"):
            SolverConfig(max_iters=-1)
        with pytest.raises(ValueError, match="dg_tol"):
            SolverConfig(dg_tol=0.0)
        with pytest.raises(ValueError, match="curvature_switch"):
            SolverConfig(curvature_switch=-1.0)

    def test_stop_tolerance_defaults(self):
        assert SolverConfig(mode=MODEL_BASED).stop_tol == 1e-8
        assert SolverConfig(mode=DATA_DRIVEN).stop_tol == 1e-4
        assert SolverConfig(dg_tol=1e-3).stop_tol == 1e-3


class TestAdjoint:
    def test_one_step_recursion(self, rng):
        from trajopt.cost import QuadDerivStack
        A = rng.standard_normal((1, 2, 2))
        model = LtvModel(A, rng.standard_normal((1, 2, 1)), "exact")
        q = rng.standard_normal((2, 2))
        derivs = QuadDerivStack(q=q, r=np.zeros((1, 1)),
                                Qh=np.zeros((1, 2, 2)), S=np.zeros((1, 2, 1)),
                                Rh=np.zeros((1, 1, 1)), QT=np.zeros((2, 2)))
        lam = _adjoint(model, derivs)
        assert np.allclose(lam[1], q[1])
        assert np.allclose(lam[0], q[0] + A[0].T @ q[1])


class TestModelBasedStep:
    def test_descends_on_cubic(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=MODEL_BASED)
        new, rec = model_based_step(initial, plant, cost, cfg)
        assert rec.dg < 0
        assert rec.cost < total_cost(initial, cost)

    def test_curvature_switch_zero_still_converges(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=MODEL_BASED, curvature_switch=0.0, max_iters=30)
        records, _ = run(cfg, plant, cost, initial)
        assert abs(records[-1].dg) <= cfg.stop_tol

    def test_regulator_weights_must_come_in_pairs(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=MODEL_BASED, reg_Q=np.eye(1))
        with pytest.raises(ValueError, match="together"):
            model_based_step(initial, plant, cost, cfg)

    def test_explicit_regulator_weights_accepted(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=MODEL_BASED, reg_Q=np.eye(1),
                           reg_R=0.1 * np.eye(1))
        _, rec = model_based_step(initial, plant, cost, cfg)
        assert rec.dg < 0


class TestRun:
    def test_converges_on_cubic(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=MODEL_BASED, max_iters=30)
        records, final = run(cfg, plant, cost, initial)
        assert abs(records[-1].dg) <= 1e-8
        assert len(records) < 30
        assert abs(final.x[-1, 0] - 0.5) < 1e-3

    def test_dg_nonpositive_every_model_based_iteration(self):
        plant, cost, initial = cubic_problem()
        records, _ = run(SolverConfig(mode=MODEL_BASED, max_iters=30),
                         plant, cost, initial)
        assert all(r.dg <= 0 for r in records)

    def test_costs_decrease_monotonically_on_cubic(self):
        plant, cost, initial = cubic_problem()
        records, _ = run(SolverConfig(mode=MODEL_BASED, max_iters=30),
                         plant, cost, initial)
        costs = [total_cost(initial, cost)] + [r.cost for r in records]
        assert all(b < a + 1e-12 for a, b in zip(costs, costs[1:]))

    def test_data_driven_run_is_deterministic(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=DATA_DRIVEN, max_iters=8,
                           dither=DitherConfig(seed=5))
        rec_a, final_a = run(cfg, plant, cost, initial)
        rec_b, final_b = run(cfg, plant, cost, initial)
        assert [r.dg for r in rec_a] == [r.dg for r in rec_b]
        assert np.array_equal(final_a.x, final_b.x)

    def test_data_driven_tracks_model_based_on_lti(self, rng):
        plant, cost, initial = lti_problem(rng)
        mb, mb_final = run(SolverConfig(mode=MODEL_BASED, max_iters=10),
                           plant, cost, initial)
        dd, dd_final = run(SolverConfig(mode=DATA_DRIVEN, max_iters=10,
                                        dg_tol=1e-8,
                                        dither=DitherConfig(seed=4)),
                           plant, cost, initial)
        assert trajectory_distance(mb_final, dd_final) < 1e-6

    def test_distance_column_populated_with_reference(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=MODEL_BASED, max_iters=5)
        _, final = run(cfg, plant, cost, initial)
        records, _ = run(cfg, plant, cost, initial, reference=final)
        assert all(np.isfinite(r.dist) for r in records)
        assert records[-1].dist <= records[0].dist

    def test_failure_wrapped_with_partial_log(self):
        plant, cost, initial = cubic_problem()
        # L=1 cannot excite n + m = 2 directions: fails at iteration 0.
        cfg = SolverConfig(mode=DATA_DRIVEN,
                           dither=DitherConfig(L=1))
        with pytest.raises(SolverError) as exc:
            run(cfg, plant, cost, initial)
        assert exc.value.iteration == 0
        assert exc.value.records == []
        assert isinstance(exc.value.cause, ValueError)

    def test_batch_callback_invoked(self):
        plant, cost, initial = cubic_problem()
        seen = []
        run(SolverConfig(mode=DATA_DRIVEN, max_iters=3,
                         dither=DitherConfig(seed=5)),
            plant, cost, initial, on_batches=lambda k, b: seen.append(k))
        assert seen == [0, 1, 2]


class TestDistanceAndReference:
    def test_distance_zero_iff_equal(self):
        plant, cost, initial = cubic_problem()
        assert trajectory_distance(initial, initial) == 0.0

    def test_distance_hand_value(self):
        a = Trajectory(np.zeros((2, 1)), np.zeros((1, 1)), np.zeros(1))
        b = Trajectory(np.array([[0.0], [3.0]]), np.array([[4.0]]), np.zeros(1))
        assert trajectory_distance(a, b) == pytest.approx(5.0, abs=0)

    def test_reference_optimum_is_tighter(self):
        plant, cost, initial = cubic_problem()
        cfg = SolverConfig(mode=MODEL_BASED, max_iters=40)
        ref = reference_optimum(cfg, plant, cost, initial)
        model = jacobians(ref, plant, mode="exact")
        from trajopt.cost import derivative_stack
        from trajopt.lqr import solve_descent_riccati
        desc = solve_descent_riccati(model, derivative_stack(ref, cost))
        assert abs(desc.dg) <= 1e-10


class TestDitherSweep:
    def test_halvings_validated(self):
        plant, cost, initial = cubic_problem()
        with pytest.raises(ValueError, match="halvings"):
            dither_sweep(SolverConfig(), plant, cost, initial, 0)

    def test_rows_scale_the_bounds(self):
        plant, cost, initial = cubic_problem(T=15)
        cfg = SolverConfig(max_iters=6, dither=DitherConfig(seed=6))
        rows = dither_sweep(cfg, plant, cost, initial, 3)
        assert [r.j for r in rows] == [0, 1, 2]
        for r in rows:
            assert r.delta_u == pytest.approx(0.1 * 0.5 ** r.j)
            assert r.delta_x == pytest.approx(0.01 * 0.5 ** r.j)
            assert r.error is None and np.isfinite(r.dist)

    def test_failed_row_recorded_and_sweep_continues(self):
        plant, cost, initial = cubic_problem(T=15)
        cfg = SolverConfig(max_iters=4,
                           dither=DitherConfig(delta_x=0.0, delta_u=0.0,
                                               max_retries=0, seed=6))
        rows = dither_sweep(cfg, plant, cost, initial, 2,
                            reference=initial)
        assert len(rows) == 2
        assert all(r.dist is None and r.error for r in rows)
