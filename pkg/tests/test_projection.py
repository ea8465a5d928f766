import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pendubot_trajectory, random_stable_lti
from trajopt import (Curve, FeedbackPolicy, LinearPlant, LtvModel, jacobians,
                     project, residual, rollout_open_loop, synthesize_policy)
from trajopt.dynamics import DimensionError
from trajopt.projection import DivergenceError


class TestFeedbackPolicy:
    def test_anchoring_property(self, rng):
        # Evaluated on its own reference state, the policy returns the
        # reference input exactly, for any gain.
        policy = FeedbackPolicy(rng.standard_normal((4, 2, 3)))
        alpha = rng.standard_normal(3)
        mu = rng.standard_normal(2)
        assert np.array_equal(policy(alpha, mu, alpha, 2), mu)

    def test_feedback_term(self):
        policy = FeedbackPolicy(np.full((1, 1, 1), 2.0))
        out = policy(np.array([1.0]), np.array([0.5]), np.array([0.0]), 0)
        assert out[0] == pytest.approx(0.5 + 2.0 * 1.0, abs=0)

    def test_zero_factory(self):
        policy = FeedbackPolicy.zero(5, 3, 2)
        assert policy.K.shape == (5, 2, 3)
        assert policy.horizon == 5

    def test_gain_stack_must_be_3d(self, rng):
        with pytest.raises(DimensionError):
            FeedbackPolicy(rng.standard_normal((2, 3)))


class TestSynthesizePolicy:
    def test_one_step_hand_gain(self):
        # K0 = (R + B'PB)^{-1} B'PA with P = reg_Q: (1 + 1)^{-1} * 1 = 1/2.
        model = LtvModel(np.ones((1, 1, 1)), np.ones((1, 1, 1)), "exact")
        policy = synthesize_policy(model, np.eye(1), np.eye(1))
        assert policy.K[0, 0, 0] == pytest.approx(0.5, abs=0)

    def test_gains_stabilize_the_model(self, rng):
        plant = random_stable_lti(rng)
        A = plant.A + 0.4 * np.eye(3)  # mildly unstable
        model = LtvModel(np.tile(A, (30, 1, 1)),
                         np.tile(plant.B, (30, 1, 1)), "exact")
        policy = synthesize_policy(model, np.eye(3), 0.1 * np.eye(2))
        radius = max(abs(np.linalg.eigvals(A - plant.B @ policy.K[0])))
        assert radius < 1.0

    def test_weight_shape_validated(self, rng):
        model = LtvModel(rng.standard_normal((3, 2, 2)),
                         rng.standard_normal((3, 2, 1)), "exact")
        with pytest.raises(DimensionError):
            synthesize_policy(model, np.eye(3), np.eye(1))


class TestProject:
    def test_identity_on_lti_trajectories(self, lti, rng):
        traj = rollout_open_loop(rng.standard_normal(3),
                                 rng.standard_normal((20, 2)), lti)
        policy = FeedbackPolicy(0.3 * rng.standard_normal((20, 2, 3)))
        out = project(traj.as_curve(), policy, lti)
        assert np.array_equal(out.x, traj.x)
        assert np.array_equal(out.u, traj.u)

    def test_identity_on_pendubot_trajectories(self, pendubot, rng):
        traj = random_pendubot_trajectory(pendubot, rng, T=30)
        policy = FeedbackPolicy(0.1 * rng.standard_normal((30, 1, 4)))
        out = project(traj.as_curve(), policy, pendubot)
        assert np.array_equal(out.x, traj.x)
        assert np.array_equal(out.u, traj.u)

    def test_output_is_feasible(self, pendubot, rng):
        base = random_pendubot_trajectory(pendubot, rng, T=30)
        curve = Curve(base.x + 0.05 * rng.standard_normal(base.x.shape),
                      base.u + 0.05 * rng.standard_normal(base.u.shape),
                      base.x_init)
        model = jacobians(base, pendubot, mode="exact")
        policy = synthesize_policy(model, np.eye(4), np.eye(1))
        out = project(curve, policy, pendubot)
        assert residual(out, pendubot) < 1e-12
        assert np.array_equal(out.x[0], base.x_init)

    def test_horizon_mismatch_rejected(self, lti, rng):
        traj = rollout_open_loop(rng.standard_normal(3),
                                 rng.standard_normal((5, 2)), lti)
        with pytest.raises(DimensionError):
            project(traj.as_curve(), FeedbackPolicy.zero(4, 3, 2), lti)

    def test_plant_mismatch_rejected(self, lti, rng):
        traj = rollout_open_loop(rng.standard_normal(3),
                                 rng.standard_normal((5, 2)), lti)
        other = LinearPlant(np.eye(2), np.ones((2, 1)))
        with pytest.raises(DimensionError):
            project(traj.as_curve(), FeedbackPolicy.zero(5, 3, 2), other)

    def test_divergence_detected(self):
        plant = LinearPlant([[3.0]], [[1.0]])
        curve = Curve(np.ones((16, 1)), np.zeros((15, 1)), np.array([1.0]))
        with pytest.raises(DivergenceError) as exc:
            project(curve, FeedbackPolicy.zero(15, 1, 1), plant)
        assert 0 <= exc.value.t < 15
        assert exc.value.norm > 1e6

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_idempotent_on_random_lti_curves(self, seed):
        rng = np.random.default_rng(seed)
        plant = random_stable_lti(rng)
        curve = Curve(rng.standard_normal((11, 3)),
                      rng.standard_normal((10, 2)), rng.standard_normal(3))
        policy = FeedbackPolicy(0.3 * rng.standard_normal((10, 2, 3)))
        once = project(curve, policy, plant)
        twice = project(once.as_curve(), policy, plant)
        assert np.array_equal(once.x, twice.x)
        assert np.array_equal(once.u, twice.u)
