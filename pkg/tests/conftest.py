import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from trajopt import (LinearPlant, Pendubot, Trajectory, rollout_open_loop)

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
PENDUBOT_CONFIG = os.path.join(REPO_ROOT, "configs", "pendubot.yaml")

HANGING = np.array([-np.pi / 2, 0.0, 0.0, 0.0])
UPRIGHT = np.array([np.pi / 2, 0.0, 0.0, 0.0])


def random_stable_lti(rng, n=3, m=2):
    """Random LTI plant with spectral radius scaled below 1."""
    A = rng.standard_normal((n, n))
    A *= 0.9 / max(np.abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, m))
    return LinearPlant(A, B)


def random_pendubot_trajectory(plant, rng, T=40, scale=0.5):
    """Feasible trajectory from the hanging equilibrium under random inputs."""
    u = scale * rng.standard_normal((T, 1))
    return rollout_open_loop(HANGING, u, plant)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pendubot():
    return Pendubot()


@pytest.fixture
def lti(rng):
    return random_stable_lti(rng)
