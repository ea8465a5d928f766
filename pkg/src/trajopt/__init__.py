"""Trajectory optimization via projected Newton steps, with a model-free
variant that identifies time-varying linearizations from dithered
closed-loop experiments."""

from .cost import (QuadDerivStack, TrackingCost, derivative_stack,
                   step_reference, terminal_weight_dare, total_cost)
from .dynamics import (Curve, CubicPlant, LinearPlant, LtvModel, Pendubot,
                       PendubotParams, RolloutOracle, Trajectory,
                       curvature_stack, jacobians, residual, rollout_open_loop)
from .identification import (DataBatches, DitherConfig, Dithers, IllConditioned,
                             build_batches, generate_dithers, identify_about,
                             identify_ltv, run_experiments)
from .lqr import (DescentDirection, HessianNotPositiveDefinite,
                  solve_descent_kkt, solve_descent_riccati)
from .optimizer import (IterationRecord, SolverConfig, SolverError, SweepRow,
                        data_driven_step, dither_sweep, model_based_step,
                        reference_optimum, run, trajectory_distance)
from .projection import DivergenceError, FeedbackPolicy, project, synthesize_policy

__all__ = [name for name in dir() if not name.startswith("_")]
