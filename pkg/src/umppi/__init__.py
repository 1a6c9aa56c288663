"""MPPI and unscented MPPI (U-MPPI) for differential-drive navigation."""

from .controller import Controller, ControllerConfig, Diagnostics, Mode, NoFeasibleRollout
from .costs import CostParams, mc_rs_oracle, risk_sensitive_cost
from .dynamics import ControlBounds, ControlInput, RobotState, clamp_control, step
from .harness import EpisodeConfig, WorldConfig, compute_metrics, run_benchmark, run_episode
from .unscented import UtParams, sigma_points, reconstruct_moments, ut_weights
from .world import Costmap, CostmapParams, ObstacleMap, generate_forest, is_collision

__all__ = [
    "Controller",
    "ControllerConfig",
    "Diagnostics",
    "Mode",
    "NoFeasibleRollout",
    "CostParams",
    "mc_rs_oracle",
    "risk_sensitive_cost",
    "ControlBounds",
    "ControlInput",
    "RobotState",
    "clamp_control",
    "step",
    "EpisodeConfig",
    "WorldConfig",
    "compute_metrics",
    "run_benchmark",
    "run_episode",
    "UtParams",
    "sigma_points",
    "reconstruct_moments",
    "ut_weights",
    "Costmap",
    "CostmapParams",
    "ObstacleMap",
    "generate_forest",
    "is_collision",
]
