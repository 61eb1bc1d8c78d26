"""Simulation, exact laws and limit predictions for weighted recursive graphs."""

from .analytics import (
    centering,
    finite_n_joint_law,
    limit_constants,
    limit_process,
    limiting_degree_tail,
    max_degree_threshold,
    phase_boundary,
)
from .exact_oracle import ExactSpec, exact_joint, exact_marginal
from .simulator import GrowthConfig, grow, run_ensemble, summarize
from .weight_models import WeightClass, build, from_dict

__version__ = "0.1.0"

__all__ = [
    "ExactSpec",
    "GrowthConfig",
    "WeightClass",
    "build",
    "centering",
    "exact_joint",
    "exact_marginal",
    "finite_n_joint_law",
    "from_dict",
    "grow",
    "limit_constants",
    "limit_process",
    "limiting_degree_tail",
    "max_degree_threshold",
    "phase_boundary",
    "run_ensemble",
    "summarize",
]
