"""Channel assignment for D2D links sharing cellular spectrum under full and partial CSI."""

from d2d_assign.cluster_solver import (
    Clustering,
    cluster_cellular,
    greedy_cluster,
    solve_cluster,
    solve_semi_orthogonal,
)
from d2d_assign.config import ExperimentConfig, load_config
from d2d_assign.dp_solver import INACTIVE, Assignment, solve_dp, solve_exhaustive, validate_assignment
from d2d_assign.harness import ResultRow, run_experiment, summarize, write_csv
from d2d_assign.model import CsiScenario, Scenario, generate_scenario
from d2d_assign.stats import InterferenceContext, expected_rate, success_probability
from d2d_assign.utility import ChannelEvaluator, UtilityKind, evaluate_channel

__all__ = [
    "Assignment",
    "ChannelEvaluator",
    "Clustering",
    "CsiScenario",
    "ExperimentConfig",
    "INACTIVE",
    "InterferenceContext",
    "ResultRow",
    "Scenario",
    "UtilityKind",
    "cluster_cellular",
    "evaluate_channel",
    "expected_rate",
    "generate_scenario",
    "greedy_cluster",
    "load_config",
    "run_experiment",
    "solve_cluster",
    "solve_dp",
    "solve_exhaustive",
    "solve_semi_orthogonal",
    "success_probability",
    "summarize",
    "validate_assignment",
    "write_csv",
]
