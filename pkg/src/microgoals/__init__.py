"""Normative goal setting in linear dynamical microworlds.

Simulation of hill-climbing agent populations, cross-entropy subgoal
discovery, batch evaluation with rank statistics, and a session service
exposing the task over HTTP.
"""

from .core import (
    Environment,
    GoalProgram,
    GoalSpec,
    ScoreWeights,
    Trajectory,
    distance_score,
    goal_achievement_score,
    is_achieved,
    resource_usage,
    scale_to_tolerance,
    step,
    tolerance_to_scale,
    weighted_distance,
)
from .agents import (
    AgentPopulation,
    HillClimbAgent,
    NoiseParams,
    ZeroResidualError,
    default_population,
    goal_gradient,
    ideal_action,
    make_population,
    optimal_step_size,
    perturb_action,
    run_episode,
    sample_von_mises,
)
from .backend import active_backend
from .ceopt import CEConfig, OptimizationReport, SubgoalCandidate, discover_subgoal
from .envfile import TaskConfig, default_environment_path, load_environment
from .harness import (
    BatchResult,
    ComparisonReport,
    TestResult,
    compare_conditions,
    mann_whitney_u,
    run_batch,
    two_proportion_z,
)

__version__ = "0.1.0"

__all__ = [
    "AgentPopulation",
    "BatchResult",
    "CEConfig",
    "ComparisonReport",
    "Environment",
    "GoalProgram",
    "GoalSpec",
    "HillClimbAgent",
    "NoiseParams",
    "OptimizationReport",
    "ScoreWeights",
    "SubgoalCandidate",
    "TaskConfig",
    "TestResult",
    "Trajectory",
    "ZeroResidualError",
    "active_backend",
    "compare_conditions",
    "default_environment_path",
    "default_population",
    "discover_subgoal",
    "distance_score",
    "goal_achievement_score",
    "goal_gradient",
    "ideal_action",
    "is_achieved",
    "load_environment",
    "make_population",
    "mann_whitney_u",
    "optimal_step_size",
    "perturb_action",
    "resource_usage",
    "run_batch",
    "run_episode",
    "sample_von_mises",
    "scale_to_tolerance",
    "two_proportion_z",
    "step",
    "tolerance_to_scale",
    "weighted_distance",
    "__version__",
]
