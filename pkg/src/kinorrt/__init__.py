"""Kinodynamic RRT* with partial-final-state-free steering."""

from ._backend import BACKEND
from .errors import (
    DegenerateHorizonError,
    EnvironmentSaturatedError,
    IllConditionedWarning,
    InvalidInputError,
    InvalidScenarioError,
    KinoRRTError,
    NoConnectionError,
)
from .lti import (
    LinearSystem,
    QuadrotorParams,
    TerminalPenalty,
    build_double_integrator_2d,
    build_quadrotor_10d,
    drift_state,
    matrix_exponential,
    weighted_gramian,
)
from .planner import PlannerConfig, Tree, best_solution, delayed_time_update, plan
from .scenario import builtin_scenario, load_scenario, save_scenario
from .steering import (
    SteeringSolution,
    Trajectory,
    eval_trajectory,
    heuristic_arrival_time,
    solve_fixed_state_fixed_time,
    solve_fixed_state_free_time,
    solve_pff_fixed_time,
    solve_pff_free_time,
    solve_pff_penalty,
)
from .world import Box, Environment, collision_free_trajectory, collision_point, in_goal, sample_full, sample_pff

__version__ = "0.1.0"
