"""
dubins_fleet - synchronized, conflict-free Dubins path planning for fixed-wing fleets.
"""

from .dubins_core import FleetPath, PathWord, Pose, VehicleParams, WordTag, build_word, evaluate, shortest_dubins
from .errors import (
    FleetPlanningError,
    InvalidScenario,
    MismatchedDuration,
    NoConvergence,
    NoPathExists,
    OutOfDomain,
    RepulsionDiverged,
    UnsupportedCount,
)
from .fleet_planner import PlannerConfig, PlanResult, PlanStatus, Scenario, StopReason, plan_fleet, validate_plan
from .length_fit import fit_dubins
from .separation import are_separated, is_pair_separated, timed_legs
from .scenario_gen import ScenarioFamily, make_scenario

__all__ = [
    "FleetPath", "PathWord", "Pose", "VehicleParams", "WordTag", "build_word", "evaluate", "shortest_dubins",
    "FleetPlanningError", "InvalidScenario", "MismatchedDuration", "NoConvergence", "NoPathExists",
    "OutOfDomain", "RepulsionDiverged", "UnsupportedCount",
    "PlannerConfig", "PlanResult", "PlanStatus", "Scenario", "StopReason", "plan_fleet", "validate_plan",
    "fit_dubins", "are_separated", "is_pair_separated", "timed_legs",
    "ScenarioFamily", "make_scenario",
]
