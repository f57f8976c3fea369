"""
Exceptions raised by the fleet planner.
Infeasible geometry is reported as a None result, never through these.
"""


class FleetPlanningError(Exception):
    """Base class for all planner errors"""


class NoPathExists(FleetPlanningError):
    """No basic path joins the two poses"""


class OutOfDomain(FleetPlanningError):
    """A path was evaluated outside [0, duration]"""


class NoConvergence(FleetPlanningError):
    """Brent minimization ran out of objective evaluations"""


class MismatchedDuration(FleetPlanningError):
    """Two paths compared for separation do not share a duration"""


class InvalidScenario(FleetPlanningError):
    """Scenario violates an invariant (list lengths, wind speed, offsets)"""


class UnsupportedCount(FleetPlanningError):
    """Formation cannot be built with the requested number of aircraft"""


class RepulsionDiverged(FleetPlanningError):
    """Repulsion did not reach the required spacing within the iteration cap"""
