"""
Scenario Generation - Benchmark scenarios for the fleet planner.

Three families:
- Formation: transition between two formations 1 km apart
- RngToFormation: repulsion-spaced random starts flying into a formation
- FullRng: random starts to random ends

Random points are sampled in a square and pushed apart until the required
spacing holds; they may leave the square while doing so.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .config import (
    DEFAULT_MIN_TURN_RADIUS,
    DEFAULT_SEPARATION,
    DEFAULT_SPEED,
    FORMATION_DISTANCE,
    FORMATION_SPACING,
    RANDOM_AREA,
    RANDOM_SEPARATION,
    REPULSION_MAX_ITERATIONS,
)
from .dubins_core import Pose, VehicleParams
from .errors import RepulsionDiverged, UnsupportedCount
from .fleet_planner import Scenario

logger = logging.getLogger(__name__)

CHEVRON_ANGLE = math.radians(60.0)   # half-angle between the wings and the axis
REPULSION_MARGIN = 1e-6              # m, pushed past min_separation
COINCIDENT_DISTANCE = 1e-12


# ============================================================================
# FORMATIONS
# ============================================================================

class FormationKind(str, Enum):
    LINE = "Line"
    CIRCLE = "Circle"
    CHEVRON = "Chevron"
    GRID = "Grid"


@dataclass(frozen=True)
class FormationSpec:
    kind: FormationKind
    count: int
    spacing: float = FORMATION_SPACING
    anchor: Pose = field(default_factory=lambda: Pose(0.0, 0.0, 0.0))

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")


def _local_points(kind: FormationKind, n: int, s: float) -> np.ndarray:
    """Formation points in the body frame (x ahead, y to the left), shape (n, 2)"""
    if kind is FormationKind.LINE:
        return np.column_stack([np.zeros(n), (np.arange(n) - (n - 1) / 2.0) * s])

    if kind is FormationKind.CIRCLE:
        if n == 1:
            return np.zeros((1, 2))
        radius = s / (2.0 * math.sin(math.pi / n))
        angles = 2.0 * math.pi * np.arange(n) / n
        return radius * np.column_stack([np.cos(angles), np.sin(angles)])

    if kind is FormationKind.CHEVRON:
        if n < 2:
            raise UnsupportedCount(f"A chevron needs at least 2 aircraft, got {n}")
        points = [(0.0, 0.0)]
        for i in range(1, n):
            rank = (i + 1) // 2
            side = 1.0 if i % 2 else -1.0
            points.append((-rank * s * math.cos(CHEVRON_ANGLE), side * rank * s * math.sin(CHEVRON_ANGLE)))
        return np.array(points)

    if kind is FormationKind.GRID:
        cols = math.ceil(math.sqrt(n))
        index = np.arange(n)
        return np.column_stack([-(index // cols) * s, (index % cols) * s]).astype(float)

    raise ValueError(f"Unknown formation kind: {kind}")


def make_formation(spec: FormationSpec) -> List[Pose]:
    """Formation poses centered on the anchor, all with the anchor heading"""
    local = _local_points(spec.kind, spec.count, spec.spacing)
    local = local - local.mean(axis=0)
    heading = spec.anchor.theta
    c, s = math.cos(heading), math.sin(heading)
    x = spec.anchor.x + c * local[:, 0] - s * local[:, 1]
    y = spec.anchor.y + s * local[:, 0] + c * local[:, 1]
    return [Pose(float(xi), float(yi), heading) for xi, yi in zip(x, y)]


def min_pairwise_distance(poses: List[Pose]) -> float:
    if len(poses) < 2:
        return math.inf
    points = np.array([pose.position for pose in poses])
    gaps = np.abs(points[:, None] - points[None, :])
    np.fill_diagonal(gaps, np.inf)
    return float(gaps.min())


# ============================================================================
# RANDOM STATES
# ============================================================================

class RandomMode(str, Enum):
    INDEPENDENT = "Independent"   # uniform in the square
    SHIFTED = "Shifted"           # reference points moved by one common random vector
    DISK = "Disk"                 # each reference point moved by a random vector


@dataclass(frozen=True)
class RandomSpec:
    count: int
    area: float = RANDOM_AREA
    min_separation: float = RANDOM_SEPARATION
    mode: RandomMode = RandomMode.INDEPENDENT
    distance: float = FORMATION_DISTANCE   # displacement length for Shifted and Disk
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not self.area > 0:
            raise ValueError(f"area must be > 0, got {self.area}")
        if not self.min_separation > 0:
            raise ValueError(f"min_separation must be > 0, got {self.min_separation}")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def case_seed(root_seed: int, n: int, case: int) -> int:
    """Independent 64-bit seed for one benchmark case"""
    return int(np.random.SeedSequence([root_seed, n, case]).generate_state(1, np.uint64)[0])


def repel(points: np.ndarray, min_separation: float, rng: np.random.Generator,
          max_iterations: int = REPULSION_MAX_ITERATIONS) -> np.ndarray:
    """
    Push points apart until every pair is at least min_separation apart.

    Each too-close pair moves both points away from each other by half the
    deficit. Coincident points separate along a random direction.
    """
    points = np.array(points, dtype=float)
    n = len(points)
    if n < 2:
        return points
    target = min_separation + REPULSION_MARGIN
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    for iteration in range(max_iterations):
        diff = points[:, None, :] - points[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        if dist.min() >= min_separation:
            if iteration > max_iterations // 2:
                logger.warning(f"Repulsion needed {iteration} iterations for {n} points")
            return points
        unit = np.zeros_like(diff)
        spread = dist > COINCIDENT_DISTANCE
        unit[spread] = diff[spread] / dist[spread][:, None]
        for i, j in np.argwhere(~spread & upper):
            angle = rng.uniform(-math.pi, math.pi)
            unit[i, j] = (math.cos(angle), math.sin(angle))
            unit[j, i] = -unit[i, j]
        deficit = np.clip(target - dist, 0.0, None)
        points += (0.5 * deficit[:, :, None] * unit).sum(axis=1)
    raise RepulsionDiverged(
        f"{n} points not {min_separation} m apart after {max_iterations} iterations"
    )


def make_random_states(spec: RandomSpec, reference: Optional[List[Pose]] = None) -> List[Pose]:
    """
    Random poses spaced at least min_separation apart, headings uniform.

    Shifted and Disk modes place each point relative to the matching
    reference pose; without a reference they sample the square like
    Independent mode.
    """
    rng = make_rng(spec.seed)
    n = spec.count
    if spec.mode is RandomMode.INDEPENDENT or reference is None:
        points = rng.uniform(0.0, spec.area, size=(n, 2))
    else:
        if len(reference) != n:
            raise ValueError(f"reference has {len(reference)} poses, expected {n}")
        base = np.array([(pose.x, pose.y) for pose in reference])
        if spec.mode is RandomMode.SHIFTED:
            angle = rng.uniform(-math.pi, math.pi)
            points = base + spec.distance * np.array([math.cos(angle), math.sin(angle)])
        else:
            angles = rng.uniform(-math.pi, math.pi, size=n)
            points = base + spec.distance * np.column_stack([np.cos(angles), np.sin(angles)])
    points = repel(points, spec.min_separation, rng)
    headings = rng.uniform(-math.pi, math.pi, size=n)
    return [Pose(float(x), float(y), float(theta)) for (x, y), theta in zip(points, headings)]


# ============================================================================
# SCENARIO FAMILIES
# ============================================================================

class ScenarioFamily(str, Enum):
    FORMATION = "Formation"
    RNG_TO_FORMATION = "RngToFormation"
    FULL_RNG = "FullRng"


@dataclass(frozen=True)
class FormationTransition:
    """Start and end formation kinds; turn is the end heading change in radians"""
    start_kind: FormationKind
    end_kind: FormationKind
    turn: float = 0.0

    @property
    def name(self) -> str:
        if self.start_kind is self.end_kind:
            return f"{self.start_kind.value}-turn"
        return f"{self.start_kind.value}-to-{self.end_kind.value}"


def _transition_catalogue() -> List[FormationTransition]:
    catalogue = [FormationTransition(FormationKind.CIRCLE, FormationKind.CHEVRON)]
    for start_kind, end_kind in itertools.permutations(FormationKind, 2):
        entry = FormationTransition(start_kind, end_kind)
        if entry not in catalogue:
            catalogue.append(entry)
    for kind in FormationKind:
        catalogue.append(FormationTransition(kind, kind, turn=math.pi / 2))
    return catalogue


TRANSITIONS: List[FormationTransition] = _transition_catalogue()


def make_transition(transition: FormationTransition, n: int, spacing: float = FORMATION_SPACING,
                    distance: float = FORMATION_DISTANCE,
                    anchor: Optional[Pose] = None) -> Tuple[List[Pose], List[Pose]]:
    """Start formation at the anchor, end formation `distance` ahead along its heading"""
    anchor = anchor or Pose(0.0, 0.0, 0.0)
    end_anchor = Pose(
        anchor.x + distance * math.cos(anchor.theta),
        anchor.y + distance * math.sin(anchor.theta),
        anchor.theta + transition.turn,
    )
    starts = make_formation(FormationSpec(transition.start_kind, n, spacing, anchor))
    ends = make_formation(FormationSpec(transition.end_kind, n, spacing, end_anchor))
    return starts, ends


def default_params() -> VehicleParams:
    return VehicleParams(speed=DEFAULT_SPEED, min_turn_radius=DEFAULT_MIN_TURN_RADIUS, separation=DEFAULT_SEPARATION)


def make_scenario(family: ScenarioFamily, n: int, params: Optional[VehicleParams] = None, seed: int = 0,
                  transition: Optional[FormationTransition] = None,
                  mode: RandomMode = RandomMode.INDEPENDENT) -> Scenario:
    """
    Build one benchmark scenario. Aircraft k flies from start slot k to end
    slot k; wind and arrival offsets are zero. For FullRng, mode picks how the
    end states relate to the starts (independent, one common shift, or one
    displacement per aircraft).
    """
    family = ScenarioFamily(family)
    mode = RandomMode(mode)
    params = params or default_params()
    start_seed, end_seed = (int(value) for value in np.random.SeedSequence(seed).generate_state(2, np.uint64))

    if family is ScenarioFamily.FORMATION:
        transition = transition or TRANSITIONS[seed % len(TRANSITIONS)]
        starts, ends = make_transition(transition, n)
        logger.debug(f"Formation scenario {transition.name} with {n} aircraft")

    elif family is ScenarioFamily.RNG_TO_FORMATION:
        starts = make_random_states(RandomSpec(count=n, seed=start_seed))
        rng = make_rng(end_seed)
        kinds = [kind for kind in FormationKind if n >= 2 or kind is not FormationKind.CHEVRON]
        kind = kinds[int(rng.integers(len(kinds)))]
        heading = rng.uniform(-math.pi, math.pi)
        centroid = np.mean([pose.position for pose in starts])
        target = centroid + FORMATION_DISTANCE * complex(math.cos(heading), math.sin(heading))
        ends = make_formation(FormationSpec(kind, n, FORMATION_SPACING, Pose(target.real, target.imag, heading)))
        logger.debug(f"RngToFormation scenario into {kind.value} with {n} aircraft")

    else:
        starts = make_random_states(RandomSpec(count=n, seed=start_seed))
        ends = make_random_states(RandomSpec(count=n, seed=end_seed, mode=mode), reference=starts)

    return Scenario(starts=starts, ends=ends, params=params)
