"""
Fleet Planner - Synchronized, conflict-free path planning for a Dubins fleet.

Searches the common flight time tau over an ascending queue of candidates in
[tau_min, R * tau_min]. For each tau every aircraft gets its family of fitted
paths; a conflict matrix is built over all pairs of candidates and a 0-1
feasibility search picks one path per aircraft. The first feasible tau becomes
the best solution, the queue is pruned above it and refined below it, until
the iteration budget, the timeout or the refinement width stops the search.

Wind is handled in the air frame: each end pose is shifted upwind by W * tau_k
so that the drift brings the aircraft onto its ground target.
"""

import bisect
import functools
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_RESAMPLE_COUNT,
    DEFAULT_TIME_RATIO,
    DEFAULT_TIMEOUT,
    MIN_WIDTH_FACTOR,
    MIN_WIDTH_FLOOR,
    get_worker_count,
)
from .dubins_core import BASIC_WORDS, FleetPath, Pose, VehicleParams, evaluate, sample_positions, shortest_dubins, word_length
from .errors import InvalidScenario
from .length_fit import fit_dubins, fit_tolerance
from .separation import (
    DURATION_TOLERANCE,
    SCREEN_SAMPLES,
    SeparationStats,
    is_pair_separated,
    screen_pairs,
    screen_times,
    timed_legs,
)
from .workers import WorkerPool

logger = logging.getLogger(__name__)

QUEUE_TOLERANCE = 1e-9    # s, dedup distance between queued times
IMPROVEMENT_TOLERANCE = 1e-9


# ============================================================================
# CONFIGURATION AND SCENARIO
# ============================================================================

class PlannerConfig(BaseModel):
    """Optimization parameters of the time search"""
    time_ratio: float = Field(DEFAULT_TIME_RATIO, gt=1)            # R
    resample_count: int = Field(DEFAULT_RESAMPLE_COUNT, ge=1)      # b
    min_width: Optional[float] = Field(None, gt=0)                 # w, seconds
    max_iterations: int = Field(DEFAULT_MAX_ITERATIONS, ge=1)
    timeout: float = Field(DEFAULT_TIMEOUT, gt=0)                  # seconds
    workers: Optional[int] = Field(None, ge=1)

    model_config = ConfigDict(extra="forbid", frozen=True)

    def resolve_min_width(self, tau_min: float) -> float:
        """w as configured, or max(0.1 s, R * tau_min * 1e-4)"""
        if self.min_width is not None:
            return self.min_width
        return max(MIN_WIDTH_FLOOR, self.time_ratio * tau_min * MIN_WIDTH_FACTOR)


@dataclass
class Scenario:
    """Fleet start and end poses, flight characteristics, wind and arrival offsets"""
    starts: List[Pose]
    ends: List[Pose]
    params: VehicleParams
    wind: complex = 0j                       # m/s, ground frame
    arrival_offsets: Optional[List[float]] = None

    def __post_init__(self):
        self.starts = list(self.starts)
        self.ends = list(self.ends)
        if isinstance(self.wind, (tuple, list)):
            self.wind = complex(*self.wind)
        self.wind = complex(self.wind)
        if self.arrival_offsets is None:
            self.arrival_offsets = [0.0] * len(self.starts)
        self.arrival_offsets = [float(offset) for offset in self.arrival_offsets]

        if not self.starts:
            raise InvalidScenario("Scenario needs at least one aircraft")
        if not len(self.starts) == len(self.ends) == len(self.arrival_offsets):
            raise InvalidScenario(
                f"starts, ends and arrival_offsets must have equal lengths, got "
                f"{len(self.starts)}, {len(self.ends)}, {len(self.arrival_offsets)}"
            )
        if abs(self.wind) >= self.params.speed:
            raise InvalidScenario(f"|wind| = {abs(self.wind):.3f} m/s must be below the airspeed {self.params.speed} m/s")
        if any(offset < 0 for offset in self.arrival_offsets):
            raise InvalidScenario("arrival_offsets must be non-negative")
        if self.arrival_offsets[0] != 0.0:
            raise InvalidScenario("The first arrival offset must be 0")

    @property
    def count(self) -> int:
        return len(self.starts)

    def cumulative_offsets(self) -> np.ndarray:
        """Delay of each aircraft's arrival after tau"""
        return np.cumsum(np.asarray(self.arrival_offsets, dtype=float))

    def flight_time(self, k: int, tau: float) -> float:
        return tau + float(self.cumulative_offsets()[k])


# ============================================================================
# TIME QUEUE
# ============================================================================

class TimeQueue:
    """Ascending set of candidate flight times, each flagged tested or not"""

    def __init__(self, taus: Sequence[float] = ()):
        self._taus: List[float] = []
        self._tested: List[bool] = []
        for tau in taus:
            self.add(tau)

    def __len__(self) -> int:
        return len(self._taus)

    @property
    def entries(self) -> List[Tuple[float, bool]]:
        return list(zip(self._taus, self._tested))

    def add(self, tau: float, tested: bool = False) -> bool:
        """Insert tau unless an entry lies within the dedup tolerance"""
        index = bisect.bisect_left(self._taus, tau)
        for neighbour in (index - 1, index):
            if 0 <= neighbour < len(self._taus) and abs(self._taus[neighbour] - tau) <= QUEUE_TOLERANCE:
                return False
        self._taus.insert(index, tau)
        self._tested.insert(index, tested)
        return True

    def untested(self) -> List[float]:
        return [tau for tau, tested in zip(self._taus, self._tested) if not tested]

    def mark_tested(self, tau: float) -> None:
        index = bisect.bisect_left(self._taus, tau - QUEUE_TOLERANCE)
        if index < len(self._taus) and abs(self._taus[index] - tau) <= QUEUE_TOLERANCE:
            self._tested[index] = True
        else:
            raise KeyError(f"tau={tau} is not queued")

    def prune(self, best: float) -> int:
        """Drop every tau above best and every untested tau at or above it"""
        kept = [
            (tau, tested) for tau, tested in zip(self._taus, self._tested)
            if tau <= best + QUEUE_TOLERANCE and (tested or tau < best - QUEUE_TOLERANCE)
        ]
        removed = len(self._taus) - len(kept)
        self._taus = [tau for tau, _ in kept]
        self._tested = [tested for _, tested in kept]
        return removed

    def resample(self, count: int, min_width: float) -> int:
        """Insert count evenly spaced times in every gap wider than min_width"""
        added = 0
        for lo, hi in list(zip(self._taus[:-1], self._taus[1:])):
            gap = hi - lo
            if gap <= min_width:
                continue
            for j in range(1, count + 1):
                if self.add(lo + j * gap / (count + 1)):
                    added += 1
        return added


def resample(queue: TimeQueue, b: int, w: float) -> int:
    """Refine the queue; returns the number of new entries (0 means no progress)"""
    return queue.resample(b, w)


# ============================================================================
# CONFLICT MATRIX AND ASSIGNMENT
# ============================================================================

class ConflictMatrix:
    """Boolean conflict blocks c[a, b][g, h] for every aircraft pair a < b"""

    def __init__(self, sizes: Sequence[int]):
        self.sizes = [int(size) for size in sizes]
        self._blocks: Dict[Tuple[int, int], np.ndarray] = {}
        for a, b in itertools.combinations(range(len(self.sizes)), 2):
            self._blocks[(a, b)] = np.zeros((self.sizes[a], self.sizes[b]), dtype=bool)

    @classmethod
    def from_blocks(cls, sizes: Sequence[int], blocks: Dict[Tuple[int, int], np.ndarray]) -> "ConflictMatrix":
        matrix = cls(sizes)
        for (a, b), block in blocks.items():
            matrix.set_block(a, b, block)
        return matrix

    def set_block(self, a: int, b: int, block: np.ndarray) -> None:
        block = np.asarray(block, dtype=bool)
        if a > b:
            a, b, block = b, a, block.T
        if block.shape != (self.sizes[a], self.sizes[b]):
            raise ValueError(f"Block ({a}, {b}) must have shape {(self.sizes[a], self.sizes[b])}, got {block.shape}")
        self._blocks[(a, b)] = block

    def block(self, a: int, b: int) -> np.ndarray:
        """Rows index aircraft a's candidates, columns aircraft b's"""
        if a < b:
            return self._blocks[(a, b)]
        return self._blocks[(b, a)].T

    def conflict(self, a: int, b: int, g: int, h: int) -> bool:
        return bool(self.block(a, b)[g, h])

    @property
    def count(self) -> int:
        return len(self.sizes)


def _search(matrix: ConflictMatrix, domains: List[np.ndarray], assigned: Dict[int, int]) -> Optional[Dict[int, int]]:
    """Backtracking with forward checking, most constrained aircraft first"""
    free = [k for k in range(matrix.count) if k not in assigned]
    if not free:
        return dict(assigned)
    k = min(free, key=lambda j: (int(domains[j].sum()), j))
    for g in np.flatnonzero(domains[k]):
        pruned = _fix(matrix, domains, assigned, k, int(g))
        if pruned is None:
            continue
        assigned[k] = int(g)
        found = _search(matrix, pruned, assigned)
        del assigned[k]
        if found is not None:
            return found
    return None


def _fix(matrix: ConflictMatrix, domains: List[np.ndarray], assigned: Dict[int, int], k: int,
         g: int) -> Optional[List[np.ndarray]]:
    """Domains after fixing aircraft k to candidate g, or None on a wipe-out"""
    pruned = list(domains)
    only = np.zeros(matrix.sizes[k], dtype=bool)
    only[g] = True
    pruned[k] = only
    for j in range(matrix.count):
        if j == k or j in assigned:
            continue
        pruned[j] = domains[j] & ~matrix.block(k, j)[g]
        if not pruned[j].any():
            return None
    return pruned


def solve_assignment(matrix: ConflictMatrix, sizes: Sequence[int]) -> Optional[List[int]]:
    """
    One candidate index per aircraft with no conflicting pair, or None.

    Among feasible assignments the lexicographically smallest one (aircraft
    0 first, lowest candidate index first) is returned.
    """
    if list(sizes) != matrix.sizes:
        raise ValueError(f"sizes {list(sizes)} do not match the matrix {matrix.sizes}")
    if any(size < 1 for size in sizes):
        return None
    domains = [np.ones(size, dtype=bool) for size in sizes]
    if _search(matrix, domains, {}) is None:
        return None

    assigned: Dict[int, int] = {}
    for k in range(matrix.count):
        for g in np.flatnonzero(domains[k]):
            pruned = _fix(matrix, domains, assigned, k, int(g))
            if pruned is None:
                continue
            assigned[k] = int(g)
            if _search(matrix, pruned, assigned) is not None:
                domains = pruned
                break
            del assigned[k]
        else:
            raise RuntimeError(f"Feasible matrix but no value left for aircraft {k}")
    return [assigned[k] for k in range(matrix.count)]


def brute_force_assignment(matrix: ConflictMatrix, sizes: Sequence[int]) -> Optional[List[int]]:
    """Enumerate every combination in lexicographic order; first conflict-free one wins"""
    pairs = list(itertools.combinations(range(len(sizes)), 2))
    for combo in itertools.product(*(range(size) for size in sizes)):
        if not any(matrix.conflict(a, b, combo[a], combo[b]) for a, b in pairs):
            return list(combo)
    return None


# ============================================================================
# PER-TAU STEPS
# ============================================================================

def initial_bounds(scenario: Scenario, time_ratio: float = DEFAULT_TIME_RATIO) -> Tuple[float, float]:
    """(tau_min, R * tau_min); each aircraft contributes its shortest time minus its offset"""
    offsets = scenario.cumulative_offsets()
    tau_min = 0.0
    for k, (start, end) in enumerate(zip(scenario.starts, scenario.ends)):
        shortest, _ = shortest_dubins(start, end, scenario.params)
        tau_min = max(tau_min, shortest - float(offsets[k]))
    return tau_min, time_ratio * tau_min


def wind_shifted_end(end: Pose, wind: complex, tau_k: float) -> Pose:
    """End pose moved upwind by the drift accumulated over tau_k"""
    return end.shifted(-complex(wind) * tau_k)


def _shortest_length(start: Pose, end: Pose, radius: float) -> float:
    lengths = [word_length(tag, start, end, radius) for tag in BASIC_WORDS]
    return min((length for length in lengths if length is not None), default=math.inf)


def _reachable(scenario: Scenario, tau: float) -> bool:
    """Every aircraft can reach its shifted end within its flight time"""
    params = scenario.params
    for k, (start, end) in enumerate(zip(scenario.starts, scenario.ends)):
        tau_k = scenario.flight_time(k, tau)
        target = wind_shifted_end(end, scenario.wind, tau_k)
        if _shortest_length(start, target, params.min_turn_radius) > tau_k * params.speed + fit_tolerance(tau_k * params.speed):
            return False
    return True


def _fit_aircraft(scenario: Scenario, tau: float, k: int) -> List[FleetPath]:
    tau_k = scenario.flight_time(k, tau)
    start = scenario.starts[k]
    end = wind_shifted_end(scenario.ends[k], scenario.wind, tau_k)
    if tau_k <= DURATION_TOLERANCE:
        _, shortest = shortest_dubins(start, end, scenario.params)
        return [shortest] if shortest.total_length <= fit_tolerance(1.0) else []
    return fit_dubins(start, end, scenario.params, tau_k)


def build_candidates(scenario: Scenario, tau: float, pool: Optional[WorkerPool] = None) -> List[List[FleetPath]]:
    """Fitted path family of every aircraft for the common time tau"""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    fit = functools.partial(_fit_aircraft, scenario, tau)
    indices = range(scenario.count)
    return pool.map(fit, indices) if pool is not None else [fit(k) for k in indices]


def _pair_block(paths_a: List[FleetPath], paths_b: List[FleetPath], delta: float,
                stats: Optional[SeparationStats]) -> np.ndarray:
    if not paths_a or not paths_b:
        return np.zeros((len(paths_a), len(paths_b)), dtype=bool)
    horizon = min(paths_a[0].duration, paths_b[0].duration)
    if horizon <= DURATION_TOLERANCE:
        starts_a = np.array([path.start.position for path in paths_a])
        starts_b = np.array([path.start.position for path in paths_b])
        return np.abs(starts_a[:, None] - starts_b[None, :]) <= delta

    times = screen_times(horizon)
    samples_a = np.vstack([sample_positions(path, times) for path in paths_a])
    samples_b = np.vstack([sample_positions(path, times) for path in paths_b])
    verdict = screen_pairs(samples_a, samples_b, delta, paths_a[0].speed, horizon / (SCREEN_SAMPLES - 1))
    block = verdict == 1

    undecided = np.argwhere(verdict == -1)
    if len(undecided):
        legs_a = {int(g): timed_legs(paths_a[g]) for g in set(undecided[:, 0])}
        legs_b = {int(h): timed_legs(paths_b[h]) for h in set(undecided[:, 1])}
        for g, h in undecided:
            block[g, h] = not is_pair_separated(legs_a[int(g)], legs_b[int(h)], delta, horizon=horizon, stats=stats)
    return block


def build_conflict_matrix(
    candidates: List[List[FleetPath]],
    delta: float,
    pool: Optional[WorkerPool] = None,
    stats: Optional[SeparationStats] = None,
    deadline: Optional[float] = None,
) -> Optional[ConflictMatrix]:
    """
    Conflict flags for every pair of candidates of every aircraft pair.

    Returns None when the monotonic-clock deadline passes before all aircraft
    pairs are done. An aircraft without candidates gets empty blocks, which
    the assignment search reports as infeasible.
    """
    sizes = [len(paths) for paths in candidates]
    matrix = ConflictMatrix(sizes)
    pairs = list(itertools.combinations(range(len(candidates)), 2))

    def task(pair: Tuple[int, int]) -> Optional[np.ndarray]:
        if deadline is not None and time.monotonic() > deadline:
            return None
        a, b = pair
        return _pair_block(candidates[a], candidates[b], delta, stats)

    blocks = pool.map(task, pairs) if pool is not None else [task(pair) for pair in pairs]
    for (a, b), block in zip(pairs, blocks):
        if block is None:
            return None
        matrix.set_block(a, b, block)
    return matrix


# ============================================================================
# PLANNING LOOP
# ============================================================================

class PlanStatus(str, Enum):
    SOLVED = "Solved"
    NO_SOLUTION = "NoSolution"
    TIMEOUT = "Timeout"
    ITERATION_LIMIT = "IterationLimit"


class StopReason(str, Enum):
    """Why the search loop ended; NoProgress without a best tau means NoSolution"""
    TIMEOUT = "Timeout"
    ITERATION_LIMIT = "IterationLimit"
    NO_PROGRESS = "NoProgress"


@dataclass
class PlanResult:
    """Best synchronized plan found, with solver telemetry"""
    status: PlanStatus
    tau: Optional[float]
    paths: List[FleetPath]
    assignment: Optional[List[int]]
    iterations_used: int
    wall_time: float
    stop_reason: StopReason
    tau_min: float
    pair_checks: int = 0
    temporal_solves: int = 0
    best_history: List[float] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status is PlanStatus.SOLVED


class _DeadlineReached(Exception):
    pass


def _test_time(scenario: Scenario, tau: float, fit_pool: WorkerPool, pair_pool: WorkerPool,
               stats: SeparationStats, deadline: float) -> Optional[Tuple[List[FleetPath], List[int]]]:
    if not _reachable(scenario, tau):
        logger.debug(f"tau={tau:.3f}s below some aircraft's shortest time")
        return None
    candidates = build_candidates(scenario, tau, fit_pool)
    sizes = [len(paths) for paths in candidates]
    if not all(sizes):
        logger.debug(f"tau={tau:.3f}s: empty candidate set for aircraft {sizes.index(0)}")
        return None
    matrix = build_conflict_matrix(candidates, scenario.params.separation, pair_pool, stats, deadline)
    if matrix is None:
        raise _DeadlineReached()
    assignment = solve_assignment(matrix, sizes)
    logger.debug(f"tau={tau:.3f}s: candidates {sizes}, feasible={assignment is not None}")
    if assignment is None:
        return None
    return [candidates[k][g] for k, g in enumerate(assignment)], assignment


def plan_fleet(scenario: Scenario, config: Optional[PlannerConfig] = None) -> PlanResult:
    """
    Search the smallest sampled common flight time with a conflict-free
    choice of one fitted path per aircraft.
    """
    config = config or PlannerConfig()
    started = time.monotonic()
    deadline = started + config.timeout

    tau_min, tau_max = initial_bounds(scenario, config.time_ratio)
    min_width = config.resolve_min_width(tau_min)
    queue = TimeQueue([tau_min, tau_max])
    stats = SeparationStats()
    logger.info(f"Planning {scenario.count} aircraft: tau in [{tau_min:.3f}, {tau_max:.3f}]s, w={min_width:.3f}s")

    best_tau: Optional[float] = None
    best_paths: List[FleetPath] = []
    best_assignment: Optional[List[int]] = None
    history: List[float] = []
    iterations = 0
    stop_reason: Optional[StopReason] = None
    workers = get_worker_count(config.workers)

    with WorkerPool(workers, processes=True) as fit_pool, WorkerPool(workers) as pair_pool:
        while stop_reason is None:
            for tau in queue.untested():
                if time.monotonic() > deadline:
                    stop_reason = StopReason.TIMEOUT
                    break
                if iterations >= config.max_iterations:
                    stop_reason = StopReason.ITERATION_LIMIT
                    break
                iterations += 1
                queue.mark_tested(tau)
                try:
                    found = _test_time(scenario, tau, fit_pool, pair_pool, stats, deadline)
                except _DeadlineReached:
                    stop_reason = StopReason.TIMEOUT
                    break
                if found is None:
                    continue
                if best_tau is None or tau < best_tau - IMPROVEMENT_TOLERANCE:
                    best_tau = tau
                    best_paths, best_assignment = found
                    history.append(tau)
                    logger.debug(f"New best tau={tau:.3f}s at iteration {iterations}")
                break
            if stop_reason is not None:
                break
            if best_tau is not None:
                queue.prune(best_tau)
            if queue.resample(config.resample_count, min_width) == 0:
                stop_reason = StopReason.NO_PROGRESS

    if best_tau is not None:
        status = PlanStatus.SOLVED
    elif stop_reason is StopReason.NO_PROGRESS:
        status = PlanStatus.NO_SOLUTION
    else:
        status = PlanStatus(stop_reason.value)

    result = PlanResult(
        status=status,
        tau=best_tau,
        paths=best_paths,
        assignment=best_assignment,
        iterations_used=iterations,
        wall_time=time.monotonic() - started,
        stop_reason=stop_reason,
        tau_min=tau_min,
        pair_checks=stats.pair_checks,
        temporal_solves=stats.temporal_solves,
        best_history=history,
    )
    tau_text = f"{best_tau:.3f}s" if best_tau is not None else "none"
    logger.info(
        f"Plan {status.value}: tau={tau_text}, {iterations} iterations, "
        f"{result.wall_time:.2f}s, stop={stop_reason.value}"
    )
    return result


# ============================================================================
# VALIDATION
# ============================================================================

def ground_track(path: FleetPath, wind: complex, t: float) -> complex:
    """Ground-frame position: air-frame position plus the wind drift"""
    return evaluate(path, t).position + complex(wind) * t


def validate_plan(scenario: Scenario, result: PlanResult, endpoint_tolerance: float = 1e-3) -> List[str]:
    """
    Re-check a solved plan from scratch.

    Returns a list of problems (empty when the plan is valid): start poses,
    turn rates, synchronized durations, ground-frame endpoints under wind
    and pairwise separation in the air frame.
    """
    problems: List[str] = []
    if not result.solved or result.tau is None:
        return [f"Plan is not solved ({result.status.value})"]
    if len(result.paths) != scenario.count:
        return [f"Expected {scenario.count} paths, got {len(result.paths)}"]

    params = scenario.params
    for k, path in enumerate(result.paths):
        tau_k = scenario.flight_time(k, result.tau)
        if not path.start.is_close(scenario.starts[k], tol=1e-6):
            problems.append(f"Aircraft {k}: starts at {path.start}, expected {scenario.starts[k]}")
        turn_rate = max((abs(primitive.turn_rate) for primitive in path.primitives), default=0.0)
        if turn_rate > params.max_turn_rate * (1.0 + 1e-9):
            problems.append(f"Aircraft {k}: turns at {turn_rate:.6f} rad/s, limit {params.max_turn_rate:.6f} rad/s")
        sync_tolerance = fit_tolerance(tau_k * params.speed) / params.speed + 1e-9
        if abs(path.duration - tau_k) > sync_tolerance:
            problems.append(f"Aircraft {k}: duration {path.duration:.9f}s, expected {tau_k:.9f}s")
        landing = ground_track(path, scenario.wind, path.duration)
        miss = abs(landing - scenario.ends[k].position)
        if miss > endpoint_tolerance:
            problems.append(f"Aircraft {k}: lands {miss:.6f} m from its target")

    legs = [timed_legs(path) for path in result.paths]
    for a, b in itertools.combinations(range(scenario.count), 2):
        horizon = min(result.paths[a].duration, result.paths[b].duration)
        if horizon <= DURATION_TOLERANCE:
            separated = abs(result.paths[a].start.position - result.paths[b].start.position) > params.separation
        else:
            separated = is_pair_separated(legs[a], legs[b], params.separation, horizon=horizon)
        if not separated:
            problems.append(f"Aircraft {a} and {b} lose separation")
    return problems
