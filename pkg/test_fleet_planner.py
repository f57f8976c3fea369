#!/usr/bin/env python3
"""
Tests for the fleet planner: time queue, conflict matrix, assignment search,
wind and arrival offsets, and the full planning loop.
"""
import itertools
import math

import numpy as np
import pytest
from pydantic import ValidationError

from dubins_fleet import fleet_planner
from dubins_fleet.dubins_core import Pose, VehicleParams, evaluate, sample_positions, shortest_dubins
from dubins_fleet.errors import InvalidScenario
from dubins_fleet.fleet_planner import (
    QUEUE_TOLERANCE,
    ConflictMatrix,
    PlannerConfig,
    PlanStatus,
    Scenario,
    StopReason,
    TimeQueue,
    brute_force_assignment,
    build_candidates,
    build_conflict_matrix,
    ground_track,
    initial_bounds,
    plan_fleet,
    resample,
    solve_assignment,
    validate_plan,
    wind_shifted_end,
)
from dubins_fleet.scenario_gen import TRANSITIONS, ScenarioFamily, default_params, make_scenario, make_transition
from dubins_fleet.separation import SeparationStats, are_separated
from dubins_fleet.workers import WorkerPool

PARAMS = VehicleParams(speed=15.0, min_turn_radius=40.0, separation=80.0)


def straight_scenario(lengths, gap: float = 500.0, **kwargs) -> Scenario:
    """Aircraft flying straight east on parallel tracks gap metres apart"""
    starts = [Pose(0, k * gap, 0) for k in range(len(lengths))]
    ends = [Pose(length, k * gap, 0) for k, length in enumerate(lengths)]
    return Scenario(starts=starts, ends=ends, params=PARAMS, **kwargs)


def head_on_scenario() -> Scenario:
    return Scenario(
        starts=[Pose(0, 0, 0), Pose(1000, 0, math.pi)],
        ends=[Pose(1000, 0, 0), Pose(0, 0, math.pi)],
        params=PARAMS,
    )


def dense_fleet_min(paths, dt: float = 1e-3) -> float:
    horizon = min(path.duration for path in paths)
    times = np.arange(0.0, horizon, dt)
    samples = [sample_positions(path, times) for path in paths]
    return min(float(np.min(np.abs(a - b))) for a, b in itertools.combinations(samples, 2))


# ============================================================================
# CONFIGURATION AND SCENARIO
# ============================================================================

def test_planner_config_defaults_and_validation():
    config = PlannerConfig()
    assert config.time_ratio == 3.0
    assert config.resample_count == 2
    with pytest.raises(ValidationError):
        PlannerConfig(time_ratio=1.0)
    with pytest.raises(ValidationError):
        PlannerConfig(resample_count=0)
    with pytest.raises(ValidationError):
        PlannerConfig(max_iters=10)


def test_min_width_default_scales_with_tau_min():
    config = PlannerConfig()
    assert config.resolve_min_width(10.0) == 0.1
    assert config.resolve_min_width(1000.0) == pytest.approx(0.3)
    assert PlannerConfig(min_width=2.0).resolve_min_width(1000.0) == 2.0


@pytest.mark.parametrize("kwargs", [
    {"starts": [], "ends": []},
    {"starts": [Pose(0, 0, 0)], "ends": []},
    {"starts": [Pose(0, 0, 0)], "ends": [Pose(100, 0, 0)], "wind": 15.0},
    {"starts": [Pose(0, 0, 0)], "ends": [Pose(100, 0, 0)], "arrival_offsets": [1.0]},
    {"starts": [Pose(0, 0, 0)] * 2, "ends": [Pose(100, 0, 0)] * 2, "arrival_offsets": [0.0, -1.0]},
])
def test_invalid_scenarios_are_rejected(kwargs):
    with pytest.raises(InvalidScenario):
        Scenario(params=PARAMS, **kwargs)


def test_scenario_accepts_wind_tuple_and_accumulates_offsets():
    scenario = straight_scenario([150, 150, 150], wind=(3.0, -4.0), arrival_offsets=[0, 2, 3])
    assert scenario.wind == complex(3, -4)
    assert list(scenario.cumulative_offsets()) == [0.0, 2.0, 5.0]
    assert scenario.flight_time(2, 10.0) == 15.0


# ============================================================================
# BOUNDS AND WIND
# ============================================================================

def test_initial_bounds_equal_times():
    assert initial_bounds(straight_scenario([150, 150]), 3.0) == pytest.approx((10.0, 30.0))


def test_initial_bounds_take_the_slowest_aircraft():
    tau_min, _ = initial_bounds(straight_scenario([150, 300]))
    assert tau_min == pytest.approx(20.0)


def test_initial_bounds_subtract_offsets():
    tau_min, _ = initial_bounds(straight_scenario([150, 150], arrival_offsets=[0, 5]))
    assert tau_min == pytest.approx(10.0)


def test_wind_shifted_end():
    end = Pose(1000, 0, 0)
    assert wind_shifted_end(end, 0j, 20.0) == end
    shifted = wind_shifted_end(end, 10 + 0j, 20.0)
    assert shifted.is_close(Pose(800, 0, 0))


def test_ground_track_adds_drift():
    _, path = shortest_dubins(Pose(0, 0, 0), Pose(150, 0, 0), PARAMS)
    assert ground_track(path, 2 + 1j, 4.0) == pytest.approx(evaluate(path, 4.0).position + 8 + 4j)


# ============================================================================
# TIME QUEUE
# ============================================================================

def test_resample_adds_evenly_spaced_times():
    queue = TimeQueue([10.0, 30.0])
    assert resample(queue, 2, 0.1) == 2
    taus = [tau for tau, _ in queue.entries]
    assert taus == pytest.approx([10.0, 10.0 + 20.0 / 3, 10.0 + 40.0 / 3, 30.0])


def test_resample_skips_narrow_gaps():
    queue = TimeQueue([10.0, 10.05])
    assert resample(queue, 2, 0.1) == 0
    assert len(queue) == 2


def test_single_resample_bisects():
    queue = TimeQueue([4.0, 9.0])
    assert resample(queue, 1, 0.1) == 1
    assert [tau for tau, _ in queue.entries] == [4.0, 6.5, 9.0]


def test_queue_deduplicates_and_marks():
    queue = TimeQueue([10.0, 20.0])
    assert not queue.add(10.0 + 1e-10)
    queue.mark_tested(10.0)
    assert queue.untested() == [20.0]
    with pytest.raises(KeyError):
        queue.mark_tested(15.0)


def test_prune_keeps_tested_best_and_drops_above():
    queue = TimeQueue([10.0, 15.0, 20.0, 30.0])
    queue.add(12.0, tested=True)
    queue.mark_tested(10.0)
    queue.mark_tested(15.0)
    assert queue.prune(15.0) == 2
    assert queue.entries == [(10.0, True), (12.0, True), (15.0, True)]


def test_refinement_never_requeues_tested_times():
    # times at or above 17.3 s are feasible
    queue = TimeQueue([10.0, 30.0])
    tested, best = [], None
    for _ in range(500):
        untested = queue.untested()
        if not untested:
            if best is not None:
                queue.prune(best)
            if queue.resample(2, 0.5) == 0:
                break
            continue
        tau = untested[0]
        queue.mark_tested(tau)
        tested.append(tau)
        if tau >= 17.3 and (best is None or tau < best):
            best = tau
    ordered = sorted(tested)
    assert all(b - a > QUEUE_TOLERANCE for a, b in zip(ordered, ordered[1:]))
    taus = [tau for tau, _ in queue.entries]
    assert all(b - a > QUEUE_TOLERANCE for a, b in zip(taus, taus[1:]))
    assert 17.3 <= best <= 17.8


# ============================================================================
# ASSIGNMENT
# ============================================================================

def test_assignment_avoids_single_conflict():
    matrix = ConflictMatrix([2, 2])
    matrix.set_block(0, 1, np.array([[True, False], [False, False]]))
    assert solve_assignment(matrix, [2, 2]) == [0, 1]


def test_assignment_all_conflicting_is_none():
    matrix = ConflictMatrix([2, 3])
    matrix.set_block(0, 1, np.ones((2, 3), dtype=bool))
    assert solve_assignment(matrix, [2, 3]) is None


def test_assignment_empty_candidate_set_is_none():
    assert solve_assignment(ConflictMatrix([2, 0]), [2, 0]) is None


def test_block_is_stored_once_and_transposed():
    matrix = ConflictMatrix([2, 3])
    block = np.array([[True, False, False], [False, False, True]])
    matrix.set_block(1, 0, block.T)
    assert np.array_equal(matrix.block(0, 1), block)
    assert matrix.conflict(1, 0, 2, 1)
    with pytest.raises(ValueError):
        matrix.set_block(0, 1, np.zeros((3, 3), dtype=bool))


def test_assignment_matches_brute_force_on_random_matrices():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        sizes = [int(size) for size in rng.integers(1, 7, size=n)]
        density = rng.uniform(0.05, 0.5)
        blocks = {
            (a, b): rng.random((sizes[a], sizes[b])) < density
            for a, b in itertools.combinations(range(n), 2)
        }
        matrix = ConflictMatrix.from_blocks(sizes, blocks)
        assert solve_assignment(matrix, sizes) == brute_force_assignment(matrix, sizes)


# ============================================================================
# CANDIDATES AND CONFLICTS
# ============================================================================

def test_candidates_empty_below_every_shortest_time():
    assert build_candidates(straight_scenario([150, 300]), 9.0) == [[], []]


def test_single_aircraft_candidates_contain_shortest_path():
    candidates = build_candidates(straight_scenario([150]), 10.0)
    assert any(path.total_length == pytest.approx(150.0, abs=1e-6) for path in candidates[0])


def test_identical_aircraft_conflict():
    scenario = Scenario(starts=[Pose(0, 0, 0)] * 2, ends=[Pose(150, 0, 0)] * 2, params=PARAMS)
    matrix = build_conflict_matrix(build_candidates(scenario, 10.0), PARAMS.separation)
    assert matrix.conflict(0, 1, 0, 0)


def test_distant_aircraft_never_conflict():
    scenario = straight_scenario([400, 400], gap=10_000.0)
    candidates = build_candidates(scenario, 40.0)
    stats = SeparationStats()
    matrix = build_conflict_matrix(candidates, PARAMS.separation, stats=stats)
    assert not matrix.block(0, 1).any()
    assert stats.pair_checks == 0


def test_conflict_matrix_stops_at_deadline():
    candidates = build_candidates(straight_scenario([150, 150]), 12.0)
    assert build_conflict_matrix(candidates, PARAMS.separation, deadline=0.0) is None


@pytest.mark.parametrize("lengths", [[150, 300], [300, 150]])
def test_conflict_matrix_with_an_empty_candidate_list(lengths):
    candidates = build_candidates(straight_scenario(lengths), 12.0)
    sizes = [len(paths) for paths in candidates]
    assert sorted(sizes)[0] == 0 and sorted(sizes)[1] > 0
    matrix = build_conflict_matrix(candidates, PARAMS.separation)
    assert matrix.block(0, 1).shape == (sizes[0], sizes[1])
    assert solve_assignment(matrix, sizes) is None


def test_candidates_from_a_process_pool_match_inline_fits():
    scenario = head_on_scenario()
    inline = build_candidates(scenario, 80.0)
    with WorkerPool(2, processes=True) as pool:
        pooled = build_candidates(scenario, 80.0, pool)
    assert [[str(p.word) for p in paths] for paths in pooled] == [[str(p.word) for p in paths] for paths in inline]
    assert [[p.total_length for p in paths] for paths in pooled] == [[p.total_length for p in paths] for paths in inline]


# ============================================================================
# PLANNING LOOP
# ============================================================================

def test_single_aircraft_solves_in_one_iteration():
    scenario = Scenario(starts=[Pose(0, 0, 0)], ends=[Pose(400, 250, 2.0)], params=PARAMS)
    shortest, _ = shortest_dubins(scenario.starts[0], scenario.ends[0], PARAMS)
    result = plan_fleet(scenario, PlannerConfig(workers=1))
    assert result.status is PlanStatus.SOLVED
    assert result.iterations_used == 1
    assert result.tau == pytest.approx(shortest)
    assert result.stop_reason is StopReason.NO_PROGRESS
    assert validate_plan(scenario, result) == []


def test_head_on_swap_is_separated():
    scenario = head_on_scenario()
    result = plan_fleet(scenario, PlannerConfig(max_iterations=40, min_width=2.0, workers=2))
    assert result.status is PlanStatus.SOLVED
    assert result.tau > 1000.0 / 15.0
    assert validate_plan(scenario, result) == []
    assert dense_fleet_min(result.paths) > PARAMS.separation
    assert result.best_history == sorted(result.best_history, reverse=True)


def test_head_on_with_one_iteration_hits_the_limit():
    result = plan_fleet(head_on_scenario(), PlannerConfig(max_iterations=1, workers=1))
    assert result.status is PlanStatus.ITERATION_LIMIT
    assert result.stop_reason is StopReason.ITERATION_LIMIT
    assert result.iterations_used == 1
    assert result.paths == []


def test_tiny_timeout_reports_timeout():
    result = plan_fleet(head_on_scenario(), PlannerConfig(timeout=1e-9, workers=1))
    assert result.status is PlanStatus.TIMEOUT
    assert result.stop_reason is StopReason.TIMEOUT
    assert result.tau is None


def test_inseparable_starts_give_no_solution():
    scenario = Scenario(
        starts=[Pose(0, 0, 0), Pose(0, 10, 0)],
        ends=[Pose(600, 0, 0), Pose(600, 400, 0)],
        params=PARAMS,
    )
    result = plan_fleet(scenario, PlannerConfig(min_width=1000.0, workers=1))
    assert result.status is PlanStatus.NO_SOLUTION
    assert result.stop_reason is StopReason.NO_PROGRESS
    assert result.iterations_used == 2
    assert validate_plan(scenario, result) == ["Plan is not solved (NoSolution)"]


def test_wind_plan_lands_on_ground_targets():
    scenario = Scenario(
        starts=[Pose(0, 0, 0), Pose(0, 600, 0)],
        ends=[Pose(1000, 0, 0), Pose(1000, 600, 0)],
        params=PARAMS,
        wind=-5 + 0j,
    )
    result = plan_fleet(scenario, PlannerConfig(workers=1))
    assert result.status is PlanStatus.SOLVED
    assert validate_plan(scenario, result) == []
    # headwind: the air path covers the ground distance plus the drift
    assert result.tau >= 100.0 - 1e-6
    assert result.paths[0].total_length == pytest.approx(1000.0 + 5.0 * result.tau, abs=1e-3)


def test_arrival_offsets_delay_later_aircraft():
    scenario = straight_scenario([300, 300], gap=600.0, arrival_offsets=[0, 5])
    result = plan_fleet(scenario, PlannerConfig(workers=1))
    assert result.status is PlanStatus.SOLVED
    assert result.paths[1].duration == pytest.approx(result.paths[0].duration + 5.0, abs=1e-6)
    assert validate_plan(scenario, result) == []


def test_plan_is_independent_of_worker_count():
    scenario = head_on_scenario()
    results = [plan_fleet(scenario, PlannerConfig(max_iterations=20, min_width=2.0, workers=w)) for w in (1, 4)]
    assert results[0].status == results[1].status
    assert results[0].tau == results[1].tau
    assert results[0].assignment == results[1].assignment
    assert [str(p.word) for p in results[0].paths] == [str(p.word) for p in results[1].paths]


def test_stop_reasons_map_onto_statuses():
    statuses = {status.value for status in PlanStatus}
    assert StopReason.NO_PROGRESS.value not in statuses
    assert {reason.value for reason in StopReason if reason is not StopReason.NO_PROGRESS} <= statuses


def test_planner_never_retests_a_time(monkeypatch):
    tested = []
    original = fleet_planner._test_time

    def recording(scenario, tau, *args):
        tested.append(tau)
        return original(scenario, tau, *args)

    monkeypatch.setattr(fleet_planner, "_test_time", recording)
    result = plan_fleet(head_on_scenario(), PlannerConfig(max_iterations=40, min_width=2.0, workers=1))
    assert result.status is PlanStatus.SOLVED
    assert len(tested) == result.iterations_used
    ordered = sorted(tested)
    assert all(b - a > QUEUE_TOLERANCE for a, b in zip(ordered, ordered[1:]))


@pytest.mark.parametrize("seed", [2, 6, 11])
def test_solved_random_plans_pass_the_separation_check(seed):
    scenario = make_scenario(ScenarioFamily.FULL_RNG, 4, seed=seed)
    result = plan_fleet(scenario, PlannerConfig(timeout=60.0, max_iterations=80, workers=1))
    assert result.status is PlanStatus.SOLVED
    assert are_separated(scenario.params.separation, result.paths)
    assert validate_plan(scenario, result) == []


def test_validate_plan_flags_turns_tighter_than_the_vehicle_allows():
    scenario = Scenario(starts=[Pose(0, 0, 0)], ends=[Pose(400, 250, 2.0)], params=PARAMS)
    result = plan_fleet(scenario, PlannerConfig(workers=1))
    assert validate_plan(scenario, result) == []
    sluggish = VehicleParams(speed=15.0, min_turn_radius=400.0, separation=80.0)
    problems = validate_plan(Scenario(starts=scenario.starts, ends=scenario.ends, params=sluggish), result)
    assert any("turns at" in problem for problem in problems)


@pytest.mark.slow
def test_windy_transition_is_separated_on_the_ground():
    starts, ends = make_transition(TRANSITIONS[0], 6)
    params = default_params()
    scenario = Scenario(starts=starts, ends=ends, params=params, wind=10 + 0j)
    result = plan_fleet(scenario, PlannerConfig(workers=2))
    assert result.status is PlanStatus.SOLVED
    assert validate_plan(scenario, result) == []

    times = np.arange(0.0, result.tau, 1e-3)
    ground = [sample_positions(path, times) + scenario.wind * times for path in result.paths]
    for path, end in zip(result.paths, ends):
        assert abs(ground_track(path, scenario.wind, path.duration) - end.position) < 1e-3
    ground_min = min(float(np.min(np.abs(a - b))) for a, b in itertools.combinations(ground, 2))
    assert ground_min > params.separation
    assert dense_fleet_min(result.paths) > params.separation
