#!/usr/bin/env python3
"""
Tests for the basic Dubins path family: construction, shortest path,
evaluation and the RK4 flight oracle.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dubins_fleet.dubins_core import (
    BASIC_WORDS,
    EXTENSION_RATIOS,
    Extension,
    PathWord,
    Pose,
    VehicleParams,
    WordTag,
    build_path,
    build_word,
    evaluate,
    integrate_path,
    normalize_angle,
    sample_positions,
    shortest_dubins,
    word_length,
)
from dubins_fleet.errors import OutOfDomain

PARAMS = VehicleParams(speed=15.0, min_turn_radius=40.0, separation=80.0)


def random_pose_pairs(count: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        x0, y0, x1, y1 = rng.uniform(0.0, 1000.0, size=4)
        t0, t1 = rng.uniform(-math.pi, math.pi, size=2)
        yield Pose(x0, y0, t0), Pose(x1, y1, t1)


# ============================================================================
# POSES AND PARAMETERS
# ============================================================================

def test_normalize_angle_maps_minus_pi_to_pi():
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    assert normalize_angle(0.0) == 0.0


@given(st.floats(min_value=-100.0, max_value=100.0, allow_nan=False))
def test_normalize_angle_range_and_direction(theta):
    wrapped = normalize_angle(theta)
    assert -math.pi < wrapped <= math.pi
    assert math.cos(wrapped) == pytest.approx(math.cos(theta), abs=1e-9)
    assert math.sin(wrapped) == pytest.approx(math.sin(theta), abs=1e-9)


def test_pose_normalizes_heading():
    assert Pose(0, 0, 2 * math.pi + 0.5).theta == pytest.approx(0.5)


@pytest.mark.parametrize("speed, radius, separation", [(0, 40, 80), (15, -1, 80), (15, 40, 0)])
def test_vehicle_params_reject_non_positive(speed, radius, separation):
    with pytest.raises(ValueError):
        VehicleParams(speed=speed, min_turn_radius=radius, separation=separation)


def test_path_word_text_round_trip():
    for tag in BASIC_WORDS:
        for extension in Extension:
            word = PathWord(tag, extension)
            assert PathWord.parse(str(word)) == word
    assert str(PathWord(WordTag.LSL, Extension.START)) == "S-LSL"
    with pytest.raises(ValueError):
        PathWord.parse("X-LSL")


# ============================================================================
# SHORTEST PATH
# ============================================================================

def test_straight_ahead_is_a_straight_line():
    duration, path = shortest_dubins(Pose(0, 0, 0), Pose(100, 0, 0), PARAMS)
    assert path.total_length == pytest.approx(100.0, abs=1e-9)
    assert duration == pytest.approx(100.0 / 15.0)


def test_u_turn_is_a_semicircle():
    duration, path = shortest_dubins(Pose(0, 0, 0), Pose(0, 80, math.pi), PARAMS)
    assert path.total_length == pytest.approx(40 * math.pi, abs=1e-9)
    assert path.word.tag is WordTag.LSL
    middle = evaluate(path, duration / 2)
    assert middle.x == pytest.approx(40.0, abs=1e-9)
    assert middle.y == pytest.approx(40.0, abs=1e-9)
    assert middle.theta == pytest.approx(math.pi / 2, abs=1e-9)


def test_lsl_length_grows_linearly_with_radius():
    start, end = Pose(0, 0, 0), Pose(0, 200, math.pi)
    for radius in (40.0, 55.0, 80.0, 99.0):
        assert word_length(WordTag.LSL, start, end, radius) == pytest.approx(200 + radius * (math.pi - 2), abs=1e-9)


def test_single_turn_word_needs_turn_below_half_circle():
    start = Pose(0, 0, 0)
    assert word_length(WordTag.SLS, start, Pose(200, 200, math.pi / 2), 40.0) is not None
    assert word_length(WordTag.SLS, start, Pose(0, 80, math.pi), 40.0) is None
    assert word_length(WordTag.SRS, start, Pose(200, 200, math.pi / 2), 40.0) is None


def test_shortest_equals_minimum_over_words():
    for start, end in random_pose_pairs(300):
        duration, path = shortest_dubins(start, end, PARAMS)
        lengths = [word_length(tag, start, end, PARAMS.min_turn_radius) for tag in BASIC_WORDS]
        assert path.total_length == min(length for length in lengths if length is not None)
        assert duration == pytest.approx(path.total_length / PARAMS.speed)


def test_built_word_length_matches_length_only_evaluation():
    for start, end in random_pose_pairs(50, seed=11):
        for tag in BASIC_WORDS:
            path = build_word(PathWord(tag), start, end, 55.0, 15.0)
            length = word_length(tag, start, end, 55.0)
            assert (path is None) == (length is None)
            if path is not None:
                assert path.total_length == pytest.approx(length, abs=1e-12)


def test_rk4_flight_reaches_end_pose():
    for start, end in random_pose_pairs(100, seed=3):
        _, path = shortest_dubins(start, end, PARAMS)
        landed = integrate_path(path, max_step=0.05)
        assert abs(landed.position - end.position) < 1e-5
        assert abs(normalize_angle(landed.theta - end.theta)) < 1e-6


@pytest.mark.slow
def test_thousand_pairs_are_shortest_and_flyable():
    for start, end in random_pose_pairs(1000, seed=1000):
        _, path = shortest_dubins(start, end, PARAMS)
        lengths = [word_length(tag, start, end, PARAMS.min_turn_radius) for tag in BASIC_WORDS]
        assert path.total_length == min(length for length in lengths if length is not None)
        landed = integrate_path(path, max_step=0.05)
        assert abs(landed.position - end.position) < 1e-5
        assert abs(normalize_angle(landed.theta - end.theta)) < 1e-6


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0, 1000), st.floats(0, 1000), st.floats(-math.pi, math.pi),
    st.floats(0, 1000), st.floats(0, 1000), st.floats(-math.pi, math.pi),
)
def test_flying_backwards_has_the_same_length(x0, y0, t0, x1, y1, t1):
    start, end = Pose(x0, y0, t0), Pose(x1, y1, t1)
    forward, _ = shortest_dubins(start, end, PARAMS)
    backward, _ = shortest_dubins(Pose(x1, y1, t1 + math.pi), Pose(x0, y0, t0 + math.pi), PARAMS)
    assert backward == pytest.approx(forward, abs=1e-6)


def test_every_word_and_extension_ends_at_end_pose():
    for start, end in random_pose_pairs(20, seed=5):
        for tag in BASIC_WORDS:
            for ratio in EXTENSION_RATIOS:
                word = PathWord(tag, Extension.from_ratio(ratio))
                path = build_path(word, start, end, 40.0, 15.0, extension_length=120.0)
                if path is None:
                    continue
                assert path.total_length == pytest.approx(sum(p.speed * p.duration for p in path.primitives), abs=1e-9)
                landed = evaluate(path, path.duration)
                assert landed.is_close(end, tol=1e-6)


def test_build_word_rejects_extended_words():
    with pytest.raises(ValueError):
        build_word(PathWord(WordTag.LSL, Extension.END), Pose(0, 0, 0), Pose(100, 0, 0), 40.0, 15.0)


# ============================================================================
# EVALUATION
# ============================================================================

def test_evaluate_outside_domain_raises():
    _, path = shortest_dubins(Pose(0, 0, 0), Pose(300, 100, 1.0), PARAMS)
    with pytest.raises(OutOfDomain):
        evaluate(path, -0.5)
    with pytest.raises(OutOfDomain):
        evaluate(path, path.duration + 1.0)
    assert evaluate(path, 0.0) == path.start


def test_sample_positions_agree_with_evaluate():
    _, path = shortest_dubins(Pose(10, -20, 2.0), Pose(500, 300, -1.0), PARAMS)
    times = np.linspace(0.0, path.duration, 57)
    sampled = sample_positions(path, times)
    for t, z in zip(times, sampled):
        assert abs(evaluate(path, float(t)).position - z) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-500, 500), st.floats(-500, 500), st.floats(-math.pi, math.pi),
    st.floats(-500, 500), st.floats(-500, 500), st.floats(-math.pi, math.pi),
)
def test_path_is_flown_at_constant_speed(x0, y0, t0, x1, y1, t1):
    _, path = shortest_dubins(Pose(x0, y0, t0), Pose(x1, y1, t1), PARAMS)
    for primitive in path.primitives:
        if primitive.duration > 0:
            assert primitive.speed == pytest.approx(PARAMS.speed)
            assert abs(primitive.turn_rate) <= PARAMS.max_turn_rate + 1e-12


def test_identical_poses_give_an_empty_path():
    pose = Pose(120, -40, 0.7)
    duration, path = shortest_dubins(pose, pose, PARAMS)
    assert duration == 0.0
    assert path.total_length == 0.0
    assert evaluate(path, 0.0).is_close(pose)


def test_ccc_word_infeasible_for_distant_circles():
    assert build_word(PathWord(WordTag.RLR), Pose(0, 0, 0), Pose(300, 0, 0), 40.0, 15.0) is None
    assert word_length(WordTag.LRL, Pose(0, 0, 0), Pose(300, 0, 0), 40.0) is None
