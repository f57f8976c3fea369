#!/usr/bin/env python3
"""
Tests for the command line: scenario and result files, exit codes, SVG
output and the benchmark CSV.
"""
import json
import math
import re

import pandas as pd
import pytest
from pydantic import ValidationError

from dubins_fleet.cli import BENCH_COLUMNS, EXIT_INPUT_ERROR, EXIT_SOLVED, EXIT_UNSOLVED, main
from dubins_fleet.dubins_core import Pose, VehicleParams, evaluate, sample_positions, shortest_dubins
from dubins_fleet.fleet_planner import PlannerConfig, Scenario
from dubins_fleet.schemas import (
    ResultFile,
    load_scenario_file,
    path_from_block,
    scenario_from_file,
    scenario_to_file,
)
from dubins_fleet.scenario_gen import RandomMode, ScenarioFamily, make_scenario
from dubins_fleet.separation import SCREEN_SAMPLES, screen_times
from dubins_fleet.svg_render import render_svg, write_svg

VEHICLES = {"speed": 15.0, "min_turn_radius": 40.0, "separation": 80.0}


def write_scenario(path, aircraft, wind=(0.0, 0.0), **extra):
    document = {"format": 1, "vehicles": VEHICLES, "wind": list(wind), "aircraft": aircraft, **extra}
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def parallel_aircraft():
    return [
        {"start": [0.0, 0.0, 0.0], "end": [800.0, 100.0, 0.0]},
        {"start": [0.0, 600.0, 0.0], "end": [800.0, 700.0, 0.0]},
    ]


# ============================================================================
# plan
# ============================================================================

def test_plan_writes_replayable_result(tmp_path):
    scenario_path = write_scenario(tmp_path / "two.json", parallel_aircraft())
    assert main(["plan", str(scenario_path), "--jobs", "1"]) == EXIT_SOLVED

    result = ResultFile.model_validate_json((tmp_path / "two.result.json").read_text(encoding="utf-8"))
    assert result.status == "Solved"
    assert len(result.aircraft) == 2
    assert result.telemetry.iterations >= 1
    for block, entry in zip(result.aircraft, parallel_aircraft()):
        path = path_from_block(block)
        assert path.duration == pytest.approx(result.tau, abs=1e-6)
        landed = evaluate(path, path.duration)
        assert abs(landed.position - complex(*entry["end"][:2])) < 1e-3
        assert block.primitives[0].t_start == 0.0
        assert block.primitives[-1].t_end == pytest.approx(block.duration, abs=1e-9)


def test_plan_rejects_wind_at_airspeed(tmp_path, capsys):
    scenario_path = write_scenario(tmp_path / "windy.json", parallel_aircraft(), wind=(20.0, 0.0))
    assert main(["plan", str(scenario_path)]) == EXIT_INPUT_ERROR
    assert "wind" in capsys.readouterr().err


def test_plan_rejects_unknown_keys(tmp_path, capsys):
    scenario_path = write_scenario(tmp_path / "typo.json", parallel_aircraft(), planer={"R": 2.0})
    assert main(["plan", str(scenario_path)]) == EXIT_INPUT_ERROR
    assert "planer" in capsys.readouterr().err


def test_plan_reports_missing_file(tmp_path):
    assert main(["plan", str(tmp_path / "missing.json")]) == EXIT_INPUT_ERROR


def test_plan_reports_unsolved_with_exit_two(tmp_path):
    aircraft = [
        {"start": [0.0, 0.0, 0.0], "end": [600.0, 0.0, 0.0]},
        {"start": [0.0, 10.0, 0.0], "end": [600.0, 400.0, 0.0]},
    ]
    scenario_path = write_scenario(tmp_path / "stuck.json", aircraft)
    out_path = tmp_path / "stuck-out.json"
    assert main(["plan", str(scenario_path), "--out", str(out_path), "--max-iters", "3", "--jobs", "1"]) == EXIT_UNSOLVED
    result = ResultFile.model_validate_json(out_path.read_text(encoding="utf-8"))
    assert result.status == "IterationLimit"
    assert result.tau is None
    assert result.aircraft == []


def test_plan_svg_endpoints_match_result(tmp_path):
    scenario_path = write_scenario(tmp_path / "svg.json", parallel_aircraft())
    out_path, svg_path = tmp_path / "svg-result.json", tmp_path / "plan.svg"
    assert main(["plan", str(scenario_path), "--out", str(out_path), "--svg", str(svg_path), "--jobs", "1"]) == EXIT_SOLVED

    result = ResultFile.model_validate_json(out_path.read_text(encoding="utf-8"))
    documents = re.findall(r'<path d="([^"]+)"', svg_path.read_text(encoding="utf-8"))
    assert len(documents) == len(result.aircraft)
    for d, block in zip(documents, result.aircraft):
        numbers = [float(token) for token in re.findall(r"-?\d+\.\d+", d)]
        x_start, y_start = numbers[0], -numbers[1]
        x_end, y_end = numbers[-2], -numbers[-1]
        assert math.hypot(x_start - block.start[0], y_start - block.start[1]) < 1e-6
        assert math.hypot(x_end - block.end[0], y_end - block.end[1]) < 1e-6


def test_demo_writes_both_wind_cases(tmp_path, capsys):
    out_dir = tmp_path / "demo"
    assert main(["demo", "--out", str(out_dir), "--count", "2", "--jobs", "1"]) == EXIT_SOLVED
    assert (out_dir / "demo_wind_0.svg").exists()
    assert (out_dir / "demo_wind_10.svg").exists()
    printed = capsys.readouterr().out
    assert printed.count("✓ wind") == 2


# ============================================================================
# generate and files
# ============================================================================

def test_generate_writes_a_loadable_scenario(tmp_path):
    out_path = tmp_path / "formation.json"
    assert main(["generate", "--family", "Formation", "--n", "3", "--seed", "0", "--out", str(out_path)]) == EXIT_SOLVED
    document = load_scenario_file(out_path)
    assert len(document.aircraft) == 3
    assert document.generator.seed == 0
    assert document.generator.algorithm == "PCG64"
    scenario, config = scenario_from_file(document)
    assert scenario.count == 3
    assert config.time_ratio == 3.0


def test_generate_rejects_unsupported_count(tmp_path):
    out_path = tmp_path / "tiny.json"
    # seed 0 is the circle to chevron transition
    assert main(["generate", "--family", "Formation", "--n", "1", "--seed", "0", "--out", str(out_path)]) == EXIT_INPUT_ERROR
    assert not out_path.exists()


def test_scenario_file_round_trip():
    params = VehicleParams(speed=20.0, min_turn_radius=50.0, separation=100.0)
    scenario = Scenario(
        starts=[Pose(0, 0, 0.5), Pose(300, 0, -1.0)],
        ends=[Pose(900, 100, 0.0), Pose(900, 500, 2.0)],
        params=params,
        wind=3 - 2j,
        arrival_offsets=[0.0, 4.0],
    )
    config = PlannerConfig(time_ratio=2.5, resample_count=3, min_width=0.5, max_iterations=50, timeout=5.0)
    document = scenario_to_file(scenario, config)
    loaded, loaded_config = scenario_from_file(type(document).model_validate_json(document.model_dump_json()))
    assert all(a.is_close(b) for a, b in zip(loaded.starts, scenario.starts))
    assert all(a.is_close(b) for a, b in zip(loaded.ends, scenario.ends))
    assert loaded.wind == scenario.wind
    assert loaded.arrival_offsets == scenario.arrival_offsets
    assert loaded.params == params
    assert loaded_config == config


# ============================================================================
# bench
# ============================================================================

def test_bench_writes_one_row_per_case(tmp_path):
    out_path = tmp_path / "bench.csv"
    argv = ["bench", "--family", "FullRng", "--n-min", "2", "--n-max", "3", "--cases", "2",
            "--seed", "1", "--timeout", "30", "--out", str(out_path)]
    assert main(argv) == EXIT_SOLVED
    frame = pd.read_csv(out_path)
    assert list(frame.columns) == BENCH_COLUMNS
    assert len(frame) == 4
    assert sorted(frame["n"].unique()) == [2, 3]

    repeat_path = tmp_path / "bench-repeat.csv"
    assert main(argv[:-1] + [str(repeat_path)]) == EXIT_SOLVED
    repeat = pd.read_csv(repeat_path)
    columns = [column for column in BENCH_COLUMNS if column != "wall_time_s"]
    pd.testing.assert_frame_equal(frame[columns], repeat[columns])


def test_generate_records_the_random_mode(tmp_path):
    out_path = tmp_path / "shifted.json"
    argv = ["generate", "--family", "FullRng", "--n", "3", "--seed", "4", "--mode", "Shifted", "--out", str(out_path)]
    assert main(argv) == EXIT_SOLVED
    document = load_scenario_file(out_path)
    assert document.generator.mode == "Shifted"
    scenario, _ = scenario_from_file(document)
    expected = make_scenario(ScenarioFamily.FULL_RNG, 3, seed=4, mode=RandomMode.SHIFTED)
    assert all(a.is_close(b) for a, b in zip(scenario.ends, expected.ends))


def test_result_file_has_no_progress_status():
    telemetry = {"iterations": 3, "wall_time_s": 0.1, "pair_checks": 0, "temporal_solves": 0,
                 "tau_min": 10.0, "stop_reason": "NoProgress"}
    assert ResultFile(status="NoSolution", telemetry=telemetry).telemetry.stop_reason == "NoProgress"
    with pytest.raises(ValidationError):
        ResultFile(status="NoProgress", telemetry=telemetry)


# ============================================================================
# svg
# ============================================================================

def test_svg_discs_sit_at_the_screening_instants():
    params = VehicleParams(**VEHICLES)
    paths = [shortest_dubins(Pose(0, 0, 0), Pose(600, y, 0), params)[1] for y in (0.0, 300.0)]
    document = render_svg(paths, params.separation)
    assert document.count("<circle") == SCREEN_SAMPLES * len(paths)
    centers = [float(x) for x in re.findall(r'<circle cx="([^"]+)"', document)]
    expected = sample_positions(paths[0], screen_times(paths[0].duration))
    assert centers[:SCREEN_SAMPLES] == pytest.approx(list(expected.real), abs=1e-3)


def test_write_svg_forwards_disc_times(tmp_path):
    params = VehicleParams(**VEHICLES)
    _, path = shortest_dubins(Pose(0, 0, 0), Pose(600, 0, 0), params)
    svg_path = tmp_path / "discs.svg"
    write_svg(svg_path, [path], params.separation, disc_times=[0.0, 10.0, 20.0])
    assert svg_path.read_text(encoding="utf-8").count("<circle") == 3
