"""
File formats for scenarios and plan results (JSON, "format": 1).

Angles are radians, distances meters, times seconds. Unknown keys are
rejected so that a typo never silently falls back to a default.
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .config import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_RESAMPLE_COUNT,
    DEFAULT_TIME_RATIO,
    DEFAULT_TIMEOUT,
    RNG_ALGORITHM,
)
from .dubins_core import ArcPrimitive, FleetPath, LinePrimitive, PathWord, Pose, VehicleParams
from .fleet_planner import PlannerConfig, PlanResult, Scenario
from .separation import timed_legs

logger = logging.getLogger(__name__)

PoseTriple = Tuple[float, float, float]
Vector = Tuple[float, float]


def _pose(triple: PoseTriple) -> Pose:
    return Pose(*triple)


def _triple(pose: Pose) -> PoseTriple:
    return (pose.x, pose.y, pose.theta)


def _vector(value: complex) -> Vector:
    return (value.real, value.imag)


# ============================================================================
# SCENARIO FILE
# ============================================================================

class VehicleBlock(BaseModel):
    """Flight characteristics shared by the whole fleet"""
    speed: float = Field(gt=0)             # V, m/s
    min_turn_radius: float = Field(gt=0)   # rho_min, m
    separation: float = Field(gt=0)        # delta, m

    model_config = ConfigDict(extra="forbid")


class AircraftBlock(BaseModel):
    start: PoseTriple    # [x, y, theta]
    end: PoseTriple
    arrival_offset: float = Field(0.0, ge=0)

    model_config = ConfigDict(extra="forbid")


class PlannerBlock(BaseModel):
    R: float = Field(DEFAULT_TIME_RATIO, gt=1)
    b: int = Field(DEFAULT_RESAMPLE_COUNT, ge=1)
    w: Optional[float] = Field(None, gt=0)   # null: max(0.1 s, R * tau_min * 1e-4)
    max_iterations: int = Field(DEFAULT_MAX_ITERATIONS, ge=1)
    timeout: float = Field(DEFAULT_TIMEOUT, gt=0)

    model_config = ConfigDict(extra="forbid")


class GeneratorBlock(BaseModel):
    """How a generated scenario was made, for replay"""
    algorithm: Literal["PCG64"] = RNG_ALGORITHM
    seed: int
    family: Literal["Formation", "RngToFormation", "FullRng"]
    mode: Literal["Independent", "Shifted", "Disk"] = "Independent"   # FullRng end states

    model_config = ConfigDict(extra="forbid")


class ScenarioFile(BaseModel):
    format: Literal[1] = 1
    vehicles: VehicleBlock
    wind: Vector = (0.0, 0.0)
    aircraft: List[AircraftBlock] = Field(min_length=1)
    planner: PlannerBlock = Field(default_factory=PlannerBlock)
    generator: Optional[GeneratorBlock] = None

    model_config = ConfigDict(extra="forbid")


def scenario_to_file(scenario: Scenario, config: Optional[PlannerConfig] = None,
                     generator: Optional[GeneratorBlock] = None) -> ScenarioFile:
    config = config or PlannerConfig()
    params = scenario.params
    return ScenarioFile(
        vehicles=VehicleBlock(speed=params.speed, min_turn_radius=params.min_turn_radius, separation=params.separation),
        wind=_vector(scenario.wind),
        aircraft=[
            AircraftBlock(start=_triple(start), end=_triple(end), arrival_offset=offset)
            for start, end, offset in zip(scenario.starts, scenario.ends, scenario.arrival_offsets)
        ],
        planner=PlannerBlock(
            R=config.time_ratio,
            b=config.resample_count,
            w=config.min_width,
            max_iterations=config.max_iterations,
            timeout=config.timeout,
        ),
        generator=generator,
    )


def scenario_from_file(document: ScenarioFile, workers: Optional[int] = None) -> Tuple[Scenario, PlannerConfig]:
    """Scenario and planner settings; raises InvalidScenario on broken invariants"""
    vehicles = document.vehicles
    params = VehicleParams(speed=vehicles.speed, min_turn_radius=vehicles.min_turn_radius, separation=vehicles.separation)
    scenario = Scenario(
        starts=[_pose(entry.start) for entry in document.aircraft],
        ends=[_pose(entry.end) for entry in document.aircraft],
        params=params,
        wind=complex(*document.wind),
        arrival_offsets=[entry.arrival_offset for entry in document.aircraft],
    )
    planner = document.planner
    config = PlannerConfig(
        time_ratio=planner.R,
        resample_count=planner.b,
        min_width=planner.w,
        max_iterations=planner.max_iterations,
        timeout=planner.timeout,
        workers=workers,
    )
    return scenario, config


def load_scenario_file(path: Path) -> ScenarioFile:
    """Read and validate a scenario file (OSError, JSONDecodeError, ValidationError propagate)"""
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return ScenarioFile.model_validate(raw)


# ============================================================================
# RESULT FILE
# ============================================================================

class PrimitiveBlock(BaseModel):
    """One line or arc with its absolute time window"""
    kind: Literal["line", "arc"]
    t_start: float
    t_end: float
    anchor: Optional[Vector] = None        # line: position at t_start
    velocity: Optional[Vector] = None      # line
    center: Optional[Vector] = None        # arc
    radius: Optional[float] = None         # arc
    angular_rate: Optional[float] = None   # arc, rad/s (> 0 counter-clockwise)
    phase: Optional[float] = None          # arc, angle at t_start

    model_config = ConfigDict(extra="forbid")


class AircraftPathBlock(BaseModel):
    word: str
    radius: float
    extension_length: float
    length: float
    duration: float
    speed: float
    start: PoseTriple
    end: PoseTriple
    primitives: List[PrimitiveBlock]

    model_config = ConfigDict(extra="forbid")


class TelemetryBlock(BaseModel):
    iterations: int
    wall_time_s: float
    pair_checks: int
    temporal_solves: int
    tau_min: float
    stop_reason: Literal["Timeout", "IterationLimit", "NoProgress"]
    best_history: List[float] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid")


class ResultFile(BaseModel):
    format: Literal[1] = 1
    status: Literal["Solved", "NoSolution", "Timeout", "IterationLimit"]
    tau: Optional[float] = None
    aircraft: List[AircraftPathBlock] = Field(default_factory=list)
    telemetry: TelemetryBlock

    model_config = ConfigDict(extra="forbid")


def _primitive_block(primitive, t_start: float) -> PrimitiveBlock:
    t_end = t_start + primitive.duration
    if isinstance(primitive, LinePrimitive):
        return PrimitiveBlock(
            kind="line", t_start=t_start, t_end=t_end,
            anchor=_vector(primitive.anchor), velocity=_vector(primitive.velocity),
        )
    return PrimitiveBlock(
        kind="arc", t_start=t_start, t_end=t_end,
        center=_vector(primitive.center), radius=primitive.radius,
        angular_rate=primitive.angular_rate, phase=primitive.phase,
    )


def path_to_block(path: FleetPath) -> AircraftPathBlock:
    return AircraftPathBlock(
        word=str(path.word),
        radius=path.radius,
        extension_length=path.extension_length,
        length=path.total_length,
        duration=path.duration,
        speed=path.speed,
        start=_triple(path.start),
        end=_triple(path.end),
        primitives=[_primitive_block(leg.primitive, leg.t_start) for leg in timed_legs(path)],
    )


def path_from_block(block: AircraftPathBlock) -> FleetPath:
    """Rebuild a FleetPath from its explicit primitives"""
    primitives = []
    for entry in block.primitives:
        duration = entry.t_end - entry.t_start
        if entry.kind == "line":
            primitives.append(LinePrimitive(anchor=complex(*entry.anchor), velocity=complex(*entry.velocity), duration=duration))
        else:
            primitives.append(ArcPrimitive(
                center=complex(*entry.center), radius=entry.radius,
                angular_rate=entry.angular_rate, phase=entry.phase, duration=duration,
            ))
    return FleetPath(
        word=PathWord.parse(block.word),
        primitives=tuple(primitives),
        radius=block.radius,
        extension_length=block.extension_length,
        total_length=block.length,
        start=_pose(block.start),
        end=_pose(block.end),
        speed=block.speed,
    )


def result_to_file(result: PlanResult) -> ResultFile:
    return ResultFile(
        status=result.status.value,
        tau=result.tau,
        aircraft=[path_to_block(path) for path in result.paths],
        telemetry=TelemetryBlock(
            iterations=result.iterations_used,
            wall_time_s=result.wall_time,
            pair_checks=result.pair_checks,
            temporal_solves=result.temporal_solves,
            tau_min=result.tau_min,
            stop_reason=result.stop_reason.value,
            best_history=result.best_history,
        ),
    )


def write_json(model: BaseModel, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2), encoding="utf-8")
    logger.debug(f"Wrote {path}")
