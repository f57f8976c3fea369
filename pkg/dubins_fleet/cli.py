#!/usr/bin/env python3
"""
Command line front end for the fleet planner.

Usage:
    python -m dubins_fleet plan scenario.json --out result.json --svg plan.svg
    python -m dubins_fleet bench --family FullRng --n-min 3 --n-max 6 --cases 10 --out bench.csv
    python -m dubins_fleet demo --out demo/
    python -m dubins_fleet generate --family Formation --n 6 --seed 3 --out scenario.json

Files use meters, seconds and radians. Exit codes: 0 solved, 2 planner gave
up without a solution, 1 bad input.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from prettytable import PrettyTable
from pydantic import ValidationError

from .config import DEFAULT_MAX_ITERATIONS, DEFAULT_TIMEOUT, configure_logging, get_default_seed, get_worker_count
from .errors import FleetPlanningError
from .fleet_planner import PlannerConfig, PlanStatus, Scenario, plan_fleet, validate_plan
from .scenario_gen import (
    TRANSITIONS,
    RandomMode,
    ScenarioFamily,
    case_seed,
    default_params,
    make_scenario,
    make_transition,
)
from .schemas import (
    GeneratorBlock,
    load_scenario_file,
    result_to_file,
    scenario_from_file,
    scenario_to_file,
    write_json,
)
from .svg_render import write_svg

logger = logging.getLogger(__name__)

EXIT_SOLVED = 0
EXIT_INPUT_ERROR = 1
EXIT_UNSOLVED = 2

BENCH_COLUMNS = ["family", "mode", "n", "seed", "status", "tau", "wall_time_s", "iterations"]
DEMO_WIND = 10.0   # m/s, blowing towards +x


# ============================================================================
# plan
# ============================================================================

def cmd_plan(args: argparse.Namespace) -> int:
    """Plan one scenario file and write the result file"""
    try:
        document = load_scenario_file(args.scenario)
        scenario, config = scenario_from_file(document, workers=args.jobs)
        overrides = {}
        if args.timeout is not None:
            overrides["timeout"] = args.timeout
        if args.max_iters is not None:
            overrides["max_iterations"] = args.max_iters
        if overrides:
            config = PlannerConfig(**{**config.model_dump(), **overrides})
    except (OSError, json.JSONDecodeError, ValidationError, FleetPlanningError, ValueError) as e:
        logger.error(f"Cannot load {args.scenario}: {e}")
        print(f"✗ Invalid scenario {args.scenario}: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        result = plan_fleet(scenario, config)
    except FleetPlanningError as e:
        print(f"✗ Planning failed: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    out_path = Path(args.out) if args.out else Path(args.scenario).with_suffix(".result.json")
    try:
        write_json(result_to_file(result), out_path)
        if args.svg and result.paths:
            write_svg(args.svg, result.paths, scenario.params.separation, wind=scenario.wind,
                      title=Path(args.scenario).stem)
    except OSError as e:
        logger.error(f"Cannot write output: {e}")
        print(f"✗ Cannot write output: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    if not result.solved:
        print(f"✗ {result.status.value} after {result.iterations_used} iterations ({result.wall_time:.2f}s)")
        return EXIT_UNSOLVED
    print(f"✓ Solved: tau={result.tau:.3f}s, {len(result.paths)} aircraft, "
          f"{result.iterations_used} iterations, {result.wall_time:.2f}s")
    print(f"  Result written to {out_path}")
    return EXIT_SOLVED


# ============================================================================
# bench
# ============================================================================

def run_case(family: str, n: int, seed: int, timeout: float, max_iterations: int,
             workers: Optional[int] = None, mode: str = RandomMode.INDEPENDENT.value) -> Dict[str, object]:
    """One benchmark case; failures become a status string, never an exception"""
    row: Dict[str, object] = {"family": family, "mode": mode, "n": n, "seed": seed}
    try:
        scenario = make_scenario(ScenarioFamily(family), n, seed=seed, mode=RandomMode(mode))
        result = plan_fleet(scenario, PlannerConfig(timeout=timeout, max_iterations=max_iterations, workers=workers))
        row.update(status=result.status.value, tau=result.tau, wall_time_s=result.wall_time,
                   iterations=result.iterations_used)
    except FleetPlanningError as e:
        logger.warning(f"Case {family} n={n} seed={seed} failed: {e}")
        row.update(status=type(e).__name__, tau=None, wall_time_s=0.0, iterations=0)
    return row


def _run_case_args(case: tuple) -> Dict[str, object]:
    return run_case(*case)


def summarize(frame: pd.DataFrame) -> PrettyTable:
    """Success rate and wall-time quantiles per family and fleet size"""
    table = PrettyTable()
    table.field_names = ["family", "n", "cases", "success", "median s", "p90 s", "max s"]
    for (family, n), group in frame.groupby(["family", "n"], sort=False):
        solved = group["status"] == PlanStatus.SOLVED.value
        times = group["wall_time_s"]
        table.add_row([
            family, n, len(group), f"{solved.mean():.0%}",
            f"{times.quantile(0.5):.2f}", f"{times.quantile(0.9):.2f}", f"{times.max():.2f}",
        ])
    return table


def cmd_bench(args: argparse.Namespace) -> int:
    """Seeded Monte-Carlo sweep over families and fleet sizes"""
    families = args.family or [family.value for family in ScenarioFamily]
    root_seed = args.seed if args.seed is not None else get_default_seed()
    parallel = bool(args.jobs and args.jobs > 1)
    # Cases run in parallel processes; each planner then stays single-threaded
    workers = 1 if parallel else None
    cases = [
        (family, n, case_seed(root_seed, n, case), args.timeout, args.max_iters, workers, args.mode)
        for family in families
        for n in range(args.n_min, args.n_max + 1)
        for case in range(args.cases)
    ]
    print(f"Running {len(cases)} cases (families={families}, mode={args.mode}, n={args.n_min}..{args.n_max}, seed={root_seed})")

    if parallel:
        with ProcessPoolExecutor(max_workers=args.jobs) as executor:
            rows: List[Dict[str, object]] = list(executor.map(_run_case_args, cases))
    else:
        rows = []
        for index, case in enumerate(cases, start=1):
            rows.append(run_case(*case))
            logger.info(f"Case {index}/{len(cases)}: {rows[-1]['family']} n={rows[-1]['n']} -> {rows[-1]['status']}")

    frame = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, float_format="%.9f")
        print(f"✓ Wrote {len(frame)} rows to {out}")
    print(summarize(frame))
    print(f"Overall success rate: {(frame['status'] == PlanStatus.SOLVED.value).mean():.1%}")
    return EXIT_SOLVED


# ============================================================================
# demo
# ============================================================================

def cmd_demo(args: argparse.Namespace) -> int:
    """Circle to chevron transition, without and with a 10 m/s wind"""
    out_dir = Path(args.out)
    params = default_params()
    starts, ends = make_transition(TRANSITIONS[0], args.count)
    all_solved = True
    for wind in (0.0, DEMO_WIND):
        scenario = Scenario(starts=starts, ends=ends, params=params, wind=complex(wind, 0.0))
        result = plan_fleet(scenario, PlannerConfig(workers=args.jobs))
        svg_path = out_dir / f"demo_wind_{wind:g}.svg"
        if result.paths:
            write_svg(svg_path, result.paths, params.separation, wind=scenario.wind,
                      title=f"{TRANSITIONS[0].name}, wind {wind:g} m/s")
        if result.solved:
            problems = validate_plan(scenario, result)
            mark = "✓" if not problems else "✗"
            print(f"{mark} wind {wind:g} m/s: tau={result.tau:.3f}s (tau_min={result.tau_min:.3f}s), "
                  f"{result.iterations_used} iterations, {result.wall_time:.2f}s -> {svg_path}")
            for problem in problems:
                print(f"  ✗ {problem}")
            all_solved = all_solved and not problems
        else:
            print(f"✗ wind {wind:g} m/s: {result.status.value}")
            all_solved = False
    return EXIT_SOLVED if all_solved else EXIT_UNSOLVED


# ============================================================================
# generate
# ============================================================================

def cmd_generate(args: argparse.Namespace) -> int:
    """Write a seeded benchmark scenario as a scenario file"""
    try:
        scenario = make_scenario(ScenarioFamily(args.family), args.n, seed=args.seed, mode=RandomMode(args.mode))
    except FleetPlanningError as e:
        print(f"✗ Cannot generate scenario: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    generator = GeneratorBlock(seed=args.seed, family=args.family, mode=args.mode)
    try:
        write_json(scenario_to_file(scenario, generator=generator), Path(args.out))
    except OSError as e:
        print(f"✗ Cannot write {args.out}: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    print(f"✓ Wrote {args.family} scenario with {args.n} aircraft to {args.out}")
    return EXIT_SOLVED


# ============================================================================
# ENTRY POINT
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dubins_fleet",
        description="Synchronized conflict-free Dubins paths for a fixed-wing fleet (meters, seconds, radians)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    plan_parser = subparsers.add_parser("plan", help="Plan a scenario file")
    plan_parser.add_argument("scenario", help="Scenario JSON file")
    plan_parser.add_argument("--out", help="Result JSON file (default: <scenario>.result.json)")
    plan_parser.add_argument("--svg", help="Also render the paths to this SVG file")
    plan_parser.add_argument("--jobs", type=int, default=None, help="Parallel workers (capped by DUBINS_FLEET_THREADS)")
    plan_parser.add_argument("--timeout", type=float, default=None, help="Override the file's timeout (s)")
    plan_parser.add_argument("--max-iters", type=int, default=None, help="Override the file's iteration limit")
    plan_parser.set_defaults(handler=cmd_plan)

    families = [family.value for family in ScenarioFamily]
    modes = [mode.value for mode in RandomMode]
    bench_parser = subparsers.add_parser("bench", help="Run a seeded benchmark")
    bench_parser.add_argument("--family", action="append", choices=families, help="Scenario family (repeatable)")
    bench_parser.add_argument("--mode", choices=modes, default=RandomMode.INDEPENDENT.value,
                              help="How FullRng end states relate to the starts")
    bench_parser.add_argument("--n-min", type=int, default=3, help="Smallest fleet size")
    bench_parser.add_argument("--n-max", type=int, default=8, help="Largest fleet size")
    bench_parser.add_argument("--cases", type=int, default=10, help="Cases per family and fleet size")
    bench_parser.add_argument("--seed", type=int, default=None, help="Root seed (default: DUBINS_FLEET_SEED or 0)")
    bench_parser.add_argument("--out", help="CSV output file")
    bench_parser.add_argument("--jobs", type=int, default=None, help="Cases run in parallel processes")
    bench_parser.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="Per-case timeout (s)")
    bench_parser.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERATIONS, help="Per-case iteration limit")
    bench_parser.set_defaults(handler=cmd_bench)

    demo_parser = subparsers.add_parser("demo", help="Circle to chevron transition with and without wind")
    demo_parser.add_argument("--out", default="demo", help="Output directory for the SVG files")
    demo_parser.add_argument("--count", type=int, default=6, help="Number of aircraft")
    demo_parser.add_argument("--jobs", type=int, default=None, help="Parallel workers")
    demo_parser.set_defaults(handler=cmd_demo)

    generate_parser = subparsers.add_parser("generate", help="Write a seeded scenario file")
    generate_parser.add_argument("--family", choices=families, required=True)
    generate_parser.add_argument("--n", type=int, required=True, help="Number of aircraft")
    generate_parser.add_argument("--seed", type=int, default=0)
    generate_parser.add_argument("--mode", choices=modes, default=RandomMode.INDEPENDENT.value,
                                 help="How FullRng end states relate to the starts")
    generate_parser.add_argument("--out", required=True, help="Scenario JSON file")
    generate_parser.set_defaults(handler=cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(verbose=args.verbose)
    if getattr(args, "jobs", None) is not None and args.command != "bench":
        args.jobs = get_worker_count(args.jobs)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
