#!/usr/bin/env python3
"""
Desk-scale benchmark sweep.

Runs the three scenario families for fleets of 3 to 8 aircraft plus a
12-aircraft smoke run, writes one CSV, and checks:
- every case with n <= 8 is solved
- at least 90% of the 12-aircraft RngToFormation cases are solved
- at n = 8, median wall time ranks Formation >= RngToFormation >= FullRng
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from dubins_fleet.cli import BENCH_COLUMNS, run_case, summarize  # noqa: E402
from dubins_fleet.config import DEFAULT_MAX_ITERATIONS, DEFAULT_TIMEOUT, configure_logging, get_default_seed  # noqa: E402
from dubins_fleet.fleet_planner import PlanStatus  # noqa: E402
from dubins_fleet.scenario_gen import ScenarioFamily, case_seed  # noqa: E402

SMOKE_SIZE = 12
SMOKE_FAMILY = ScenarioFamily.RNG_TO_FORMATION


def _run(case: tuple) -> dict:
    return run_case(*case)


def main() -> int:
    parser = argparse.ArgumentParser(description="Desk-scale success-rate and runtime sweep")
    parser.add_argument("--cases", type=int, default=50, help="Cases per family and fleet size")
    parser.add_argument("--smoke-cases", type=int, default=10, help="Cases for the 12-aircraft run")
    parser.add_argument("--n-max", type=int, default=8)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=4, help="Parallel processes")
    parser.add_argument("--out", default="desk_benchmark.csv")
    args = parser.parse_args()
    configure_logging()

    root_seed = args.seed if args.seed is not None else get_default_seed()
    cases = [
        (family.value, n, case_seed(root_seed, n, case), DEFAULT_TIMEOUT, DEFAULT_MAX_ITERATIONS, 1)
        for family in ScenarioFamily
        for n in range(3, args.n_max + 1)
        for case in range(args.cases)
    ]
    cases += [
        (SMOKE_FAMILY.value, SMOKE_SIZE, case_seed(root_seed, SMOKE_SIZE, case), DEFAULT_TIMEOUT, DEFAULT_MAX_ITERATIONS, 1)
        for case in range(args.smoke_cases)
    ]
    print(f"Running {len(cases)} cases on {args.jobs} processes (seed={root_seed})")
    with ProcessPoolExecutor(max_workers=args.jobs) as executor:
        rows = list(executor.map(_run, cases))

    frame = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    frame.to_csv(args.out, index=False, float_format="%.9f")
    print(summarize(frame))
    print(f"✓ Wrote {args.out}")

    solved = frame["status"] == PlanStatus.SOLVED.value
    checks = []
    small = frame["n"] <= args.n_max
    checks.append(("All cases with n <= %d solved" % args.n_max, bool(solved[small].all())))
    smoke = (frame["n"] == SMOKE_SIZE) & (frame["family"] == SMOKE_FAMILY.value)
    checks.append((f"{SMOKE_SIZE}-aircraft success >= 90%", bool(solved[smoke].mean() >= 0.9)))

    at_max = frame[frame["n"] == args.n_max].groupby("family")["wall_time_s"].median()
    ordering = (
        at_max.get(ScenarioFamily.FORMATION.value, 0.0)
        >= at_max.get(ScenarioFamily.RNG_TO_FORMATION.value, 0.0)
        >= at_max.get(ScenarioFamily.FULL_RNG.value, 0.0)
    )
    checks.append((f"Median time ordering at n={args.n_max}", bool(ordering)))

    for label, ok in checks:
        print(f"{'✓' if ok else '✗'} {label}")
    return 0 if all(ok for _, ok in checks) else 1


if __name__ == "__main__":
    sys.exit(main())
