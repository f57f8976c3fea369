"""
Settings for the fleet planner.
Loads the project .env once, exposes the flight/planner defaults used by the
benchmark and the demo, and sets up logging for the command line.
"""

import os
import logging
from pathlib import Path
from typing import Optional

import psutil
from dotenv import load_dotenv

# Load .env from the repository root before anything reads the environment
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(env_path, override=False)

logger = logging.getLogger(__name__)

# ============================================================================
# FLIGHT PARAMETERS (fixed-wing drone, ~1 m wingspan)
# ============================================================================

DEFAULT_SPEED = 15.0            # m/s
DEFAULT_MIN_TURN_RADIUS = 40.0  # m
DEFAULT_SEPARATION = 80.0       # m

# ============================================================================
# PLANNER PARAMETERS
# ============================================================================

DEFAULT_TIME_RATIO = 3.0        # R
DEFAULT_RESAMPLE_COUNT = 2      # b
MIN_WIDTH_FLOOR = 0.1           # seconds, lower bound of w
MIN_WIDTH_FACTOR = 1e-4         # w = max(0.1, R * tau_min * 1e-4)
DEFAULT_MAX_ITERATIONS = 300
DEFAULT_TIMEOUT = 60.0          # seconds

# ============================================================================
# SCENARIO GENERATION
# ============================================================================

FORMATION_SPACING = 120.0       # m between neighbours in a formation
FORMATION_DISTANCE = 1000.0     # m between initial and final formations
RANDOM_AREA = 1000.0            # side of the sampling square, m
RANDOM_SEPARATION = 240.0       # m, delta + 2 * (2 * rho_min)
REPULSION_MAX_ITERATIONS = 10_000
RNG_ALGORITHM = "PCG64"


def get_worker_count(override: Optional[int] = None) -> int:
    """
    Number of worker threads the planner may use.

    DUBINS_FLEET_THREADS caps the pool; an explicit override (e.g. --jobs)
    is still clamped by that cap.
    """
    cpu_count = psutil.cpu_count(logical=True) or 1
    cap_env = os.getenv("DUBINS_FLEET_THREADS")
    cap = cpu_count
    if cap_env:
        try:
            cap = max(1, int(cap_env))
        except ValueError:
            logger.warning(f"Ignoring invalid DUBINS_FLEET_THREADS={cap_env!r}")
    requested = override if override is not None else cap
    return max(1, min(requested, cap))


def get_default_seed() -> int:
    """Root seed for benchmarks when --seed is not given"""
    try:
        return int(os.getenv("DUBINS_FLEET_SEED", "0"))
    except ValueError:
        return 0


def configure_logging(verbose: bool = False) -> None:
    """Configure root logging from DUBINS_FLEET_LOG_LEVEL (DEBUG when verbose)"""
    level_name = "DEBUG" if verbose else os.getenv("DUBINS_FLEET_LOG_LEVEL", "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
    )
