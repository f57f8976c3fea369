"""
Length Fit - Stretches basic paths so that they take exactly a prescribed time.

Two scalar problems are solved per word:
- radius fitting: grow the turn radius above rho_min until len(path) = target
- straight extension: prepend/append straight legs of total length l (split by
  ratio 1, 0 or 1/2) around a rho_min word between the shifted endpoints
Both use Brent's method over a subdivided bracket, since length as a function
of the parameter is mostly monotone but has jumps.
"""

import functools
import logging
import math
import sys
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dubins_core import (
    BASIC_WORDS,
    EXTENSION_RATIOS,
    Extension,
    FleetPath,
    PathWord,
    Pose,
    VehicleParams,
    WordTag,
    build_path,
    build_word,
    extension_endpoints,
    sample_positions,
    word_length,
)
from .errors import NoConvergence

logger = logging.getLogger(__name__)

PENALTY = sys.float_info.max   # objective value for infeasible geometry
PANEL_COUNT = 8
DEFAULT_X_TOLERANCE = 1e-10
DEFAULT_MAX_EVALS = 200
DEDUP_SAMPLES = 16
DEDUP_TOLERANCE = 1e-6          # m
LENGTH_CACHE_SIZE = 1 << 16
CLOCK_SLACK = 1e-9              # s


@dataclass(frozen=True)
class FitTarget:
    """Length a fitted path must have, with its acceptance tolerance"""
    target_length: float     # l = tau * V, m
    length_tolerance: float  # eps_fit, m

    def __post_init__(self):
        if not self.target_length > 0:
            raise ValueError(f"target_length must be > 0, got {self.target_length}")
        if not self.length_tolerance > 0:
            raise ValueError(f"length_tolerance must be > 0, got {self.length_tolerance}")

    @classmethod
    def for_time(cls, tau: float, speed: float) -> "FitTarget":
        length = tau * speed
        return cls(target_length=length, length_tolerance=fit_tolerance(length))


def fit_tolerance(target_length: float) -> float:
    """eps_fit = max(1e-6 m, 1e-9 * target length)"""
    return max(1e-6, 1e-9 * target_length)


def duration_tolerance(duration: float, speed: float) -> float:
    """Largest gap between the durations of two paths fitted to the same time"""
    return 2.0 * fit_tolerance(duration * speed) / speed + CLOCK_SLACK


# ============================================================================
# BRENT
# ============================================================================

def brent_minimize(
    objective: Callable[[float], float],
    bracket: Tuple[float, float],
    x_tolerance: float = DEFAULT_X_TOLERANCE,
    max_evals: int = DEFAULT_MAX_EVALS,
) -> Tuple[float, float]:
    """
    Bounded Brent minimization (golden section + parabolic interpolation).

    The two bracket ends are evaluated too and count against max_evals.

    Returns:
        (x*, f(x*))
    Raises:
        NoConvergence when max_evals is exhausted
    """
    lo, hi = bracket
    if not lo < hi:
        raise ValueError(f"Invalid bracket [{lo}, {hi}]")
    if max_evals < 3:
        raise ValueError(f"max_evals must be >= 3, got {max_evals}")
    result = minimize_scalar(
        objective,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": x_tolerance, "maxiter": max_evals - 2},
    )
    if not result.success:
        raise NoConvergence(f"Brent did not converge on [{lo}, {hi}] after {result.nfev} evaluations")
    x_best, f_best = float(result.x), float(result.fun)
    # The bounded method never evaluates the bracket ends themselves
    for edge in (lo, hi):
        f_edge = objective(edge)
        if f_edge < f_best:
            x_best, f_best = edge, f_edge
    return x_best, f_best


def _crosses(r0: Optional[float], r1: Optional[float]) -> bool:
    return r0 is not None and r1 is not None and (r0 < 0) != (r1 < 0)


def _may_dip(ra: Optional[float], rm: Optional[float], rb: Optional[float]) -> bool:
    """
    Whether the residual can approach zero inside a panel without a sampled
    sign change: a feasibility boundary lies inside, or the midpoint is
    closer to zero than both ends.
    """
    values = (ra, rm, rb)
    if all(r is None for r in values):
        return False
    if any(r is None for r in values):
        return True
    return abs(rm) < min(abs(ra), abs(rb))


def _fit_panel(
    residual: Callable[[float], Optional[float]],
    a: float,
    b: float,
    ra: Optional[float],
    rb: Optional[float],
    tolerance: float,
) -> Optional[Tuple[float, float]]:
    """Best (x, |residual|) within tolerance on [a, b], or None"""
    def value(x: float) -> float:
        r = residual(x)
        return PENALTY if r is None else r

    def squared(x: float) -> float:
        r = residual(x)
        return PENALTY if r is None else r * r

    found: List[Tuple[float, float]] = []

    def accept(x: Optional[float]) -> None:
        if x is None:
            return
        r = residual(x)
        if r is not None and abs(r) <= tolerance:
            found.append((x, abs(r)))

    for x, r in ((a, ra), (b, rb)):
        if r is not None and abs(r) <= tolerance:
            found.append((x, abs(r)))
    if _crosses(ra, rb):
        accept(_polish(value, a, b))

    if not found:
        mid = 0.5 * (a + b)
        rm = residual(mid)
        if _crosses(ra, rm):
            accept(_polish(value, a, mid))
        elif _crosses(rm, rb):
            accept(_polish(value, mid, b))
        elif _may_dip(ra, rm, rb):
            try:
                x_star, _ = brent_minimize(squared, (a, b))
            except NoConvergence:
                logger.debug(f"Brent gave up on panel [{a:.3f}, {b:.3f}]")
                x_star = None
            r_star = None if x_star is None else residual(x_star)
            if r_star is not None:
                accept(x_star)
                for x_edge, r_edge in ((a, ra), (b, rb)):
                    if not found and _crosses(r_edge, r_star):
                        accept(_polish(value, min(x_edge, x_star), max(x_edge, x_star)))
    if not found:
        return None
    return min(found, key=lambda item: item[1])


def _fit_scalar(
    residual: Callable[[float], Optional[float]],
    lo: float,
    hi: float,
    tolerance: float,
) -> Optional[float]:
    """
    Find x in [lo, hi] with |residual(x)| <= tolerance.

    The bracket is split into panels scanned in ascending order; within a panel
    a sign change is solved with Brent's root finder, otherwise Brent's
    minimizer looks for the closest approach (and a crossing next to it).
    Panels whose midpoint shows no dip towards zero are not minimized.
    Among the panels that fit, the smallest residual wins (the lowest x on ties).
    """
    edges = [float(x) for x in np.linspace(lo, hi, PANEL_COUNT + 1)]
    values = [residual(x) for x in edges]
    best: Optional[Tuple[float, float]] = None
    for a, b, ra, rb in zip(edges[:-1], edges[1:], values[:-1], values[1:]):
        fit = _fit_panel(residual, a, b, ra, rb, tolerance)
        if fit is not None and (best is None or fit[1] < best[1]):
            best = fit
            if best[1] == 0.0:
                break
    return None if best is None else best[0]


def _polish(value: Callable[[float], float], a: float, b: float) -> Optional[float]:
    if not a < b:
        return None
    try:
        return float(brentq(value, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200))
    except (ValueError, RuntimeError):
        return None


# ============================================================================
# LENGTH CURVES
# ============================================================================
# Length as a function of the fitted parameter depends on the word and the
# poses only; each tau just moves the target. Curves are cached so that the
# panel edges shared between successive taus are computed once.

@functools.lru_cache(maxsize=LENGTH_CACHE_SIZE)
def radius_curve(tag: WordTag, start: Pose, end: Pose, radius: float) -> Optional[float]:
    """Length of the basic word at the given radius"""
    return word_length(tag, start, end, radius)


@functools.lru_cache(maxsize=LENGTH_CACHE_SIZE)
def extension_curve(tag: WordTag, start: Pose, end: Pose, radius: float, ratio: float,
                    extension_length: float) -> Optional[float]:
    """Length of the extended word (straights included) at extension length l"""
    base_start, base_end = extension_endpoints(start, end, extension_length, ratio)
    length = word_length(tag, base_start, base_end, radius)
    return None if length is None else length + extension_length


# ============================================================================
# FITTING
# ============================================================================

def fit_radius(word: PathWord, start: Pose, end: Pose, target: FitTarget, params: VehicleParams) -> Optional[FleetPath]:
    """Basic word with radius >= rho_min whose length matches the target, or None"""
    rho_min = params.min_turn_radius
    ell = target.target_length
    base = radius_curve(word.tag, start, end, rho_min)
    if base is not None:
        if base > ell + target.length_tolerance:
            return None
        if abs(base - ell) <= target.length_tolerance:
            return build_word(word, start, end, rho_min, params.speed)

    rho_max = max(10.0 * rho_min, ell / math.pi)

    def residual(rho: float) -> Optional[float]:
        length = radius_curve(word.tag, start, end, rho)
        return None if length is None else length - ell

    rho = _fit_scalar(residual, rho_min, rho_max, target.length_tolerance)
    if rho is None:
        return None
    return build_word(word, start, end, rho, params.speed)


def fit_extension(word: PathWord, ratio: float, start: Pose, end: Pose, target: FitTarget,
                  params: VehicleParams) -> Optional[FleetPath]:
    """Straight-extended word at rho_min whose length matches the target, or None"""
    extension = Extension.from_ratio(ratio)
    extended = PathWord(word.tag, extension)
    rho_min = params.min_turn_radius
    ell = target.target_length

    def residual(l: float) -> Optional[float]:
        length = extension_curve(word.tag, start, end, rho_min, ratio, l)
        return None if length is None else length - ell

    l_fit = _fit_scalar(residual, 0.0, ell, target.length_tolerance)
    if l_fit is None:
        return None
    return build_path(extended, start, end, rho_min, params.speed, extension_length=l_fit)


def _same_geometry(a: FleetPath, b: FleetPath) -> bool:
    if abs(a.total_length - b.total_length) > DEDUP_TOLERANCE:
        return False
    times = np.linspace(0.0, a.duration, DEDUP_SAMPLES)
    return bool(np.max(np.abs(sample_positions(a, times) - sample_positions(b, times))) <= DEDUP_TOLERANCE)


def fit_dubins(start: Pose, end: Pose, params: VehicleParams, tau: float) -> List[FleetPath]:
    """
    All members of the extended family flying from start to end in exactly tau.

    Order is word-major: for each basic word, the radius fit first, then the
    start, end and both extensions. Geometric duplicates are dropped.
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    target = FitTarget.for_time(tau, params.speed)
    fitted: List[FleetPath] = []
    for tag in BASIC_WORDS:
        word = PathWord(tag)
        candidates = [fit_radius(word, start, end, target, params)]
        candidates.extend(fit_extension(word, ratio, start, end, target, params) for ratio in EXTENSION_RATIOS)
        for path in candidates:
            if path is None:
                continue
            if abs(path.total_length - target.target_length) > target.length_tolerance:
                continue
            if any(_same_geometry(path, kept) for kept in fitted):
                continue
            fitted.append(path)
    if not fitted:
        logger.debug(f"No fitted path for tau={tau:.3f}s from {start} to {end}")
    return fitted
