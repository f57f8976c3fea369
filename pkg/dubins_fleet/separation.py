"""
Separation - Decides whether two timed paths ever come within delta.

Each path is split into timed legs (lines and arcs). For every pair of legs
that fly at the same time, the cheap spatial distance between the two shapes
is computed first; only when the shapes come closer than delta is the
time-coupled minimum distance solved (closed form for line/line, interval
branch-and-bound otherwise).
"""

import heapq
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dubins_core import ArcPrimitive, FleetPath, LinePrimitive, PathPrimitive
from .errors import MismatchedDuration
from .interval import Interval, cos_interval, sin_interval
from .length_fit import duration_tolerance
from .workers import WorkerPool

logger = logging.getLogger(__name__)

SEPARATION_TOLERANCE = 1e-4   # eps_sep, m
DURATION_TOLERANCE = 1e-9     # s
MIN_BOX_WIDTH = 1e-12         # s
MAX_BOXES = 200_000
SCREEN_SAMPLES = 128


@dataclass(frozen=True)
class TimedLeg:
    """A primitive placed on the absolute mission clock"""
    primitive: PathPrimitive
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"Leg needs t_start < t_end, got [{self.t_start}, {self.t_end}]")

    def position(self, t: float) -> complex:
        return self.primitive.position(t - self.t_start)


@dataclass
class SeparationStats:
    """Work counters, shared between worker threads"""
    pair_checks: int = 0
    temporal_solves: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def count_pair(self) -> None:
        with self._lock:
            self.pair_checks += 1

    def count_temporal(self) -> None:
        with self._lock:
            self.temporal_solves += 1


def timed_legs(path: FleetPath, t0: float = 0.0) -> List[TimedLeg]:
    """Legs of a path on the mission clock, zero-duration primitives left out"""
    legs = []
    for start, primitive in zip(path.start_times, path.primitives):
        if primitive.duration <= 0.0:
            continue
        legs.append(TimedLeg(primitive, t0 + start, t0 + start + primitive.duration))
    return legs


def clip_primitive(primitive: PathPrimitive, t0: float, t1: float) -> PathPrimitive:
    """Part of a primitive flown between local times t0 and t1"""
    if isinstance(primitive, LinePrimitive):
        return LinePrimitive(anchor=primitive.position(t0), velocity=primitive.velocity, duration=t1 - t0)
    return ArcPrimitive(
        center=primitive.center,
        radius=primitive.radius,
        angular_rate=primitive.angular_rate,
        phase=primitive.angular_rate * t0 + primitive.phase,
        duration=t1 - t0,
    )


# ============================================================================
# SPATIAL SEPARATION (shape to shape)
# ============================================================================

def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def _point_segment(p: complex, a: complex, b: complex) -> float:
    ab = b - a
    denom = abs(ab) ** 2
    if denom == 0.0:
        return abs(p - a)
    s = ((p - a).real * ab.real + (p - a).imag * ab.imag) / denom
    s = min(1.0, max(0.0, s))
    return abs(p - (a + s * ab))


def _segments_intersect(a: complex, b: complex, c: complex, d: complex) -> bool:
    d1 = _cross(b - a, c - a)
    d2 = _cross(b - a, d - a)
    d3 = _cross(d - c, a - c)
    d4 = _cross(d - c, b - c)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def _arc_span(arc: ArcPrimitive) -> Tuple[float, float]:
    """Counter-clockwise start angle and angular extent (clamped to a full circle)"""
    sweep = arc.sweep
    start = arc.phase if sweep >= 0 else arc.phase + sweep
    return start, min(abs(sweep), 2.0 * math.pi)


def _in_span(angle: float, span: Tuple[float, float]) -> bool:
    start, extent = span
    if extent >= 2.0 * math.pi:
        return True
    offset = math.fmod(angle - start, 2.0 * math.pi)
    if offset < 0:
        offset += 2.0 * math.pi
    return offset <= extent + 1e-12 or offset >= 2.0 * math.pi - 1e-12


def _arc_endpoints(arc: ArcPrimitive) -> Tuple[complex, complex]:
    return arc.position(0.0), arc.position(arc.duration)


def _point_arc(p: complex, arc: ArcPrimitive) -> float:
    span = _arc_span(arc)
    offset = p - arc.center
    dist = abs(offset)
    if dist > 0.0 and _in_span(math.atan2(offset.imag, offset.real), span):
        return abs(dist - arc.radius)
    if dist == 0.0 and span[1] > 0:
        return arc.radius
    e0, e1 = _arc_endpoints(arc)
    return min(abs(p - e0), abs(p - e1))


def _segment_segment(a: LinePrimitive, b: LinePrimitive) -> float:
    a0, a1 = a.position(0.0), a.end_position()
    b0, b1 = b.position(0.0), b.end_position()
    if _segments_intersect(a0, a1, b0, b1):
        return 0.0
    return min(
        _point_segment(a0, b0, b1), _point_segment(a1, b0, b1),
        _point_segment(b0, a0, a1), _point_segment(b1, a0, a1),
    )


def _segment_arc(seg: LinePrimitive, arc: ArcPrimitive) -> float:
    a, b = seg.position(0.0), seg.end_position()
    span = _arc_span(arc)
    candidates = [_point_arc(a, arc), _point_arc(b, arc)]
    e0, e1 = _arc_endpoints(arc)
    candidates += [_point_segment(e0, a, b), _point_segment(e1, a, b)]

    ab = b - a
    denom = abs(ab) ** 2
    if denom > 0.0:
        rel = arc.center - a
        s_foot = (rel.real * ab.real + rel.imag * ab.imag) / denom
        radial = a + s_foot * ab - arc.center
        if 0.0 <= s_foot <= 1.0 and abs(radial) > 0.0 and _in_span(math.atan2(radial.imag, radial.real), span):
            candidates.append(abs(abs(radial) - arc.radius))
        # Crossings of the segment with the full circle
        gap2 = arc.radius ** 2 - abs(radial) ** 2
        if gap2 >= 0.0:
            half = math.sqrt(gap2 / denom)
            for s in (s_foot - half, s_foot + half):
                if 0.0 <= s <= 1.0:
                    hit = a + s * ab - arc.center
                    if _in_span(math.atan2(hit.imag, hit.real), span):
                        return 0.0
    return min(candidates)


def _arc_arc(a: ArcPrimitive, b: ArcPrimitive) -> float:
    span_a, span_b = _arc_span(a), _arc_span(b)
    a0, a1 = _arc_endpoints(a)
    b0, b1 = _arc_endpoints(b)
    candidates = [_point_arc(a0, b), _point_arc(a1, b), _point_arc(b0, a), _point_arc(b1, a)]

    link = b.center - a.center
    d = abs(link)
    if d == 0.0:
        # Concentric: any shared direction gives |ra - rb|
        for angle in (span_a[0], span_a[0] + span_a[1]):
            if _in_span(angle, span_b):
                candidates.append(abs(a.radius - b.radius))
        for angle in (span_b[0], span_b[0] + span_b[1]):
            if _in_span(angle, span_a):
                candidates.append(abs(a.radius - b.radius))
        return min(candidates)

    phi = math.atan2(link.imag, link.real)
    for theta_a in (phi, phi + math.pi):
        if not _in_span(theta_a, span_a):
            continue
        pa = a.center + a.radius * complex(math.cos(theta_a), math.sin(theta_a))
        for theta_b in (phi, phi + math.pi):
            if _in_span(theta_b, span_b):
                pb = b.center + b.radius * complex(math.cos(theta_b), math.sin(theta_b))
                candidates.append(abs(pa - pb))

    # Circle intersections
    if abs(a.radius - b.radius) <= d <= a.radius + b.radius:
        along = (d * d + a.radius ** 2 - b.radius ** 2) / (2.0 * d)
        height = math.sqrt(max(0.0, a.radius ** 2 - along ** 2))
        unit = link / d
        base = a.center + along * unit
        for sign in (1.0, -1.0):
            hit = base + sign * height * unit * 1j
            ra, rb = hit - a.center, hit - b.center
            if _in_span(math.atan2(ra.imag, ra.real), span_a) and _in_span(math.atan2(rb.imag, rb.real), span_b):
                return 0.0
    return min(candidates)


def spatial_separation(a: PathPrimitive, b: PathPrimitive) -> float:
    """Exact minimum distance (m) between the two shapes, ignoring time"""
    if isinstance(a, LinePrimitive) and isinstance(b, LinePrimitive):
        return _segment_segment(a, b)
    if isinstance(a, LinePrimitive):
        return _segment_arc(a, b)
    if isinstance(b, LinePrimitive):
        return _segment_arc(b, a)
    return _arc_arc(a, b)


# ============================================================================
# TEMPORAL SEPARATION (same instant)
# ============================================================================

def _line_line_min(a: TimedLeg, b: TimedLeg, t_lo: float, t_hi: float) -> float:
    pa, pb = a.primitive, b.primitive
    dv = pa.velocity - pb.velocity
    da = (pa.anchor - pa.velocity * a.t_start) - (pb.anchor - pb.velocity * b.t_start)
    speed2 = abs(dv) ** 2
    t_star = t_lo
    if speed2 > 0.0:
        t_star = -(dv.real * da.real + dv.imag * da.imag) / speed2
        t_star = min(t_hi, max(t_lo, t_star))
    return abs(dv * t_star + da)


def _enclose(leg: TimedLeg, box: Interval) -> Tuple[Interval, Interval, Interval, Interval]:
    """Interval x, y, x', y' of a leg over an absolute time box"""
    p = leg.primitive
    local = box - leg.t_start
    if isinstance(p, LinePrimitive):
        x = local * p.velocity.real + p.anchor.real
        y = local * p.velocity.imag + p.anchor.imag
        return x, y, Interval(p.velocity.real), Interval(p.velocity.imag)
    angle = local * p.angular_rate + p.phase
    c, s = cos_interval(angle), sin_interval(angle)
    rw = p.radius * p.angular_rate
    return c * p.radius + p.center.real, s * p.radius + p.center.imag, s * (-rw), c * rw


def _squared_gap(a: TimedLeg, b: TimedLeg, t: float) -> float:
    return abs(a.position(t) - b.position(t)) ** 2


def _box_lower_bound(a: TimedLeg, b: TimedLeg, box: Interval, g_mid: float) -> float:
    """Lower bound of |fa - fb|^2 over the box: natural form meet mean-value form"""
    xa, ya, dxa, dya = _enclose(a, box)
    xb, yb, dxb, dyb = _enclose(b, box)
    dx, dy = xa - xb, ya - yb
    natural = dx.sqr() + dy.sqr()
    slope = (dx * (dxa - dxb) + dy * (dya - dyb)) * 2.0
    half = 0.5 * box.width
    mean_value_lo = g_mid - max(abs(slope.lo), abs(slope.hi)) * half
    return max(0.0, natural.lo, mean_value_lo)


def temporal_bounds(
    a: TimedLeg,
    b: TimedLeg,
    t_lo: float,
    t_hi: float,
    threshold: Optional[float] = None,
    tolerance: float = SEPARATION_TOLERANCE,
) -> Tuple[float, float]:
    """
    Certified (lower, upper) bounds of min |fa(t) - fb(t)| over [t_lo, t_hi].

    upper is an attained distance; lower never exceeds the true minimum.
    With a threshold, the search stops as soon as the comparison with it is
    settled: upper <= threshold (conflict proven) or lower > threshold + tol.
    """
    if isinstance(a.primitive, LinePrimitive) and isinstance(b.primitive, LinePrimitive):
        value = _line_line_min(a, b, t_lo, t_hi)
        return value, value

    best = min(_squared_gap(a, b, t) for t in (t_lo, 0.5 * (t_lo + t_hi), t_hi))
    root = Interval(t_lo, t_hi)
    heap = [(_box_lower_bound(a, b, root, _squared_gap(a, b, root.mid)), t_lo, t_hi)]
    cutoff = None if threshold is None else (threshold + tolerance) ** 2
    boxes = 0
    while heap:
        lower, lo, hi = heap[0]
        if math.sqrt(best) - math.sqrt(lower) <= tolerance:
            break
        if threshold is not None and (best <= threshold * threshold or lower > cutoff):
            break
        if hi - lo <= MIN_BOX_WIDTH or boxes >= MAX_BOXES:
            logger.debug(f"Interval search stopped at box width {hi - lo:.3e}s after {boxes} boxes")
            break
        heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        for child_lo, child_hi in ((lo, mid), (mid, hi)):
            box = Interval(child_lo, child_hi)
            g_mid = _squared_gap(a, b, box.mid)
            best = min(best, g_mid)
            child_lower = _box_lower_bound(a, b, box, g_mid)
            if child_lower < best:
                heapq.heappush(heap, (child_lower, child_lo, child_hi))
            boxes += 1
    global_lower = heap[0][0] if heap else best
    return math.sqrt(max(0.0, min(global_lower, best))), math.sqrt(best)


def temporal_separation(a: TimedLeg, b: TimedLeg, window: Tuple[float, float]) -> float:
    """
    Minimum distance (m) between the two moving points over the window.

    The returned value m is attained; the true minimum lies in [m - eps_sep, m].
    """
    t_lo, t_hi = window
    if not t_lo <= t_hi:
        raise ValueError(f"Empty window [{t_lo}, {t_hi}]")
    if t_lo < max(a.t_start, b.t_start) - DURATION_TOLERANCE or t_hi > min(a.t_end, b.t_end) + DURATION_TOLERANCE:
        raise ValueError("Window must lie inside both legs")
    _, upper = temporal_bounds(a, b, t_lo, t_hi)
    return upper


# ============================================================================
# PATH SEPARATION
# ============================================================================

def is_pair_separated(
    pa: Sequence[TimedLeg],
    pb: Sequence[TimedLeg],
    delta: float,
    horizon: Optional[float] = None,
    stats: Optional[SeparationStats] = None,
) -> bool:
    """
    True iff the two paths stay strictly more than delta apart at all times.

    Both paths must end together (within the fit tolerance) unless a horizon
    (common window end) is given. Uncertainty within eps_sep is resolved as a
    conflict.
    """
    if stats is not None:
        stats.count_pair()
    end_a = pa[-1].t_end if pa else 0.0
    end_b = pb[-1].t_end if pb else 0.0
    if horizon is None:
        speed = pa[-1].primitive.speed if pa else (pb[-1].primitive.speed if pb else 1.0)
        if abs(end_a - end_b) > duration_tolerance(max(end_a, end_b), speed):
            raise MismatchedDuration(f"Path durations differ: {end_a:.9f}s vs {end_b:.9f}s")
        horizon = min(end_a, end_b)

    i = j = 0
    while i < len(pa) and j < len(pb):
        leg_a, leg_b = pa[i], pb[j]
        lo = max(leg_a.t_start, leg_b.t_start)
        hi = min(leg_a.t_end, leg_b.t_end, horizon)
        if lo >= horizon:
            break
        if hi > lo:
            clipped_a = clip_primitive(leg_a.primitive, lo - leg_a.t_start, hi - leg_a.t_start)
            clipped_b = clip_primitive(leg_b.primitive, lo - leg_b.t_start, hi - leg_b.t_start)
            if spatial_separation(clipped_a, clipped_b) <= delta:
                if stats is not None:
                    stats.count_temporal()
                lower, _ = temporal_bounds(leg_a, leg_b, lo, hi, threshold=delta)
                if lower <= delta:
                    return False
        if leg_a.t_end <= leg_b.t_end:
            i += 1
        else:
            j += 1
    return True


def are_separated(
    delta: float,
    paths: Sequence[FleetPath],
    pool: Optional[WorkerPool] = None,
    stats: Optional[SeparationStats] = None,
) -> bool:
    """
    True iff every unordered pair of paths is separated.

    Durations may differ by the fit tolerance of a common tau; anything more
    raises MismatchedDuration.
    """
    for path in paths[1:]:
        tolerance = duration_tolerance(max(path.duration, paths[0].duration), path.speed)
        if abs(path.duration - paths[0].duration) > tolerance:
            raise MismatchedDuration(f"Path durations differ: {paths[0].duration:.9f}s vs {path.duration:.9f}s")
    legs = [timed_legs(path) for path in paths]
    pairs = [(a, b) for a in range(len(paths)) for b in range(a + 1, len(paths))]

    def check(pair: Tuple[int, int]) -> bool:
        a, b = pair
        if not legs[a] or not legs[b]:
            return abs(paths[a].start.position - paths[b].start.position) > delta
        return is_pair_separated(legs[a], legs[b], delta, stats=stats)

    results = pool.map(check, pairs) if pool is not None else [check(pair) for pair in pairs]
    return all(results)


# ============================================================================
# SAMPLED SCREENING
# ============================================================================

def screen_times(horizon: float) -> np.ndarray:
    """Common instants at which candidate pairs are screened"""
    return np.linspace(0.0, horizon, SCREEN_SAMPLES)


def screen_pairs(samples_a: np.ndarray, samples_b: np.ndarray, delta: float, speed: float,
                 max_step: float) -> np.ndarray:
    """
    Screen every candidate pair of two aircraft from positions sampled at
    common instants (rows: candidates, columns: instants).

    Returns an int8 matrix: 1 conflict proven (a sample within delta),
    0 separation proven (sampled minimum beyond delta + V * max_step + eps_sep,
    relative speed being at most 2V), -1 undecided. Both verdicts agree with
    is_pair_separated.
    """
    gaps = np.abs(samples_a[:, None, :] - samples_b[None, :, :]).min(axis=2)
    verdict = np.full(gaps.shape, -1, dtype=np.int8)
    verdict[gaps > delta + speed * max_step + SEPARATION_TOLERANCE] = 0
    verdict[gaps <= delta] = 1
    return verdict
