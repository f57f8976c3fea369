"""
Dubins Core - Builds the basic path family between two poses.

The family holds the six classic Dubins words (LSL, RSR, LSR, RSL, LRL, RLR)
plus the single-turn words SLS and SRS. Every path is stored as a chain of
timed primitives (straight lines and circle arcs in complex form) flown at
constant speed, so the same objects feed fitting, separation and rendering.
"""

import bisect
import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import NoPathExists, OutOfDomain

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9      # rad, below this an arc is degenerate
LENGTH_TOL = 1e-9     # m, below this a segment is degenerate
POSE_TOL = 1e-9       # pose equality tolerance


# ============================================================================
# ANGLES
# ============================================================================

def normalize_angle(theta: float) -> float:
    """Reduce an angle to (-pi, pi]"""
    t = math.fmod(theta + math.pi, TWO_PI)
    if t <= 0.0:
        t += TWO_PI
    return t - math.pi


def mod_two_pi(angle: float) -> float:
    """Reduce an angle to [0, 2pi), snapping values within ANGLE_TOL of 2pi to 0"""
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a > TWO_PI - ANGLE_TOL:
        return 0.0
    return a


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class Pose:
    """2D position (m) and heading (rad, normalized to (-pi, pi])"""
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def position(self) -> complex:
        return complex(self.x, self.y)

    @property
    def direction(self) -> complex:
        """Unit heading vector"""
        return complex(math.cos(self.theta), math.sin(self.theta))

    def is_close(self, other: "Pose", tol: float = POSE_TOL) -> bool:
        return (
            abs(self.x - other.x) <= tol
            and abs(self.y - other.y) <= tol
            and abs(normalize_angle(self.theta - other.theta)) <= tol
        )

    def shifted(self, offset: complex) -> "Pose":
        """Same heading, position moved by offset"""
        return Pose(self.x + offset.real, self.y + offset.imag, self.theta)


@dataclass(frozen=True)
class VehicleParams:
    """Fleet-wide flight characteristics"""
    speed: float            # V, m/s
    min_turn_radius: float  # rho_min, m
    separation: float       # delta, m

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError(f"speed must be > 0, got {self.speed}")
        if not self.min_turn_radius > 0:
            raise ValueError(f"min_turn_radius must be > 0, got {self.min_turn_radius}")
        if not self.separation > 0:
            raise ValueError(f"separation must be > 0, got {self.separation}")

    @property
    def max_turn_rate(self) -> float:
        return self.speed / self.min_turn_radius


class WordTag(str, Enum):
    LSL = "LSL"
    RSR = "RSR"
    LSR = "LSR"
    RSL = "RSL"
    LRL = "LRL"
    RLR = "RLR"
    SLS = "SLS"
    SRS = "SRS"

    @property
    def letters(self) -> str:
        return self.value


class Extension(str, Enum):
    NONE = "None"
    START = "StartExtended"
    END = "EndExtended"
    BOTH = "BothExtended"

    @property
    def ratio(self) -> Optional[float]:
        """Share of the extension flown before the base word"""
        return {Extension.START: 1.0, Extension.END: 0.0, Extension.BOTH: 0.5}.get(self)

    @classmethod
    def from_ratio(cls, ratio: float) -> "Extension":
        if ratio == 1.0:
            return cls.START
        if ratio == 0.0:
            return cls.END
        if ratio == 0.5:
            return cls.BOTH
        raise ValueError(f"Unsupported extension ratio {ratio}")


BASIC_WORDS: Tuple[WordTag, ...] = (
    WordTag.LSL, WordTag.RSR, WordTag.LSR, WordTag.RSL,
    WordTag.LRL, WordTag.RLR, WordTag.SLS, WordTag.SRS,
)
EXTENSION_RATIOS: Tuple[float, ...] = (1.0, 0.0, 0.5)


@dataclass(frozen=True)
class PathWord:
    tag: WordTag
    extension: Extension = Extension.NONE

    def __str__(self) -> str:
        if self.extension is Extension.START:
            return f"S-{self.tag.value}"
        if self.extension is Extension.END:
            return f"{self.tag.value}-S"
        if self.extension is Extension.BOTH:
            return f"S-{self.tag.value}-S"
        return self.tag.value

    @classmethod
    def parse(cls, text: str) -> "PathWord":
        """Inverse of str(): 'LSL', 'S-LSL', 'LSL-S', 'S-LSL-S'"""
        parts = text.split("-")
        if len(parts) == 1:
            return cls(WordTag(parts[0]))
        if len(parts) == 2 and parts[0] == "S":
            return cls(WordTag(parts[1]), Extension.START)
        if len(parts) == 2 and parts[1] == "S":
            return cls(WordTag(parts[0]), Extension.END)
        if len(parts) == 3 and parts[0] == "S" and parts[2] == "S":
            return cls(WordTag(parts[1]), Extension.BOTH)
        raise ValueError(f"Unknown path word {text!r}")


@dataclass(frozen=True)
class LinePrimitive:
    """f(t) = velocity * t + anchor, t in [0, duration] (local time)"""
    anchor: complex
    velocity: complex
    duration: float

    def position(self, t: float) -> complex:
        return self.anchor + self.velocity * t

    def heading(self, t: float) -> float:
        return math.atan2(self.velocity.imag, self.velocity.real)

    @property
    def turn_rate(self) -> float:
        return 0.0

    @property
    def speed(self) -> float:
        return abs(self.velocity)

    def end_position(self) -> complex:
        return self.position(self.duration)


@dataclass(frozen=True)
class ArcPrimitive:
    """f(t) = center + radius * exp(i (angular_rate * t + phase)), positive rate turns left"""
    center: complex
    radius: float
    angular_rate: float
    phase: float
    duration: float

    def position(self, t: float) -> complex:
        return self.center + self.radius * cmath.exp(1j * (self.angular_rate * t + self.phase))

    def heading(self, t: float) -> float:
        side = math.pi / 2 if self.angular_rate > 0 else -math.pi / 2
        return normalize_angle(self.angular_rate * t + self.phase + side)

    @property
    def turn_rate(self) -> float:
        return self.angular_rate

    @property
    def speed(self) -> float:
        return self.radius * abs(self.angular_rate)

    @property
    def sweep(self) -> float:
        """Signed swept angle"""
        return self.angular_rate * self.duration

    def end_position(self) -> complex:
        return self.position(self.duration)


PathPrimitive = Union[LinePrimitive, ArcPrimitive]


@dataclass(frozen=True)
class FleetPath:
    """A flyable constant-speed path: chained primitives plus how it was generated"""
    word: PathWord
    primitives: Tuple[PathPrimitive, ...]
    radius: float
    extension_length: float
    total_length: float
    start: Pose
    end: Pose
    speed: float
    start_times: Tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = []
        elapsed = 0.0
        for primitive in self.primitives:
            times.append(elapsed)
            elapsed += primitive.duration
        object.__setattr__(self, "start_times", tuple(times))

    @property
    def duration(self) -> float:
        return self.total_length / self.speed


# ============================================================================
# WORD CONSTRUCTION
# ============================================================================

def _turn_sign(letter: str) -> int:
    return 1 if letter == "L" else -1


def _circle_center(point: complex, theta: float, sign: int, radius: float) -> complex:
    """Center of the turning circle on the left (sign=+1) or right (sign=-1)"""
    return point + sign * radius * complex(-math.sin(theta), math.cos(theta))


def _solve_csc(s1: int, s2: int, start: Pose, end: Pose, r: float) -> Optional[Tuple[float, float, float]]:
    c1 = _circle_center(start.position, start.theta, s1, r)
    c2 = _circle_center(end.position, end.theta, s2, r)
    delta = c2 - c1
    d = abs(delta)
    phi = math.atan2(delta.imag, delta.real)
    if s1 == s2:
        if d < LENGTH_TOL:
            psi, straight = start.theta, 0.0
        else:
            psi, straight = phi, d
    else:
        if d < 2.0 * r - LENGTH_TOL:
            return None
        ratio = min(1.0, 2.0 * r / d)
        psi = phi + s1 * math.asin(ratio)
        straight = math.sqrt(max(0.0, d * d - 4.0 * r * r))
    first = mod_two_pi(s1 * (psi - start.theta)) * r
    last = mod_two_pi(s2 * (end.theta - psi)) * r
    return first, straight, last


def _solve_ccc(s: int, start: Pose, end: Pose, r: float) -> Optional[Tuple[float, float, float]]:
    c1 = _circle_center(start.position, start.theta, s, r)
    c3 = _circle_center(end.position, end.theta, s, r)
    delta = c3 - c1
    d = abs(delta)
    if d > 4.0 * r + LENGTH_TOL:
        return None
    phi = math.atan2(delta.imag, delta.real) if d > LENGTH_TOL else 0.0
    beta = math.acos(min(1.0, d / (4.0 * r)))
    best = None
    # Two middle circles are possible; keep the shorter construction
    for side in (1.0, -1.0):
        c2 = c1 + 2.0 * r * cmath.exp(1j * (phi + side * beta))
        psi1 = math.atan2((c2 - c1).imag, (c2 - c1).real) + s * math.pi / 2
        psi2 = math.atan2((c3 - c2).imag, (c3 - c2).real) - s * math.pi / 2
        lengths = (
            mod_two_pi(s * (psi1 - start.theta)) * r,
            mod_two_pi(-s * (psi2 - psi1)) * r,
            mod_two_pi(s * (end.theta - psi2)) * r,
        )
        if best is None or sum(lengths) < sum(best):
            best = lengths
    return best


def _solve_scs(s: int, start: Pose, end: Pose, r: float) -> Optional[Tuple[float, float, float]]:
    turn = mod_two_pi(s * (end.theta - start.theta))
    if not (ANGLE_TOL < turn < math.pi - ANGLE_TOL):
        return None
    u0, u1 = start.direction, end.direction
    w = end.position - start.position
    det = u0.real * u1.imag - u0.imag * u1.real
    before = (w.real * u1.imag - w.imag * u1.real) / det
    after = (u0.real * w.imag - u0.imag * w.real) / det
    tangent = r * math.tan(turn / 2.0)
    first = before - tangent
    last = after - tangent
    if first < -LENGTH_TOL or last < -LENGTH_TOL:
        return None
    return max(0.0, first), r * turn, max(0.0, last)


def _solve_word(tag: WordTag, start: Pose, end: Pose, radius: float) -> Optional[Tuple[float, float, float]]:
    """Segment lengths (m) of the word, or None when the construction does not exist"""
    letters = tag.letters
    if letters[1] == "S":
        return _solve_csc(_turn_sign(letters[0]), _turn_sign(letters[2]), start, end, radius)
    if letters[0] == "S":
        return _solve_scs(_turn_sign(letters[1]), start, end, radius)
    return _solve_ccc(_turn_sign(letters[0]), start, end, radius)


def word_length(tag: WordTag, start: Pose, end: Pose, radius: float) -> Optional[float]:
    """Length of a basic word without building its primitives"""
    lengths = _solve_word(tag, start, end, radius)
    if lengths is None:
        return None
    return lengths[0] + lengths[1] + lengths[2]


def _assemble(letters: str, start: Pose, lengths: Sequence[float], radius: float, speed: float) -> List[PathPrimitive]:
    """Walk the letters from the start pose, emitting one primitive per segment"""
    primitives: List[PathPrimitive] = []
    point = start.position
    theta = start.theta
    for letter, length in zip(letters, lengths):
        if letter == "S":
            direction = complex(math.cos(theta), math.sin(theta))
            primitives.append(LinePrimitive(anchor=point, velocity=speed * direction, duration=length / speed))
            point = point + length * direction
            continue
        sign = _turn_sign(letter)
        center = _circle_center(point, theta, sign, radius)
        phase = math.atan2((point - center).imag, (point - center).real)
        angle = length / radius
        primitives.append(ArcPrimitive(
            center=center,
            radius=radius,
            angular_rate=sign * speed / radius,
            phase=phase,
            duration=length / speed,
        ))
        point = center + radius * cmath.exp(1j * (phase + sign * angle))
        theta = theta + sign * angle
    return primitives


def build_word(word: PathWord, start: Pose, end: Pose, radius: float, speed: float) -> Optional[FleetPath]:
    """
    Build the unique path of a basic word joining start to end at a turn radius.

    Returns None when the word cannot be constructed for this geometry.
    """
    if word.extension is not Extension.NONE:
        raise ValueError("build_word only builds basic words; use build_path for extensions")
    if radius <= 0 or speed <= 0:
        raise ValueError("radius and speed must be positive")
    lengths = _solve_word(word.tag, start, end, radius)
    if lengths is None:
        return None
    return FleetPath(
        word=word,
        primitives=tuple(_assemble(word.tag.letters, start, lengths, radius, speed)),
        radius=radius,
        extension_length=0.0,
        total_length=lengths[0] + lengths[1] + lengths[2],
        start=start,
        end=end,
        speed=speed,
    )


def extension_endpoints(start: Pose, end: Pose, extension_length: float, ratio: float) -> Tuple[Pose, Pose]:
    """Start moved forward by l*r along its heading, end moved back by l*(1-r)"""
    shifted_start = start.shifted(extension_length * ratio * start.direction)
    shifted_end = end.shifted(-extension_length * (1.0 - ratio) * end.direction)
    return shifted_start, shifted_end


def build_path(word: PathWord, start: Pose, end: Pose, radius: float, speed: float,
               extension_length: float = 0.0) -> Optional[FleetPath]:
    """Build a basic or straight-extended path of the family"""
    if word.extension is Extension.NONE:
        return build_word(word, start, end, radius, speed)
    if extension_length < 0:
        raise ValueError("extension_length must be >= 0")
    ratio = word.extension.ratio
    assert ratio is not None
    base_start, base_end = extension_endpoints(start, end, extension_length, ratio)
    lengths = _solve_word(word.tag, base_start, base_end, radius)
    if lengths is None:
        return None
    prefix = extension_length * ratio
    suffix = extension_length * (1.0 - ratio)

    primitives: List[PathPrimitive] = []
    if word.extension in (Extension.START, Extension.BOTH):
        primitives.append(LinePrimitive(anchor=start.position, velocity=speed * start.direction, duration=prefix / speed))
    primitives.extend(_assemble(word.tag.letters, base_start, lengths, radius, speed))
    if word.extension in (Extension.END, Extension.BOTH):
        primitives.append(LinePrimitive(anchor=base_end.position, velocity=speed * end.direction, duration=suffix / speed))

    return FleetPath(
        word=word,
        primitives=tuple(primitives),
        radius=radius,
        extension_length=extension_length,
        total_length=prefix + (lengths[0] + lengths[1] + lengths[2]) + suffix,
        start=start,
        end=end,
        speed=speed,
    )


def shortest_dubins(start: Pose, end: Pose, params: VehicleParams) -> Tuple[float, FleetPath]:
    """
    Shortest member of the basic family at rho_min.

    Returns:
        (flight time in seconds, path)
    """
    best_tag: Optional[WordTag] = None
    best_length = math.inf
    for tag in BASIC_WORDS:
        length = word_length(tag, start, end, params.min_turn_radius)
        if length is not None and length < best_length:
            best_tag, best_length = tag, length
    if best_tag is None:
        raise NoPathExists(f"No basic path from {start} to {end}")
    path = build_word(PathWord(best_tag), start, end, params.min_turn_radius, params.speed)
    assert path is not None
    return path.duration, path


# ============================================================================
# EVALUATION
# ============================================================================

def _locate(path: FleetPath, t: float) -> int:
    index = bisect.bisect_right(path.start_times, t) - 1
    return min(max(index, 0), len(path.primitives) - 1)


def evaluate(path: FleetPath, t: float) -> Pose:
    """Pose at time t (seconds from the path start)"""
    duration = path.duration
    if t < -1e-12 or t > duration + 1e-9:
        raise OutOfDomain(f"t={t} outside [0, {duration}]")
    if not path.primitives:
        return path.start
    t = min(max(t, 0.0), duration)
    if t == 0.0:
        return path.start
    index = _locate(path, t)
    primitive = path.primitives[index]
    local = min(t - path.start_times[index], primitive.duration)
    point = primitive.position(local)
    return Pose(point.real, point.imag, primitive.heading(local))


def sample_positions(path: FleetPath, times: np.ndarray) -> np.ndarray:
    """Vectorized positions (complex array) at the given times, clamped to the path duration"""
    times = np.clip(np.asarray(times, dtype=float), 0.0, path.duration)
    out = np.full(times.shape, path.start.position, dtype=complex)
    if not path.primitives:
        return out
    starts = np.asarray(path.start_times)
    index = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(path.primitives) - 1)
    for i, primitive in enumerate(path.primitives):
        mask = index == i
        if not mask.any():
            continue
        local = np.minimum(times[mask] - starts[i], primitive.duration)
        if isinstance(primitive, LinePrimitive):
            out[mask] = primitive.anchor + primitive.velocity * local
        else:
            out[mask] = primitive.center + primitive.radius * np.exp(1j * (primitive.angular_rate * local + primitive.phase))
    return out


def integrate_path(path: FleetPath, max_step: float = 0.05) -> Pose:
    """
    Fly the path by RK4 integration of the Dubins dynamics, using the
    piecewise-constant turn rate of each primitive. Returns the final pose.
    """
    x, y, theta = path.start.x, path.start.y, path.start.theta
    speed = path.speed

    def rates(th: float, u: float) -> Tuple[float, float, float]:
        return speed * math.cos(th), speed * math.sin(th), u

    for primitive in path.primitives:
        if primitive.duration <= 0.0:
            continue
        u = primitive.turn_rate
        steps = max(1, int(math.ceil(primitive.duration / max_step)))
        h = primitive.duration / steps
        for _ in range(steps):
            k1 = rates(theta, u)
            k2 = rates(theta + 0.5 * h * k1[2], u)
            k3 = rates(theta + 0.5 * h * k2[2], u)
            k4 = rates(theta + h * k3[2], u)
            x += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            y += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            theta += h * u
    return Pose(x, y, theta)
