"""
Minimal interval arithmetic for the separation branch-and-bound.
No outward rounding; callers keep a tolerance well above float error.
"""

import math
from typing import Optional


class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: Optional[float] = None):
        self.lo = lo
        self.hi = lo if hi is None else hi

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo - other.hi, self.hi - other.lo)
        return Interval(self.lo - other, self.hi - other)

    def __rsub__(self, other):
        return Interval(other - self.hi, other - self.lo)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other):
        if isinstance(other, Interval):
            products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
            return Interval(min(products), max(products))
        if other >= 0:
            return Interval(self.lo * other, self.hi * other)
        return Interval(self.hi * other, self.lo * other)

    __rmul__ = __mul__

    def sqr(self) -> "Interval":
        """x^2, tight when the interval straddles zero"""
        if self.lo >= 0:
            return Interval(self.lo * self.lo, self.hi * self.hi)
        if self.hi <= 0:
            return Interval(self.hi * self.hi, self.lo * self.lo)
        return Interval(0.0, max(self.lo * self.lo, self.hi * self.hi))


def _contains_multiple(lo: float, hi: float, offset: float) -> bool:
    """Whether [lo, hi] contains offset + 2k*pi for some integer k"""
    k = math.ceil((lo - offset) / (2.0 * math.pi))
    return offset + 2.0 * math.pi * k <= hi


def cos_interval(angle: Interval) -> Interval:
    if angle.width >= 2.0 * math.pi:
        return Interval(-1.0, 1.0)
    a, b = math.cos(angle.lo), math.cos(angle.hi)
    lo, hi = min(a, b), max(a, b)
    if _contains_multiple(angle.lo, angle.hi, 0.0):
        hi = 1.0
    if _contains_multiple(angle.lo, angle.hi, math.pi):
        lo = -1.0
    return Interval(lo, hi)


def sin_interval(angle: Interval) -> Interval:
    return cos_interval(angle - math.pi / 2)
