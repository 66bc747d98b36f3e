"""Coordinate, distance, orthant, hyper-rectangle and hyperplane-region primitives.

All values here are immutable and every operation is a pure function, so the
same objects are shared freely between overlay, multicast, stability and the
oracles. Comparisons are exact; distinctness of coordinates is guaranteed at
generation time rather than with tolerances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, TypeAlias

from geocast.error_handling import DistinctnessError, UsageError

Coord: TypeAlias = Tuple[float, ...]
RegionId: TypeAlias = Tuple[int, ...]  # one entry per classifying plane, +1 or -1

INF: float = math.inf


@dataclass(frozen=True)
class SpaceSpec:
    """Dimension count and coordinate upper bound of the identifier space"""
    d: int
    vmax: float = 1000.0

    def __post_init__(self) -> None:
        if self.d < 1:
            raise UsageError(f"Dimension must be >= 1, got {self.d}")
        if not self.vmax > 0:
            raise UsageError(f"VMAX must be > 0, got {self.vmax}")

    def validate(self, coord: Sequence[float]) -> Coord:
        """Return coord as a tuple, checking length and bounds."""
        if len(coord) != self.d:
            raise UsageError(f"Coordinate has {len(coord)} components, space has {self.d}")
        for value in coord:
            if not 0.0 <= value <= self.vmax:
                raise UsageError(f"Coordinate component {value} outside [0, {self.vmax}]")
        return tuple(float(v) for v in coord)


@dataclass(frozen=True)
class Interval:
    """One side of a hyper-rectangle. Infinite bounds are always open."""
    lo: float = -INF
    hi: float = INF
    lo_open: bool = True
    hi_open: bool = True

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise UsageError(f"Interval lower bound {self.lo} exceeds upper bound {self.hi}")
        if self.lo == self.hi and (self.lo_open or self.hi_open):
            raise UsageError("Degenerate interval must have both bounds closed")

    def contains(self, x: float) -> bool:
        if x < self.lo or (self.lo_open and x == self.lo):
            return False
        if x > self.hi or (self.hi_open and x == self.hi):
            return False
        return True

    def intersect(self, other: Interval) -> Optional[Interval]:
        if self.lo > other.lo:
            lo, lo_open = self.lo, self.lo_open
        elif other.lo > self.lo:
            lo, lo_open = other.lo, other.lo_open
        else:
            lo, lo_open = self.lo, self.lo_open or other.lo_open

        if self.hi < other.hi:
            hi, hi_open = self.hi, self.hi_open
        elif other.hi < self.hi:
            hi, hi_open = other.hi, other.hi_open
        else:
            hi, hi_open = self.hi, self.hi_open or other.hi_open

        if lo > hi or (lo == hi and (lo_open or hi_open)):
            return None
        return Interval(lo, hi, lo_open, hi_open)

    def within(self, other: Interval) -> bool:
        """True when every point of self lies in other."""
        if self.lo < other.lo or (self.lo == other.lo and other.lo_open and not self.lo_open):
            return False
        if self.hi > other.hi or (self.hi == other.hi and other.hi_open and not self.hi_open):
            return False
        return True

    def __str__(self) -> str:
        left = "(" if self.lo_open else "["
        right = ")" if self.hi_open else "]"
        return f"{left}{self.lo:g},{self.hi:g}{right}"


@dataclass(frozen=True)
class HyperRect:
    """Axes-aligned box, one Interval per dimension"""
    sides: Tuple[Interval, ...]

    @classmethod
    def all_space(cls, d: int) -> HyperRect:
        return cls(tuple(Interval() for _ in range(d)))

    @classmethod
    def open_box(cls, lo: Sequence[float], hi: Sequence[float]) -> HyperRect:
        _check_dims(lo, hi)
        return cls(tuple(Interval(a, b, True, True) for a, b in zip(lo, hi)))

    @classmethod
    def closed_box(cls, lo: Sequence[float], hi: Sequence[float]) -> HyperRect:
        _check_dims(lo, hi)
        return cls(tuple(Interval(a, b, False, False) for a, b in zip(lo, hi)))

    @property
    def d(self) -> int:
        return len(self.sides)

    def is_all_space(self) -> bool:
        return all(s.lo == -INF and s.hi == INF for s in self.sides)

    def __str__(self) -> str:
        return "x".join(str(s) for s in self.sides)


@dataclass(frozen=True)
class HyperplaneSet:
    """Planes through the origin, given by coefficient vectors in {-1, 0, +1}^D"""
    planes: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen = set()
        for plane in self.planes:
            if any(a not in (-1, 0, 1) for a in plane):
                raise UsageError(f"Hyperplane coefficients must be -1, 0 or +1: {plane}")
            if not any(plane):
                raise UsageError("All-zero hyperplane coefficient vector")
            if len(plane) != len(self.planes[0]):
                raise UsageError("Hyperplanes of mixed dimension")
            canonical = _canonical_sign(plane)
            if canonical in seen:
                raise UsageError(f"Duplicate hyperplane (up to sign): {plane}")
            seen.add(canonical)

    @classmethod
    def orthogonal(cls, d: int) -> HyperplaneSet:
        """The D planes x(i) = 0."""
        return cls(tuple(tuple(1 if j == i else 0 for j in range(d)) for i in range(d)))

    @classmethod
    def signed(cls, d: int) -> HyperplaneSet:
        """Every {-1,0,+1} coefficient vector up to sign: (3^D - 1) / 2 planes."""
        planes = [
            plane
            for plane in itertools.product((-1, 0, 1), repeat=d)
            if any(plane) and plane == _canonical_sign(plane)
        ]
        return cls(tuple(planes))

    @property
    def h(self) -> int:
        return len(self.planes)

    @property
    def d(self) -> int:
        return len(self.planes[0]) if self.planes else 0

    def is_orthogonal(self) -> bool:
        return self.d > 0 and sorted(self.planes) == sorted(HyperplaneSet.orthogonal(self.d).planes)


def _canonical_sign(plane: Tuple[int, ...]) -> Tuple[int, ...]:
    # first non-zero coefficient positive
    for a in plane:
        if a != 0:
            return plane if a > 0 else tuple(-x for x in plane)
    return plane


def _check_dims(a: Sequence[float], b: Sequence[float]) -> None:
    if len(a) != len(b):
        raise UsageError(f"Dimension mismatch: {len(a)} vs {len(b)}")


def l1_distance(a: Sequence[float], b: Sequence[float]) -> float:
    _check_dims(a, b)
    return sum(abs(x - y) for x, y in zip(a, b))


def l2_distance(a: Sequence[float], b: Sequence[float]) -> float:
    _check_dims(a, b)
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def orthant_of(origin: Sequence[float], q: Sequence[float]) -> RegionId:
    """Sign vector of q - origin; every component must differ."""
    _check_dims(origin, q)
    signs = []
    for i, (o, x) in enumerate(zip(origin, q)):
        if x == o:
            raise DistinctnessError(
                f"Coordinates coincide in dimension {i}",
                {"dimension": i, "value": o},
            )
        signs.append(1 if x > o else -1)
    return tuple(signs)


def hyperplane_region(planes: HyperplaneSet, v: Sequence[float]) -> RegionId:
    """Per plane, the sign of a.v; a zero dot product counts as +."""
    if planes.h and len(v) != planes.d:
        raise UsageError(f"Dimension mismatch: offset has {len(v)}, planes have {planes.d}")
    return tuple(
        1 if sum(a * x for a, x in zip(plane, v)) >= 0 else -1
        for plane in planes.planes
    )


def rect_between(p: Sequence[float], q: Sequence[float]) -> HyperRect:
    _check_dims(p, q)
    return HyperRect.closed_box([min(a, b) for a, b in zip(p, q)], [max(a, b) for a, b in zip(p, q)])


def contains(r: HyperRect, x: Sequence[float]) -> bool:
    if len(x) != r.d:
        raise UsageError(f"Dimension mismatch: point has {len(x)}, rectangle has {r.d}")
    for side, value in zip(r.sides, x):
        if not side.contains(value):
            return False
    return True


def orthant_rect(p: Sequence[float], region: RegionId) -> HyperRect:
    """Open half-bounded box of the orthant of p named by region."""
    if len(region) != len(p):
        raise UsageError(f"Region has {len(region)} signs, point has {len(p)} components")
    return HyperRect(tuple(
        Interval(-INF, x, True, True) if sign < 0 else Interval(x, INF, True, True)
        for x, sign in zip(p, region)
    ))


def intersect(a: HyperRect, b: HyperRect) -> Optional[HyperRect]:
    """Per-dimension intersection; None is the empty marker."""
    if a.d != b.d:
        raise UsageError(f"Dimension mismatch: {a.d} vs {b.d}")
    sides = []
    for sa, sb in zip(a.sides, b.sides):
        side = sa.intersect(sb)
        if side is None:
            return None
        sides.append(side)
    return HyperRect(tuple(sides))


def is_subset(inner: HyperRect, outer: HyperRect) -> bool:
    if inner.d != outer.d:
        raise UsageError(f"Dimension mismatch: {inner.d} vs {outer.d}")
    return all(si.within(so) for si, so in zip(inner.sides, outer.sides))


def disjoint(a: HyperRect, b: HyperRect) -> bool:
    return intersect(a, b) is None


def all_orthants(d: int) -> Iterable[RegionId]:
    return itertools.product((-1, 1), repeat=d)
