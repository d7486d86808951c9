"""Outward-rounded interval arithmetic on IEEE-754 doubles.

Every operation evaluates the usual endpoint formulas in the default
round-to-nearest mode and then nudges each endpoint one ulp outward with
``nextafter``.  Compared with switching the FPU rounding mode this costs at
most two extra ulp of width per operation, is portable, and needs no global
state.  Negation is exact in binary floating point and is returned exactly.

The one operation that goes beyond IEEE-754 basic arithmetic is ``exp``.  It
evaluates the platform ``math.exp`` at both endpoints and inflates the result
outward by two ulp.  This is sound under a single, explicitly stated
assumption: **the platform ``exp`` is faithfully rounded** (its error is
strictly below one ulp).  Every libm this package targets satisfies that
bound; it is the only point where correctness rests on the quality of a
library routine rather than on IEEE-754 semantics of ``+``, ``-``, ``*``.

The second half of the module provides the same operations on NumPy arrays of
endpoints (``vadd``, ``vmul``, ...).  They use bit-identical endpoint
formulas, and the array ``exp`` still calls ``math.exp`` element by element so
the trust point stays a single function.  The array kernels do not raise on
overflow; they return infinite endpoints for the affected rows and leave the
conservative handling to the caller.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EnclosureError

__all__ = [
    "Interval",
    "IntervalRect",
    "add",
    "sub",
    "neg",
    "mul",
    "sqr",
    "scale",
    "exp",
    "hull",
]

_INF = math.inf


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


class Interval:
    """Closed interval ``[lo, hi]`` with finite double endpoints.

    Degenerate intervals (``lo == hi``) are allowed; empty or non-finite ones
    are rejected at construction time so that downstream code never has to
    re-check.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        if hi is None:
            hi = lo
        lo = float(lo)
        hi = float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise EnclosureError(f"non-finite interval endpoint in [{lo!r}, {hi!r}]")
        if lo > hi:
            raise ValueError(f"empty interval: lo={lo!r} > hi={hi!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("Interval is immutable")

    def __reduce__(self):
        return (Interval, (self.lo, self.hi))

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, strict: bool = False) -> bool:
        if strict:
            return self.lo < x < self.hi
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    # Operator sugar; the module-level functions are the primary surface.
    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(float(x))


def _make(lo: float, hi: float) -> Interval:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise EnclosureError(f"enclosure overflowed to [{lo!r}, {hi!r}]")
    return Interval(lo, hi)


def add(a: Interval, b: Interval) -> Interval:
    return _make(_down(a.lo + b.lo), _up(a.hi + b.hi))


def sub(a: Interval, b: Interval) -> Interval:
    return _make(_down(a.lo - b.hi), _up(a.hi - b.lo))


def neg(a: Interval) -> Interval:
    # Exact: negation never rounds.
    return Interval(-a.hi, -a.lo)


def mul(a: Interval, b: Interval) -> Interval:
    p1 = a.lo * b.lo
    p2 = a.lo * b.hi
    p3 = a.hi * b.lo
    p4 = a.hi * b.hi
    return _make(_down(min(p1, p2, p3, p4)), _up(max(p1, p2, p3, p4)))


def sqr(a: Interval) -> Interval:
    s1 = a.lo * a.lo
    s2 = a.hi * a.hi
    hi = _up(max(s1, s2))
    if a.lo <= 0.0 <= a.hi:
        lo = 0.0  # zero is attained, exactly
    else:
        lo = max(0.0, _down(min(s1, s2)))
    return _make(lo, hi)


def scale(a: Interval, c: float) -> Interval:
    if not math.isfinite(c):
        raise EnclosureError(f"non-finite scale factor {c!r}")
    p1 = a.lo * c
    p2 = a.hi * c
    return _make(_down(min(p1, p2)), _up(max(p1, p2)))


def exp(a: Interval) -> Interval:
    """Enclosure of ``{e^x : x in a}``; see the module docstring for the
    faithful-rounding assumption this relies on."""
    try:
        lo = math.exp(a.lo)
        hi = math.exp(a.hi)
    except OverflowError:
        raise EnclosureError(f"exp overflow on {a!r}") from None
    lo = max(0.0, _down(_down(lo)))
    hi = _up(_up(hi))
    return _make(lo, hi)


def hull(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


class IntervalRect:
    """Axis-aligned box in R^n: a product of closed intervals."""

    __slots__ = ("ivs",)

    def __init__(self, ivs: Iterable[Interval]):
        ivs = tuple(ivs)
        if not ivs:
            raise ValueError("IntervalRect needs at least one component")
        for iv in ivs:
            if not isinstance(iv, Interval):
                raise TypeError(f"expected Interval, got {type(iv).__name__}")
        object.__setattr__(self, "ivs", ivs)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("IntervalRect is immutable")

    def __reduce__(self):
        return (IntervalRect, (self.ivs,))

    @classmethod
    def from_bounds(cls, los: Sequence[float], his: Sequence[float]) -> "IntervalRect":
        if len(los) != len(his):
            raise ValueError("mismatched bound lengths")
        return cls(Interval(lo, hi) for lo, hi in zip(los, his))

    @property
    def dim(self) -> int:
        return len(self.ivs)

    def __len__(self) -> int:
        return len(self.ivs)

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.ivs)

    def __getitem__(self, i: int) -> Interval:
        return self.ivs[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalRect):
            return NotImplemented
        return self.ivs == other.ivs

    def __hash__(self) -> int:
        return hash(self.ivs)

    def __repr__(self) -> str:
        parts = ", ".join(f"[{iv.lo!r}, {iv.hi!r}]" for iv in self.ivs)
        return f"IntervalRect({parts})"

    @property
    def los(self) -> tuple[float, ...]:
        return tuple(iv.lo for iv in self.ivs)

    @property
    def his(self) -> tuple[float, ...]:
        return tuple(iv.hi for iv in self.ivs)

    def widths(self) -> tuple[float, ...]:
        return tuple(iv.width for iv in self.ivs)

    def diameter(self) -> float:
        """Euclidean diameter (length of the main diagonal)."""
        return math.hypot(*(iv.width for iv in self.ivs))

    def contains_point(self, p: Sequence[float], strict: bool = False) -> bool:
        if len(p) != self.dim:
            raise ValueError("dimension mismatch")
        return all(iv.contains(x, strict=strict) for iv, x in zip(self.ivs, p))

    def contains_rect(self, other: "IntervalRect") -> bool:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return all(a.contains_interval(b) for a, b in zip(self.ivs, other.ivs))

    def intersects(self, other: "IntervalRect") -> bool:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return all(a.intersects(b) for a, b in zip(self.ivs, other.ivs))

    def hull(self, other: "IntervalRect") -> "IntervalRect":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return IntervalRect(hull(a, b) for a, b in zip(self.ivs, other.ivs))


# ---------------------------------------------------------------------------
# Vectorized kernels on arrays of endpoints.
#
# Each kernel takes and returns float64 arrays (lo, hi) and applies exactly
# the same endpoint formulas and nudges as the scalar operations above, so
# scalar and array paths agree bit for bit (a property the test suite pins).
# ---------------------------------------------------------------------------

_NEG = np.float64(-np.inf)
_POS = np.float64(np.inf)


def vdown(x: np.ndarray) -> np.ndarray:
    return np.nextafter(x, _NEG)


def vup(x: np.ndarray) -> np.ndarray:
    return np.nextafter(x, _POS)


def vadd(alo, ahi, blo, bhi):
    return vdown(alo + blo), vup(ahi + bhi)


def vsub(alo, ahi, blo, bhi):
    return vdown(alo - bhi), vup(ahi - blo)


def vmul(alo, ahi, blo, bhi):
    p1 = alo * blo
    p2 = alo * bhi
    p3 = ahi * blo
    p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return vdown(lo), vup(hi)


def vsqr(alo, ahi):
    s1 = alo * alo
    s2 = ahi * ahi
    hi = vup(np.maximum(s1, s2))
    lo = np.maximum(vdown(np.minimum(s1, s2)), 0.0)
    straddle = (alo <= 0.0) & (ahi >= 0.0)
    lo = np.where(straddle, 0.0, lo)
    return lo, hi


def vscale(alo, ahi, c: float):
    if not math.isfinite(c):
        raise EnclosureError(f"non-finite scale factor {c!r}")
    p1 = alo * c
    p2 = ahi * c
    return vdown(np.minimum(p1, p2)), vup(np.maximum(p1, p2))


def _exp_nearest(values: np.ndarray) -> np.ndarray:
    # math.exp keeps the faithful-rounding trust point a single routine;
    # numpy's SIMD exp carries a looser documented error bound.
    out = np.empty(values.shape, dtype=np.float64)
    flat = out.ravel()
    mexp = math.exp
    inf = math.inf
    for i, v in enumerate(values.ravel().tolist()):
        try:
            flat[i] = mexp(v)
        except OverflowError:
            flat[i] = inf
    return out


def vexp(alo, ahi):
    """Array exp; rows that overflow come back with an infinite upper
    endpoint for the caller to handle conservatively."""
    lo = np.maximum(vdown(vdown(_exp_nearest(alo))), 0.0)
    hi = vup(vup(_exp_nearest(ahi)))
    return lo, hi
