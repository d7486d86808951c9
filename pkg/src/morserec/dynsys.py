"""Built-in map families and the registry for user-defined ones.

Each map family provides four evaluators:

* ``eval_point``      - plain double arithmetic, non-rigorous; non-finite
                        results signal divergence and are returned as data.
* ``eval_point_batch``- same semantics on (m, dim) state arrays.  Built-in
                        maps use numpy's vectorized transcendentals here, so
                        this path is for simulation only, not for enclosures.
* ``eval_interval``   - outward-rounded enclosure of the image of a box under
                        every map in the parameter box (scalar path).
* ``eval_interval_batch`` - the same enclosure on arrays of box endpoints,
                        bit-identical to the scalar path.

Interval evaluation follows the literal textbook structure of each formula
(for Chialvo, x^2 and e^(y-x) are enclosed separately and multiplied; no
algebraic rewriting), so the enclosures are exactly as tight as the formulas
themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import interval as iv
from .errors import UsageError
from .interval import Interval, IntervalRect

__all__ = ["ParamBox", "MapDef", "register_map", "get_map", "map_names"]


class ParamBox:
    """Named parameter intervals; scalar values become degenerate intervals."""

    __slots__ = ("_ivs",)

    def __init__(self, params: Mapping[str, object]):
        ivs = {}
        for name, value in params.items():
            if isinstance(value, Interval):
                ivs[name] = value
            elif isinstance(value, (tuple, list)):
                ivs[name] = Interval(float(value[0]), float(value[1]))
            else:
                ivs[name] = Interval(float(value))
        object.__setattr__(self, "_ivs", ivs)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("ParamBox is immutable")

    def __reduce__(self):
        return (ParamBox, (self._ivs,))

    def __getitem__(self, name: str) -> Interval:
        return self._ivs[name]

    def __contains__(self, name: str) -> bool:
        return name in self._ivs

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamBox):
            return NotImplemented
        return self._ivs == other._ivs

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}=[{v.lo!r}, {v.hi!r}]" for k, v in self._ivs.items())
        return f"ParamBox({inner})"

    def names(self) -> tuple[str, ...]:
        return tuple(self._ivs)

    def items(self):
        return self._ivs.items()

    def midpoint(self) -> dict[str, float]:
        return {k: v.mid for k, v in self._ivs.items()}


@dataclass(frozen=True)
class MapDef:
    """A parameterized map family.

    ``batch`` evaluators are optional; when omitted they fall back to looping
    the scalar ones, which keeps user-defined maps easy to register.
    """

    name: str
    dim: int
    param_names: tuple[str, ...]
    defaults: dict[str, float]
    point_fn: Callable
    interval_fn: Callable
    point_batch_fn: Callable | None = None
    interval_batch_fn: Callable | None = None

    def _check_params(self, params) -> None:
        missing = [p for p in self.param_names if p not in params]
        if missing:
            raise UsageError(f"map {self.name!r} missing parameters {missing}")

    def eval_point(self, params: Mapping[str, float], state) -> tuple:
        self._check_params(params)
        return self.point_fn(params, state)

    def eval_point_batch(self, params: Mapping[str, float], states: np.ndarray) -> np.ndarray:
        self._check_params(params)
        if self.point_batch_fn is not None:
            return self.point_batch_fn(params, states)
        out = np.empty_like(states)
        for i in range(states.shape[0]):
            out[i] = self.point_fn(params, tuple(states[i]))
        return out

    def eval_interval(self, params: ParamBox, rect: IntervalRect) -> IntervalRect:
        self._check_params(params)
        if isinstance(rect, tuple):
            rect = IntervalRect(rect)
        return self.interval_fn(params, rect)

    def eval_interval_batch(
        self, params: ParamBox, lo: np.ndarray, hi: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Enclosures for m boxes given as (m, dim) endpoint arrays.

        Rows whose enclosure overflows come back non-finite instead of
        raising; the representation builder downgrades them conservatively.
        """
        self._check_params(params)
        if self.interval_batch_fn is not None:
            return self.interval_batch_fn(params, lo, hi)
        m = lo.shape[0]
        out_lo = np.empty_like(lo)
        out_hi = np.empty_like(hi)
        for i in range(m):
            try:
                rect = self.interval_fn(
                    params,
                    IntervalRect(
                        Interval(lo[i, ax], hi[i, ax]) for ax in range(self.dim)
                    ),
                )
                out_lo[i] = rect.los
                out_hi[i] = rect.his
            except iv.EnclosureError:
                out_lo[i] = -np.inf
                out_hi[i] = np.inf
        return out_lo, out_hi


_REGISTRY: dict[str, MapDef] = {}


def register_map(mapdef: MapDef, replace: bool = False) -> MapDef:
    if mapdef.name in _REGISTRY and not replace:
        raise ValueError(f"map {mapdef.name!r} already registered")
    _REGISTRY[mapdef.name] = mapdef
    return mapdef


def get_map(name: str) -> MapDef:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UsageError(
            f"unknown map {name!r}; available: {', '.join(sorted(_REGISTRY))}"
        ) from None


def map_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


# ---------------------------------------------------------------------------
# Chialvo neuron map:  x' = x^2 e^(y-x) + k,   y' = a y - b x + c
# ---------------------------------------------------------------------------


def _chialvo_point(p, state):
    x, y = state
    try:
        e = math.exp(y - x)
    except OverflowError:
        e = math.inf
    return (x * x * e + p["k"], p["a"] * y - p["b"] * x + p["c"])


def _chialvo_point_batch(p, states):
    x = states[:, 0]
    y = states[:, 1]
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        xn = x * x * np.exp(y - x) + p["k"]
        yn = p["a"] * y - p["b"] * x + p["c"]
    return np.stack([xn, yn], axis=1)


def _chialvo_interval(p, rect):
    X, Y = rect[0], rect[1]
    xn = iv.add(iv.mul(iv.sqr(X), iv.exp(iv.sub(Y, X))), p["k"])
    yn = iv.add(iv.sub(iv.mul(p["a"], Y), iv.mul(p["b"], X)), p["c"])
    return IntervalRect((xn, yn))

def _chialvo_interval_batch(p, lo, hi):
    xlo, xhi = lo[:, 0], hi[:, 0]
    ylo, yhi = lo[:, 1], hi[:, 1]
    a, b, c, k = p["a"], p["b"], p["c"], p["k"]
    sq_lo, sq_hi = iv.vsqr(xlo, xhi)
    d_lo, d_hi = iv.vsub(ylo, yhi, xlo, xhi)
    e_lo, e_hi = iv.vexp(d_lo, d_hi)
    pr_lo, pr_hi = iv.vmul(sq_lo, sq_hi, e_lo, e_hi)
    xn_lo, xn_hi = iv.vadd(pr_lo, pr_hi, k.lo, k.hi)
    ay_lo, ay_hi = iv.vmul(a.lo, a.hi, ylo, yhi)
    bx_lo, bx_hi = iv.vmul(b.lo, b.hi, xlo, xhi)
    s_lo, s_hi = iv.vsub(ay_lo, ay_hi, bx_lo, bx_hi)
    yn_lo, yn_hi = iv.vadd(s_lo, s_hi, c.lo, c.hi)
    return np.stack([xn_lo, yn_lo], axis=1), np.stack([xn_hi, yn_hi], axis=1)


CHIALVO = register_map(
    MapDef(
        name="chialvo",
        dim=2,
        param_names=("a", "b", "c", "k"),
        # customary excitable-regime values; b, k are the usual sweep axes
        defaults={"a": 0.89, "b": 0.6, "c": 0.28, "k": 0.03},
        point_fn=_chialvo_point,
        interval_fn=_chialvo_interval,
        point_batch_fn=_chialvo_point_batch,
        interval_batch_fn=_chialvo_interval_batch,
    )
)


# ---------------------------------------------------------------------------
# Henon map:  x' = 1 + y - a x^2,   y' = b x
# ---------------------------------------------------------------------------


def _henon_point(p, state):
    x, y = state
    return (1.0 + y - p["a"] * x * x, p["b"] * x)


def _henon_point_batch(p, states):
    x = states[:, 0]
    y = states[:, 1]
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        xn = 1.0 + y - p["a"] * x * x
        yn = p["b"] * x
    return np.stack([xn, yn], axis=1)


_ONE = Interval(1.0)


def _henon_interval(p, rect):
    X, Y = rect[0], rect[1]
    xn = iv.sub(iv.add(_ONE, Y), iv.mul(p["a"], iv.sqr(X)))
    yn = iv.mul(p["b"], X)
    return IntervalRect((xn, yn))


def _henon_interval_batch(p, lo, hi):
    xlo, xhi = lo[:, 0], hi[:, 0]
    ylo, yhi = lo[:, 1], hi[:, 1]
    a, b = p["a"], p["b"]
    sq_lo, sq_hi = iv.vsqr(xlo, xhi)
    asq_lo, asq_hi = iv.vmul(a.lo, a.hi, sq_lo, sq_hi)
    oy_lo, oy_hi = iv.vadd(np.float64(1.0), np.float64(1.0), ylo, yhi)
    xn_lo, xn_hi = iv.vsub(oy_lo, oy_hi, asq_lo, asq_hi)
    yn_lo, yn_hi = iv.vmul(b.lo, b.hi, xlo, xhi)
    return np.stack([xn_lo, yn_lo], axis=1), np.stack([xn_hi, yn_hi], axis=1)


HENON = register_map(
    MapDef(
        name="henon",
        dim=2,
        param_names=("a", "b"),
        defaults={"a": 1.4, "b": 0.3},
        point_fn=_henon_point,
        interval_fn=_henon_interval,
        point_batch_fn=_henon_point_batch,
        interval_batch_fn=_henon_interval_batch,
    )
)


# ---------------------------------------------------------------------------
# Planar Leslie population model:
#   x' = (th1 x + th2 y) e^(-0.1 (x + y)),   y' = 0.7 x
# Default th1/th2 are indicative values for exercising the map family, not
# tied to any particular study.
# ---------------------------------------------------------------------------


def _leslie_point(p, state):
    x, y = state
    try:
        e = math.exp(-0.1 * (x + y))
    except OverflowError:
        e = math.inf
    return ((p["th1"] * x + p["th2"] * y) * e, 0.7 * x)


def _leslie_point_batch(p, states):
    x = states[:, 0]
    y = states[:, 1]
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        xn = (p["th1"] * x + p["th2"] * y) * np.exp(-0.1 * (x + y))
        yn = 0.7 * x
    return np.stack([xn, yn], axis=1)


def _leslie_interval(p, rect):
    X, Y = rect[0], rect[1]
    lin = iv.add(iv.mul(p["th1"], X), iv.mul(p["th2"], Y))
    decay = iv.exp(iv.scale(iv.add(X, Y), -0.1))
    return IntervalRect((iv.mul(lin, decay), iv.scale(X, 0.7)))


def _leslie_interval_batch(p, lo, hi):
    xlo, xhi = lo[:, 0], hi[:, 0]
    ylo, yhi = lo[:, 1], hi[:, 1]
    t1, t2 = p["th1"], p["th2"]
    ax_lo, ax_hi = iv.vmul(t1.lo, t1.hi, xlo, xhi)
    by_lo, by_hi = iv.vmul(t2.lo, t2.hi, ylo, yhi)
    lin_lo, lin_hi = iv.vadd(ax_lo, ax_hi, by_lo, by_hi)
    s_lo, s_hi = iv.vadd(xlo, xhi, ylo, yhi)
    sc_lo, sc_hi = iv.vscale(s_lo, s_hi, -0.1)
    e_lo, e_hi = iv.vexp(sc_lo, sc_hi)
    xn_lo, xn_hi = iv.vmul(lin_lo, lin_hi, e_lo, e_hi)
    yn_lo, yn_hi = iv.vscale(xlo, xhi, 0.7)
    return np.stack([xn_lo, yn_lo], axis=1), np.stack([xn_hi, yn_hi], axis=1)


LESLIE = register_map(
    MapDef(
        name="leslie",
        dim=2,
        param_names=("th1", "th2"),
        defaults={"th1": 20.0, "th2": 25.0},
        point_fn=_leslie_point,
        interval_fn=_leslie_interval,
        point_batch_fn=_leslie_point_batch,
        interval_batch_fn=_leslie_interval_batch,
    )
)
