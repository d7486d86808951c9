"""Plain floating-point trajectory simulation.

Everything here is heuristic: settling bounds for choosing an analysis
domain and cover-size maps for spotting large attractors. Nothing feeds
the certified pipeline, so batched numpy evaluation without directed
rounding is fine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynsys import MapDef
from .errors import ContractViolation
from .grid import Grid

__all__ = [
    "SimConfig",
    "lattice",
    "TrajectorySummary",
    "simulate",
    "union_bounds",
    "attractor_cover_size",
    "COVER_ICS",
]

# initial conditions used for the cover-size maps
COVER_ICS = ((0.01, 0.01), (1.0, 1.0), (10.0, 2.0), (2.0, 10.0))


@dataclass(frozen=True)
class SimConfig:
    burn_in: int = 10_000
    sample: int = 100
    cover_grid: Grid | None = None

    def __post_init__(self):
        if self.burn_in < 0 or self.sample < 0:
            raise ContractViolation("burn_in and sample must be >= 0")


def lattice(rect: list[tuple[float, float]], counts: tuple[int, ...]) -> np.ndarray:
    """Uniformly spaced points including both endpoints of every axis."""
    axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(rect, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class TrajectorySummary:
    ic: tuple[float, ...]
    lo: np.ndarray          # coordinate-wise min over the sample window
    hi: np.ndarray
    diverged: bool


def simulate(
    mapdef: MapDef,
    params: dict[str, float],
    ics: np.ndarray,
    cfg: SimConfig = SimConfig(),
) -> list[TrajectorySummary]:
    """Iterate all initial conditions together; record tail bounds per IC.

    Non-finite values propagate through the batch harmlessly and show up
    as a diverged flag instead of an exception.
    """
    ics = np.atleast_2d(np.asarray(ics, dtype=np.float64))
    state = ics.copy()
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for _ in range(cfg.burn_in):
            state = mapdef.eval_point_batch(params, state)
        if cfg.sample == 0:
            lo = state.copy()
            hi = state.copy()
        else:
            # window = the `sample` iterates following the burn-in state
            lo = np.full_like(state, np.inf)
            hi = np.full_like(state, -np.inf)
            for _ in range(cfg.sample):
                state = mapdef.eval_point_batch(params, state)
                np.minimum(lo, state, out=lo)
                np.maximum(hi, state, out=hi)
    out = []
    for i in range(ics.shape[0]):
        bad = not (np.isfinite(lo[i]).all() and np.isfinite(hi[i]).all())
        out.append(TrajectorySummary(
            ic=tuple(ics[i]), lo=lo[i], hi=hi[i], diverged=bad,
        ))
    return out


def union_bounds(summaries: list[TrajectorySummary]) -> tuple[np.ndarray, np.ndarray] | None:
    """Joint bounding rect of all non-diverged tails; None if none survive."""
    good = [s for s in summaries if not s.diverged]
    if not good:
        return None
    lo = np.min([s.lo for s in good], axis=0)
    hi = np.max([s.hi for s in good], axis=0)
    return lo, hi


def attractor_cover_size(
    mapdef: MapDef,
    params: dict[str, float],
    cfg: SimConfig,
    ics: tuple[tuple[float, ...], ...] = COVER_ICS,
) -> int:
    """Largest number of distinct cover-grid cells visited by the sampled
    tail of any configured trajectory; diverged or escaped ones count 0."""
    if cfg.cover_grid is None:
        raise ContractViolation("attractor_cover_size needs cfg.cover_grid")
    g = cfg.cover_grid
    ic_arr = np.asarray(ics, dtype=np.float64)
    state = ic_arr.copy()
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for _ in range(cfg.burn_in):
            state = mapdef.eval_point_batch(params, state)
        visited: list[set] = [set() for _ in range(state.shape[0])]
        los = np.array([iv.lo for iv in g.domain])
        his = np.array([iv.hi for iv in g.domain])
        widths = his - los
        res = np.array(g.resolution)
        for _ in range(cfg.sample):
            state = mapdef.eval_point_batch(params, state)
            finite = np.isfinite(state).all(axis=1)
            rel = np.where(np.isfinite(state), state - los, 0.0) / widths
            idx = np.floor(rel * res).astype(np.int64, copy=False)
            ok = finite & (rel >= 0).all(axis=1) & (rel <= 1).all(axis=1)
            idx = np.clip(idx, 0, res - 1)
            for i in np.nonzero(ok)[0]:
                visited[int(i)].add(tuple(idx[i]))
    return max((len(v) for v in visited), default=0)
