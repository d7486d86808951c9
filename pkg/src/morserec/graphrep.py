"""Combinatorial outer approximations and numerical Morse decompositions.

``build_representation`` turns a map family, a parameter box and a grid into
a directed graph on the grid cells: each cell's image enclosure is inflated
one ulp outward and covered by cells, so the true image of every point in the
cell lies in the *interior* of the union of the successor cells.  Because the
enclosure of a box image is itself a box, the successors of a cell always
form a contiguous index block; the representation stores the per-cell block
ranges and materializes flat CSR adjacency on demand.

Cells whose (inflated) image enclosure pokes out of the grid domain are
flagged ``escaped``.  Conceptually they feed a virtual sink outside the
domain; the sink is not a graph vertex, so no artificial recurrence can pass
through it, and any strongly connected component containing an escaped cell
is flagged as touching the boundary (not certified as an isolating
neighborhood) rather than dropped silently.

A Morse set is a strongly connected component with at least two vertices, or
a single vertex carrying a self-loop.  Sets are ordered deterministically by
their smallest member cell.  Reachability between Morse sets is stored in
flow direction (``flows``: trajectories run from source set to target set);
the conventional order relation reads ``i`` precedes ``j`` iff there is a
path from a cell of set ``j`` to a cell of set ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import interval as iv
from .dynsys import MapDef, ParamBox
from .errors import ContractViolation
from .grid import Grid
from .interval import Interval, IntervalRect

__all__ = [
    "Representation",
    "MorseDecomposition",
    "build_representation",
    "morse_decomposition",
    "is_attracting",
    "pseudo_orbit_delta",
]


def ragged_gather(indptr: np.ndarray, indices: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Concatenate the adjacency slices of ``verts`` (vectorized)."""
    verts = np.asarray(verts, dtype=np.int64)
    counts = indptr[verts + 1] - indptr[verts]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    cw = np.cumsum(counts)
    pos = (
        np.arange(total, dtype=np.int64)
        - np.repeat(cw - counts, counts)
        + np.repeat(indptr[verts], counts)
    )
    return indices[pos]


def reachable_from(indptr: np.ndarray, indices: np.ndarray, seeds, m: int) -> np.ndarray:
    """Boolean array of vertices reachable from ``seeds`` (seeds included)."""
    visited = np.zeros(m, dtype=bool)
    seeds = np.asarray(seeds, dtype=np.int64)
    visited[seeds] = True
    frontier = seeds
    while frontier.size:
        nxt = ragged_gather(indptr, indices, frontier)
        if nxt.size == 0:
            break
        nxt = nxt[~visited[nxt]]
        if nxt.size == 0:
            break
        visited[nxt] = True
        frontier = np.unique(nxt)
    return visited


def _expand_blocks(
    lo_idx: np.ndarray, hi_idx: np.ndarray, strides: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Flatten per-cell successor blocks into CSR (indptr, indices)."""
    m, n = lo_idx.shape
    widths = (hi_idx.astype(np.int64) - lo_idx + 1).clip(min=0)
    counts = widths.prod(axis=1)
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    src = np.flatnonzero(counts > 0)
    partial = np.zeros(src.size, dtype=np.int64)
    for ax in range(n):
        w = widths[src, ax]
        total = int(w.sum())
        repsrc = np.repeat(src, w)
        base = np.repeat(partial, w)
        cw = np.cumsum(w)
        offsets = np.arange(total, dtype=np.int64) - np.repeat(cw - w, w)
        partial = base + (lo_idx[repsrc, ax] + offsets) * strides[ax]
        src = repsrc
    return indptr, partial.astype(np.int32, copy=False)


@dataclass
class Representation:
    """Directed graph over grid cells enclosing the map's action."""

    grid: Grid
    map_name: str
    params: ParamBox
    succ_lo: np.ndarray  # (m, dim) int32, per-cell successor block (inclusive)
    succ_hi: np.ndarray  # lo > hi marks an empty (fully escaped) image
    escaped: np.ndarray  # (m,) bool
    warnings: list = field(default_factory=list)
    image_lo: np.ndarray | None = None  # optional raw enclosure cache
    image_hi: np.ndarray | None = None
    _csr: tuple | None = field(default=None, repr=False)

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    @property
    def dim(self) -> int:
        return self.grid.dim

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency as (indptr, indices); built once, then cached."""
        if self._csr is None:
            self._csr = _expand_blocks(self.succ_lo, self.succ_hi, self.grid._strides)
        return self._csr

    def n_edges(self) -> int:
        indptr, _ = self.csr()
        return int(indptr[-1])

    def successor_counts(self) -> np.ndarray:
        widths = (self.succ_hi.astype(np.int64) - self.succ_lo + 1).clip(min=0)
        return widths.prod(axis=1)

    def successors(self, cell) -> list:
        """Sorted successor cell ids of one cell (tuple or linear index)."""
        import itertools

        k = self.grid.lin(cell) if isinstance(cell, (tuple, list)) else int(cell)
        lo = self.succ_lo[k]
        hi = self.succ_hi[k]
        if (lo > hi).any():
            return []
        return [
            tuple(c)
            for c in itertools.product(*(range(int(l), int(h) + 1) for l, h in zip(lo, hi)))
        ]

    def self_loops(self) -> np.ndarray:
        coords = self.grid.all_coords()
        return ((self.succ_lo <= coords) & (coords <= self.succ_hi)).all(axis=1)

    def image_rect(self, cell) -> IntervalRect | None:
        """Raw image enclosure of a cell, when built with ``keep_images``."""
        if self.image_lo is None:
            return None
        k = self.grid.lin(cell) if isinstance(cell, (tuple, list)) else int(cell)
        if not (np.isfinite(self.image_lo[k]).all() and np.isfinite(self.image_hi[k]).all()):
            return None
        return IntervalRect.from_bounds(self.image_lo[k], self.image_hi[k])


def build_representation(
    mapdef: MapDef, params, grid: Grid, keep_images: bool = False
) -> Representation:
    """Enclose the action of every map in ``params`` on every grid cell.

    Cells whose image enclosure overflows are marked escaped with an empty
    successor block and counted in ``warnings`` (conservative degradation,
    never silent).
    """
    if not isinstance(params, ParamBox):
        params = ParamBox(params)
    if mapdef.dim != grid.dim:
        raise ValueError(f"map dim {mapdef.dim} != grid dim {grid.dim}")
    lo, hi = grid.all_cell_bounds()
    # overflowed rows are expected data (they become escaped cells below),
    # so numpy's inf/nan chatter is suppressed for the batch evaluation
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        out_lo, out_hi = mapdef.eval_interval_batch(params, lo, hi)
    finite = np.isfinite(out_lo).all(axis=1) & np.isfinite(out_hi).all(axis=1)
    m = lo.shape[0]
    warnings: list = []
    if bool(finite.all()):
        inf_lo = iv.vdown(out_lo)
        inf_hi = iv.vup(out_hi)
        succ_lo, succ_hi, escaped = grid.cover_ranges(inf_lo, inf_hi)
    else:
        nbad = int(m - np.count_nonzero(finite))
        warnings.append(f"{nbad} cells with non-finite image enclosure marked escaped")
        succ_lo = np.zeros((m, grid.dim), dtype=np.int64)
        succ_hi = np.full((m, grid.dim), -1, dtype=np.int64)
        escaped = np.ones(m, dtype=bool)
        rows = np.flatnonzero(finite)
        inf_lo = iv.vdown(out_lo[rows])
        inf_hi = iv.vup(out_hi[rows])
        bl, bh, esc = grid.cover_ranges(inf_lo, inf_hi)
        succ_lo[rows] = bl
        succ_hi[rows] = bh
        escaped[rows] = esc
    return Representation(
        grid=grid,
        map_name=mapdef.name,
        params=params,
        succ_lo=succ_lo.astype(np.int32, copy=False),
        succ_hi=succ_hi.astype(np.int32, copy=False),
        escaped=escaped,
        warnings=warnings,
        image_lo=out_lo if keep_images else None,
        image_hi=out_hi if keep_images else None,
    )


@dataclass
class MorseDecomposition:
    """Morse sets of a representation plus their reachability structure.

    ``sets[i]`` holds sorted linear cell ids.  ``flows`` is the transitive
    closure of between-set reachability in flow direction (i -> j means some
    cell of set i reaches a cell of set j); ``reduced_edges`` is its
    transitive reduction, which regenerates ``flows`` under closure.  The
    order relation ``i precedes j`` is ``(j, i) in flows``.
    """

    rep: Representation
    sets: list  # list[np.ndarray] of sorted linear cell ids
    attracting: np.ndarray
    touches_boundary: np.ndarray
    flows: frozenset
    reduced_edges: tuple

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    @property
    def order(self) -> frozenset:
        return frozenset((i, j) for (j, i) in self.flows)

    def precedes(self, i: int, j: int) -> bool:
        return (j, i) in self.flows

    def set_card(self, i: int) -> int:
        return int(self.sets[i].size)

    def set_coords(self, i: int) -> np.ndarray:
        res = self.rep.grid.resolution
        return np.array(np.unravel_index(self.sets[i], res)).T

    def set_bbox_outer(self, i: int) -> IntervalRect:
        coords = self.set_coords(i)
        return self.rep.grid.block_hull_outer(coords.min(axis=0), coords.max(axis=0))

    def largest_set_index(self) -> int:
        if not self.sets:
            raise ContractViolation("decomposition has no Morse sets")
        cards = [s.size for s in self.sets]
        return int(np.argmax(cards))  # ties: first in deterministic order


def morse_decomposition(rep: Representation) -> MorseDecomposition:
    """Nontrivial strongly connected components plus reachability order."""
    indptr, indices = rep.csr()
    m = rep.n_cells
    mat = sp.csr_matrix(
        (np.ones(indices.size, dtype=np.int8), indices, indptr), shape=(m, m)
    )
    ncomp, labels = csgraph.connected_components(
        mat, directed=True, connection="strong"
    )
    sizes = np.bincount(labels, minlength=ncomp)
    has_loop = np.zeros(ncomp, dtype=bool)
    has_loop[labels[rep.self_loops()]] = True
    keep = (sizes >= 2) | has_loop

    grouped = np.argsort(labels, kind="stable")
    starts = np.zeros(ncomp + 1, dtype=np.int64)
    np.cumsum(sizes, out=starts[1:])
    comp_ids = np.flatnonzero(keep)
    # deterministic order: by smallest member cell (first of each group,
    # since stable argsort keeps ascending cell ids within a label)
    first_cells = grouped[starts[comp_ids]]
    comp_ids = comp_ids[np.argsort(first_cells)]
    sets = [
        np.sort(grouped[starts[c] : starts[c + 1]]).astype(np.int64) for c in comp_ids
    ]

    p = len(sets)
    coords_res = np.asarray(rep.grid.resolution)
    attracting = np.zeros(p, dtype=bool)
    touches = np.zeros(p, dtype=bool)
    for i, cells in enumerate(sets):
        coords = np.array(np.unravel_index(cells, rep.grid.resolution)).T
        on_boundary = ((coords == 0) | (coords == coords_res - 1)).any()
        touches[i] = bool(rep.escaped[cells].any() or on_boundary)
        attracting[i] = is_attracting(rep, cells)

    flows = set()
    for i, cells in enumerate(sets):
        visited = reachable_from(indptr, indices, cells, m)
        for j, other in enumerate(sets):
            if i != j and visited[other].any():
                flows.add((i, j))
    reduced = tuple(
        sorted(
            (i, j)
            for (i, j) in flows
            if not any((i, k) in flows and (k, j) in flows for k in range(p))
        )
    )
    return MorseDecomposition(
        rep=rep,
        sets=sets,
        attracting=attracting,
        touches_boundary=touches,
        flows=frozenset(flows),
        reduced_edges=reduced,
    )


def is_attracting(rep: Representation, cells) -> bool:
    """True iff all successors of ``cells`` stay inside and none escaped."""
    cells = np.asarray(cells, dtype=np.int64)
    if cells.size == 0:
        raise ContractViolation("empty cell set")
    if rep.escaped[cells].any():
        return False
    indptr, indices = rep.csr()
    member = np.zeros(rep.n_cells, dtype=bool)
    member[cells] = True
    succ = ragged_gather(indptr, indices, cells)
    return bool(member[succ].all())


def pseudo_orbit_delta(rep: Representation, cells) -> float:
    """Pseudo-orbit jump bound for a Morse set.

    Maximum over the set's cells of the Euclidean diameter of the hull of the
    cell's successor cells *within the set* (the restricted map's image).
    The hull uses outward-rounded cell bounds, so the bound errs upward.
    """
    cells = np.sort(np.asarray(cells, dtype=np.int64))
    if cells.size == 0:
        raise ContractViolation("empty cell set")
    indptr, indices = rep.csr()
    member = np.zeros(rep.n_cells, dtype=bool)
    member[cells] = True
    counts = indptr[cells + 1] - indptr[cells]
    succ = ragged_gather(indptr, indices, cells)
    owner = np.repeat(np.arange(cells.size), counts)
    inside = member[succ]
    succ = succ[inside]
    owner = owner[inside]
    seg = np.bincount(owner, minlength=cells.size)
    if (seg == 0).any():
        raise ContractViolation(
            "restricted successor set empty for some cell; not a Morse set"
        )
    starts = np.zeros(cells.size, dtype=np.int64)
    np.cumsum(seg[:-1], out=starts[1:])
    coords = np.array(np.unravel_index(succ, rep.grid.resolution))
    sq = np.zeros(cells.size, dtype=np.float64)
    for ax in range(rep.dim):
        mn = np.minimum.reduceat(coords[ax], starts)
        mx = np.maximum.reduceat(coords[ax], starts)
        w = rep.grid.edges_hi(ax)[mx + 1] - rep.grid.edges_lo(ax)[mn]
        sq += w * w
    return float(np.sqrt(sq).max())
