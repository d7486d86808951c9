"""Finite-resolution recurrence on a Morse set and derived statistics.

The recurrence time of a cell is the length of the shortest closed walk
through it in the combinatorial map graph restricted to the Morse set.
The default computation runs one breadth-first search per cell on the
reversed restricted graph and stops at the first successor reached,
avoiding the quadratic distance matrix; a literal distance-matrix
variant is kept for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import ContractViolation
from .graphrep import Representation

__all__ = [
    "RestrictedGraph",
    "restrict_to_set",
    "recurrence_times",
    "frrv",
    "nfrrv_value",
    "ReducedHistogram",
    "reduced_histogram",
    "median_rec",
    "RecurrenceField",
    "analyze_set",
]


@dataclass(frozen=True)
class RestrictedGraph:
    """Successor structure of a representation restricted to one cell set.

    Vertices are 0..n-1 in ascending order of the member cells' linear
    indices; ``cells`` maps a vertex back to its linear cell index.
    """

    cells: np.ndarray        # (n,) int64, sorted linear indices
    indptr: np.ndarray       # (n+1,) int64
    indices: np.ndarray      # (nnz,) int32, local vertex ids

    @property
    def n(self) -> int:
        return int(self.cells.size)

    def reversed_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        counts = np.bincount(self.indices, minlength=n)
        rptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=rptr[1:])
        order = np.argsort(self.indices, kind="stable")
        src = np.repeat(np.arange(n, dtype=np.int32), np.diff(self.indptr))
        return rptr, src[order]


def restrict_to_set(rep: Representation, cells: np.ndarray) -> RestrictedGraph:
    """Induced subgraph on ``cells``, mirroring a codomain restriction."""
    cells = np.unique(np.asarray(cells, dtype=np.int64))
    indptr, indices = rep.csr()
    m = rep.grid.n_cells
    local = np.full(m, -1, dtype=np.int64)
    local[cells] = np.arange(cells.size)
    starts = indptr[cells]
    ends = indptr[cells + 1]
    lens = ends - starts
    flat = indices[
        np.repeat(starts, lens) + _ragged_arange(lens)
    ] if lens.sum() else np.empty(0, dtype=indices.dtype)
    keep = local[flat] >= 0
    out_indices = local[flat[keep]].astype(np.int32)
    # per-row counts after filtering
    row_of = np.repeat(np.arange(cells.size), lens)[keep]
    counts = np.bincount(row_of, minlength=cells.size)
    out_indptr = np.zeros(cells.size + 1, dtype=np.int64)
    np.cumsum(counts, out=out_indptr[1:])
    return RestrictedGraph(cells=cells, indptr=out_indptr, indices=out_indices)


def _ragged_arange(lens: np.ndarray) -> np.ndarray:
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    ends = np.cumsum(lens)
    starts = ends - lens
    out[0] = 0
    nz = lens > 0
    idx = starts[nz][1:]
    out[idx] = 1 - lens[nz][:-1]
    return np.cumsum(out)


def _check_strongly_connected(g: RestrictedGraph) -> None:
    if g.n == 0:
        raise ContractViolation("recurrence requires a nonempty cell set")
    mat = csr_matrix(
        (np.ones(g.indices.size, dtype=np.int8), g.indices, g.indptr),
        shape=(g.n, g.n),
    )
    ncomp, _ = connected_components(mat, directed=True, connection="strong")
    if ncomp != 1:
        raise ContractViolation(
            f"recurrence requires a strongly connected cell set, found {ncomp} components"
        )


def _rec_bfs(g: RestrictedGraph) -> np.ndarray:
    """rec(v) = 1 + min distance from any successor of v back to v.

    One BFS per vertex on the reversed graph, stopping at the first level
    that reaches a successor of v. Stamp arrays avoid reallocation.
    """
    n = g.n
    rptr, rind = g.reversed_adjacency()
    rec = np.zeros(n, dtype=np.int64)
    visited = np.full(n, -1, dtype=np.int64)
    is_succ = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        succ = g.indices[g.indptr[v]:g.indptr[v + 1]]
        is_succ[succ] = v
        if is_succ[v] == v:
            rec[v] = 1
            continue
        # levels of the reversed BFS from v: dist_rev(v -> w) = dist(w -> v)
        frontier = np.array([v], dtype=np.int64)
        visited[v] = v
        depth = 0
        found = 0
        while frontier.size:
            nxt = rind[
                np.repeat(rptr[frontier], rptr[frontier + 1] - rptr[frontier])
                + _ragged_arange(rptr[frontier + 1] - rptr[frontier])
            ]
            nxt = nxt[visited[nxt] != v]
            if nxt.size == 0:
                break
            nxt = np.unique(nxt)
            visited[nxt] = v
            depth += 1
            if (is_succ[nxt] == v).any():
                found = depth + 1
                break
            frontier = nxt
        if not found:
            raise ContractViolation("no closed walk found; graph not strongly connected")
        rec[v] = found
    return rec


def _rec_distance_matrix(g: RestrictedGraph) -> np.ndarray:
    """Literal all-pairs form: rec(v) = min over u of D[v,u] + D[u,v].

    Self-loops give rec 1 through D odd handling: the diagonal of D is 0,
    so it is masked and loops are read off the adjacency directly.
    """
    mat = csr_matrix(
        (np.ones(g.indices.size, dtype=np.int8), g.indices, g.indptr),
        shape=(g.n, g.n),
    )
    dist = shortest_path(mat, method="D", directed=True, unweighted=True)
    total = dist + dist.T
    np.fill_diagonal(total, np.inf)
    rec = total.min(axis=1)
    has_loop = np.zeros(g.n, dtype=bool)
    ptr_deltas = np.diff(g.indptr)
    owners = np.repeat(np.arange(g.n), ptr_deltas)
    has_loop[owners[g.indices == owners]] = True
    rec[has_loop] = 1.0
    if not np.isfinite(rec).all():
        raise ContractViolation("no closed walk found; graph not strongly connected")
    return rec.astype(np.int64)


def recurrence_times(g: RestrictedGraph, method: str = "bfs") -> np.ndarray:
    """Shortest closed-walk length through each vertex of the restricted graph."""
    _check_strongly_connected(g)
    if method == "bfs":
        return _rec_bfs(g)
    if method == "distance-matrix":
        return _rec_distance_matrix(g)
    raise ContractViolation(f"unknown recurrence method {method!r}")


def frrv(coords: np.ndarray, values: np.ndarray) -> float:
    """Vitali-style variation: sum of |alternating corner sums| over all
    complete 2^n blocks of adjacent cells present in the field.

    ``coords`` are integer grid coordinates (m, n); blocks extending
    outside the present cells are skipped.
    """
    coords = np.asarray(coords)
    values = np.asarray(values)
    n = coords.shape[1]
    mins = coords.min(axis=0)
    dims = coords.max(axis=0) - mins + 1
    dense = np.zeros(dims, dtype=np.int64 if values.dtype.kind in "iu" else np.float64)
    present = np.zeros(dims, dtype=bool)
    idx = tuple((coords - mins).T)
    dense[idx] = values
    present[idx] = True

    if any(d < 2 for d in dims):
        return 0.0
    acc = np.zeros(tuple(d - 1 for d in dims), dtype=dense.dtype)
    ok = np.ones(tuple(d - 1 for d in dims), dtype=bool)
    for mask in range(2 ** n):
        offs = [(mask >> ax) & 1 for ax in range(n)]
        sl = tuple(slice(o, o + d - 1) for o, d in zip(offs, dims))
        sign = (-1) ** (n - sum(offs))
        acc = acc + sign * dense[sl]
        ok &= present[sl]
    return float(np.abs(acc[ok]).sum())


def nfrrv_value(frrv_total: float, mean_rec: float, card: int, n: int) -> float:
    """Variation normalized by mean recurrence and the n-th root of size."""
    if card <= 0 or mean_rec <= 0:
        raise ContractViolation("nfrrv needs a nonempty field with positive mean")
    return frrv_total / (mean_rec * card ** (1.0 / n))


@dataclass(frozen=True)
class ReducedHistogram:
    """Ten-bar normalized histogram of recurrence times above 1."""

    bars: tuple[float, ...]
    lo: float
    hi: float
    degenerate: bool


def reduced_histogram(rec: np.ndarray) -> ReducedHistogram:
    """Drop rec=1 cells, bin the rest into 10 equal-width bars summing to 1."""
    rec = np.asarray(rec)
    rest = rec[rec > 1]
    if rest.size == 0:
        return ReducedHistogram(bars=(0.0,) * 10, lo=0.0, hi=0.0, degenerate=True)
    m = float(rest.min())
    big = float(rest.max())
    if big == m:
        bars = [0.0] * 10
        bars[0] = 1.0
        return ReducedHistogram(bars=tuple(bars), lo=m, hi=big, degenerate=False)
    width = (big - m) / 10.0
    idx = np.minimum(((rest - m) / width).astype(np.int64), 9)
    counts = np.bincount(idx, minlength=10).astype(np.float64)
    bars = counts / counts.sum()
    return ReducedHistogram(bars=tuple(bars.tolist()), lo=m, hi=big, degenerate=False)


def median_rec(rec: np.ndarray) -> float:
    if np.asarray(rec).size == 0:
        raise ContractViolation("median of an empty recurrence field")
    return float(np.median(rec))


@dataclass(frozen=True)
class RecurrenceField:
    """Recurrence times over one Morse set plus derived statistics."""

    cells: np.ndarray          # (m,) int64 linear indices
    coords: np.ndarray         # (m, n) int64 grid coordinates
    rec: np.ndarray            # (m,) int64
    mean: float
    median: float
    frrv: float
    nfrrv: float
    histogram: ReducedHistogram = field(repr=False)

    @property
    def card(self) -> int:
        return int(self.cells.size)


def analyze_set(rep: Representation, cells: np.ndarray, method: str = "bfs") -> RecurrenceField:
    """Full recurrence analysis of one Morse set of a representation."""
    g = restrict_to_set(rep, cells)
    rec = recurrence_times(g, method=method)
    coords = np.column_stack(np.unravel_index(g.cells, rep.grid.resolution)).astype(np.int64)
    total = frrv(coords, rec)
    mean = float(rec.mean())
    return RecurrenceField(
        cells=g.cells,
        coords=coords,
        rec=rec,
        mean=mean,
        median=median_rec(rec),
        frrv=total,
        nfrrv=nfrrv_value(total, mean, g.n, rep.grid.dim),
        histogram=reduced_histogram(rec),
    )
