"""Parameter sweeps, clutching-graph matching, and continuation classes.

A sweep runs the box pipeline (representation, Morse decomposition,
optional recurrence analysis of the largest set) over every box of a
parameter grid. Adjacent boxes are then compared through the clutching
graph: a certified match requires a one-to-one, order-preserving
correspondence of Morse sets through shared grid cells. Classes of the
resulting equivalence relation form the continuation diagram.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynsys import ParamBox, get_map
from .errors import ContractViolation, MorserecError
from .graphrep import build_representation, morse_decomposition
from .grid import Grid
from .records import BoxRecord, RecSummary, SetSummary, read_box_record, write_box_record
from .recurrence import analyze_set

__all__ = [
    "ParameterGrid",
    "SweepOptions",
    "run_box",
    "sweep",
    "MatchResult",
    "clutching_match",
    "ContinuationDiagram",
    "continuation_classes",
]

REC_CARD_THRESHOLD = 1000


class ParameterGrid:
    """Uniform box grid over a rectangle of map parameters.

    ``varying`` names the parameters bound to the grid axes, in axis
    order; every other map parameter must be pinned in ``fixed``.
    """

    def __init__(
        self,
        bounds: list[tuple[float, float]],
        resolution: tuple[int, ...],
        varying: tuple[str, ...],
        fixed: dict[str, float],
    ):
        if len(varying) != len(resolution):
            raise ContractViolation("one varying parameter per grid axis")
        if len(set(varying)) != len(varying):
            raise ContractViolation("varying parameter names must be distinct")
        overlap = set(varying) & set(fixed)
        if overlap:
            raise ContractViolation(f"parameters both varying and fixed: {sorted(overlap)}")
        self.grid = Grid(bounds, resolution)
        self.varying = tuple(varying)
        self.fixed = dict(fixed)

    @property
    def resolution(self) -> tuple[int, ...]:
        return self.grid.resolution

    def n_boxes(self) -> int:
        return self.grid.n_cells

    def box_coords(self):
        """All box coordinates in row-major order."""
        return itertools.product(*(range(r) for r in self.grid.resolution))

    def param_rect(self, coords) -> dict[str, tuple[float, float]]:
        cell = self.grid.cell_bounds(tuple(coords))
        return {name: (cell[ax].lo, cell[ax].hi) for ax, name in enumerate(self.varying)}

    def param_box(self, coords) -> ParamBox:
        entries: dict = dict(self.fixed)
        entries.update(self.param_rect(coords))
        return ParamBox(entries)


@dataclass(frozen=True)
class SweepOptions:
    recurrence: bool = True
    rec_threshold: int = REC_CARD_THRESHOLD
    rec_method: str = "bfs"
    workers: int = 1


def run_box(
    map_name: str,
    pgrid: ParameterGrid,
    phase_grid: Grid,
    coords: tuple[int, ...],
    options: SweepOptions,
) -> BoxRecord:
    """Full single-box pipeline; failures land in the record, not in raises."""
    record = BoxRecord(
        coords=tuple(coords),
        map_name=map_name,
        varying=pgrid.param_rect(coords),
        fixed=dict(pgrid.fixed),
        phase_bounds=tuple((iv.lo, iv.hi) for iv in phase_grid.domain),
        resolution=phase_grid.resolution,
    )
    try:
        mapdef = get_map(map_name)
        rep = build_representation(mapdef, pgrid.param_box(coords), phase_grid)
        record.warnings.extend(rep.warnings)
        dec = morse_decomposition(rep)
        for i, cells in enumerate(dec.sets):
            bbox = dec.set_bbox_outer(i)
            record.sets.append(SetSummary(
                index=i,
                card=int(cells.size),
                attracting=bool(dec.attracting[i]),
                boundary=bool(dec.touches_boundary[i]),
                bbox_lo=tuple(iv.lo for iv in bbox),
                bbox_hi=tuple(iv.hi for iv in bbox),
                cells=cells,
            ))
        record.reduced_edges = dec.reduced_edges
        if options.recurrence and dec.n_sets:
            big = dec.largest_set_index()
            card = int(dec.sets[big].size)
            if card < options.rec_threshold:
                record.rec_skipped = (
                    f"largest set {big} has {card} cells; below threshold {options.rec_threshold}"
                )
            else:
                fld = analyze_set(rep, dec.sets[big], method=options.rec_method)
                record.rec = RecSummary(
                    set_index=big,
                    card=fld.card,
                    mean=fld.mean,
                    median=fld.median,
                    frrv=fld.frrv,
                    nfrrv=fld.nfrrv,
                    histogram=fld.histogram,
                    rec=fld.rec,
                )
    except MorserecError as exc:
        record.failure = f"{type(exc).__name__}: {exc}"
    return record


def _box_filename(coords: tuple[int, ...]) -> str:
    return "_".join(str(c) for c in coords) + ".csv"


def _run_box_star(args):
    return run_box(*args)


def sweep(
    map_name: str,
    pgrid: ParameterGrid,
    phase_grid: Grid,
    options: SweepOptions = SweepOptions(),
    out_dir: str | None = None,
) -> dict[tuple[int, ...], BoxRecord]:
    """Run every parameter box; resume from readable records in out_dir.

    Results are keyed by box coordinates, so worker count and execution
    order cannot change the outcome.
    """
    boxes = list(pgrid.box_coords())
    records: dict[tuple[int, ...], BoxRecord] = {}
    pending = []
    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, "boxes"), exist_ok=True)
    for coords in boxes:
        if out_dir is not None:
            path = os.path.join(out_dir, "boxes", _box_filename(coords))
            if os.path.exists(path):
                try:
                    records[coords] = read_box_record(path)
                    continue
                except (MorserecError, ValueError):
                    pass  # unreadable checkpoint: recompute
        pending.append(coords)

    def finish(coords, record):
        records[coords] = record
        if out_dir is not None:
            write_box_record(record, os.path.join(out_dir, "boxes", _box_filename(coords)))

    if options.workers <= 1 or len(pending) <= 1:
        for coords in pending:
            finish(coords, run_box(map_name, pgrid, phase_grid, coords, options))
    else:
        args = [(map_name, pgrid, phase_grid, coords, options) for coords in pending]
        with ProcessPoolExecutor(max_workers=options.workers) as pool:
            for coords, record in zip(pending, pool.map(_run_box_star, args, chunksize=1)):
                finish(coords, record)
    return records


@dataclass(frozen=True)
class MatchResult:
    ok: bool
    reason: str = ""
    bijection: tuple[tuple[int, int], ...] = ()


def _certified_sets(record: BoxRecord) -> list[SetSummary] | None:
    if not record.ok:
        return None
    if any(s.boundary for s in record.sets):
        return None
    return record.sets


def clutching_match(rec_a: BoxRecord, rec_b: BoxRecord) -> MatchResult:
    """Compare two decompositions through shared grid cells.

    Success requires every connected component of the bipartite
    cell-intersection graph to pair exactly one set from each side, and
    the pairing to carry the reachability order of one decomposition
    exactly onto the other's.
    """
    sets_a = _certified_sets(rec_a)
    sets_b = _certified_sets(rec_b)
    if sets_a is None or sets_b is None:
        return MatchResult(False, "boundary" if (rec_a.ok and rec_b.ok) else "failed")
    if rec_a.resolution != rec_b.resolution or rec_a.phase_bounds != rec_b.phase_bounds:
        raise ContractViolation("clutching requires a common phase grid")
    na, nb = len(sets_a), len(sets_b)
    parent = list(range(na + nb))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[ry] = rx

    # ownership lookup over the common phase grid beats pairwise intersection
    n_cells = int(np.prod(rec_a.resolution))
    owner_b = np.full(n_cells, -1, dtype=np.int32)
    for j, sb in enumerate(sets_b):
        owner_b[sb.cells] = j
    for i, sa in enumerate(sets_a):
        hits = np.unique(owner_b[sa.cells])
        for j in hits[hits >= 0]:
            union(i, na + int(j))
    comps: dict[int, list[int]] = {}
    for node in range(na + nb):
        comps.setdefault(find(node), []).append(node)
    bijection = []
    for members in comps.values():
        a_side = [m for m in members if m < na]
        b_side = [m - na for m in members if m >= na]
        if len(a_side) == 1 and len(b_side) == 1:
            bijection.append((a_side[0], b_side[0]))
        elif not a_side or not b_side:
            return MatchResult(False, "unmatched")
        else:
            return MatchResult(False, "merged")
    sigma = dict(bijection)
    order_a = rec_a.order_closure()
    order_b = rec_b.order_closure()
    mapped = {(sigma[i], sigma[j]) for (i, j) in order_a}
    if mapped != order_b:
        return MatchResult(False, "order")
    return MatchResult(True, "", tuple(sorted(bijection)))


@dataclass(frozen=True)
class ContinuationDiagram:
    resolution: tuple[int, ...]
    labels: np.ndarray                      # per-box class label, row-major array
    n_classes: int
    failed_edges: tuple[tuple[tuple[int, ...], tuple[int, ...], str], ...] = field(repr=False)

    def label(self, coords) -> int:
        return int(self.labels[tuple(coords)])


def continuation_classes(
    records: dict[tuple[int, ...], BoxRecord],
    pgrid: ParameterGrid,
) -> ContinuationDiagram:
    """Union boxes across faces where the clutching match certifies
    equivalent decompositions; label classes in row-major first-seen order."""
    res = pgrid.resolution
    boxes = list(pgrid.box_coords())
    index = {c: i for i, c in enumerate(boxes)}
    parent = list(range(len(boxes)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    failed = []
    for coords in boxes:
        for ax in range(len(res)):
            nb = list(coords)
            nb[ax] += 1
            if nb[ax] >= res[ax]:
                continue
            nb = tuple(nb)
            m = clutching_match(records[coords], records[nb])
            if m.ok:
                ra, rb = find(index[coords]), find(index[nb])
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            else:
                failed.append((coords, nb, m.reason))
    labels = np.full(res, -1, dtype=np.int64)
    next_label = 0
    for coords in boxes:
        root = find(index[coords])
        root_coords = boxes[root]
        if labels[root_coords] < 0:
            labels[root_coords] = next_label
            next_label += 1
        labels[tuple(coords)] = labels[root_coords]
    return ContinuationDiagram(
        resolution=res,
        labels=labels,
        n_classes=next_label,
        failed_edges=tuple(failed),
    )
