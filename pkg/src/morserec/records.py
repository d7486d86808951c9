"""Per-parameter-box result records and their on-disk CSV form.

One file per box, line-oriented, schema-versioned. Cell sets are stored
as runs of consecutive linear indices, which keeps ring-shaped sets
compact while staying trivially parseable. Wall times never enter these
files so reruns stay byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .recurrence import ReducedHistogram

__all__ = [
    "SetSummary",
    "RecSummary",
    "BoxRecord",
    "SCHEMA_VERSION",
    "write_box_record",
    "read_box_record",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SetSummary:
    """One Morse set of a box: size, flags, outer bounding box, cells."""

    index: int
    card: int
    attracting: bool
    boundary: bool
    bbox_lo: tuple[float, ...]
    bbox_hi: tuple[float, ...]
    cells: np.ndarray = field(repr=False)  # (card,) int64 sorted linear indices


@dataclass(frozen=True)
class RecSummary:
    """Recurrence statistics of one analyzed Morse set."""

    set_index: int
    card: int
    mean: float
    median: float
    frrv: float
    nfrrv: float
    histogram: ReducedHistogram
    rec: np.ndarray = field(repr=False)  # aligned with the set's sorted cells


@dataclass
class BoxRecord:
    """Everything the pipeline derived for one parameter box."""

    coords: tuple[int, ...]
    map_name: str
    varying: dict[str, tuple[float, float]]
    fixed: dict[str, float]
    phase_bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    sets: list[SetSummary] = field(default_factory=list)
    reduced_edges: tuple[tuple[int, int], ...] = ()
    rec: RecSummary | None = None
    rec_skipped: str | None = None
    warnings: list[str] = field(default_factory=list)
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def n_sets(self) -> int:
        return len(self.sets)

    def order_closure(self) -> frozenset[tuple[int, int]]:
        """Flow-reachability pairs (set i runs to set j), regrown from the
        stored reduced edges; the transitive reduction loses nothing."""
        n = len(self.sets)
        adj: list[list[int]] = [[] for _ in range(n)]
        for i, j in self.reduced_edges:
            adj[i].append(j)
        pairs = set()
        for start in range(n):
            stack = list(adj[start])
            seen = set()
            while stack:
                v = stack.pop()
                if v in seen:
                    continue
                seen.add(v)
                pairs.add((start, v))
                stack.extend(adj[v])
        return frozenset(pairs)


def _runs(cells: np.ndarray) -> list[tuple[int, int]]:
    if cells.size == 0:
        return []
    breaks = np.nonzero(np.diff(cells) != 1)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [cells.size - 1]))
    return [(int(cells[s]), int(cells[e] - cells[s] + 1)) for s, e in zip(starts, ends)]


def _expand_runs(runs: list[tuple[int, int]]) -> np.ndarray:
    if not runs:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([np.arange(s, s + ln, dtype=np.int64) for s, ln in runs])


def _f(v) -> str:
    # numpy scalars repr as np.float64(...); normalize so the file format
    # only ever contains plain float literals
    return repr(float(v))


def write_box_record(rec: BoxRecord, path: str) -> None:
    lines = [f"schema,morserec-box,{SCHEMA_VERSION}"]
    lines.append("box," + ",".join(str(c) for c in rec.coords))
    lines.append(f"map,{rec.map_name}")
    for name, (lo, hi) in rec.varying.items():
        lines.append(f"param,{name},{_f(lo)},{_f(hi)}")
    for name, v in rec.fixed.items():
        lines.append(f"fixed,{name},{_f(v)}")
    for (lo, hi), r in zip(rec.phase_bounds, rec.resolution):
        lines.append(f"phase,{_f(lo)},{_f(hi)},{int(r)}")
    for w in rec.warnings:
        lines.append("warn," + w.replace(",", ";").replace("\n", " "))
    if rec.failure is not None:
        lines.append("failed," + rec.failure.replace(",", ";").replace("\n", " "))
        lines.append("end")
        _atomic_write(path, "\n".join(lines) + "\n")
        return
    lines.append(f"nsets,{len(rec.sets)}")
    for s in rec.sets:
        bbox = ",".join(_f(v) for v in (*s.bbox_lo, *s.bbox_hi))
        lines.append(
            f"set,{s.index},{s.card},{int(s.attracting)},{int(s.boundary)},{bbox}"
        )
        runs = ";".join(f"{a}:{n}" for a, n in _runs(s.cells))
        lines.append(f"cells,{s.index},{runs}")
    for i, j in rec.reduced_edges:
        lines.append(f"edge,{i},{j}")
    if rec.rec is not None:
        r = rec.rec
        lines.append(
            f"rec,{r.set_index},{r.card},{_f(r.mean)},{_f(r.median)},{_f(r.frrv)},{_f(r.nfrrv)}"
        )
        h = r.histogram
        bars = ",".join(_f(b) for b in h.bars)
        lines.append(f"rechist,{r.set_index},{_f(h.lo)},{_f(h.hi)},{int(h.degenerate)},{bars}")
        vals = ";".join(str(int(v)) for v in r.rec)
        lines.append(f"recvals,{r.set_index},{vals}")
    elif rec.rec_skipped is not None:
        lines.append("recskip," + rec.rec_skipped.replace(",", ";"))
    lines.append("end")
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path: str, text: str) -> None:
    import os

    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_box_record(path: str) -> BoxRecord:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("schema,morserec-box,"):
        raise ContractViolation(f"{path}: not a box record")
    version = int(lines[0].split(",")[2])
    if version != SCHEMA_VERSION:
        raise ContractViolation(f"{path}: unsupported schema version {version}")
    if lines[-1] != "end":
        raise ContractViolation(f"{path}: truncated record")
    coords: tuple[int, ...] = ()
    map_name = ""
    varying: dict[str, tuple[float, float]] = {}
    fixed: dict[str, float] = {}
    phase: list[tuple[float, float]] = []
    resolution: list[int] = []
    sets: dict[int, dict] = {}
    edges: list[tuple[int, int]] = []
    warnings: list[str] = []
    failure = None
    rec_summary = None
    rec_skipped = None
    rec_parts: dict[int, dict] = {}
    for ln in lines[1:-1]:
        kind, _, rest = ln.partition(",")
        if kind == "box":
            coords = tuple(int(x) for x in rest.split(","))
        elif kind == "map":
            map_name = rest
        elif kind == "param":
            name, lo, hi = rest.split(",")
            varying[name] = (float(lo), float(hi))
        elif kind == "fixed":
            name, v = rest.split(",")
            fixed[name] = float(v)
        elif kind == "phase":
            lo, hi, r = rest.split(",")
            phase.append((float(lo), float(hi)))
            resolution.append(int(r))
        elif kind == "warn":
            warnings.append(rest)
        elif kind == "failed":
            failure = rest
        elif kind == "nsets":
            pass
        elif kind == "set":
            parts = rest.split(",")
            idx = int(parts[0])
            n = (len(parts) - 4) // 2
            sets[idx] = {
                "card": int(parts[1]),
                "attracting": parts[2] == "1",
                "boundary": parts[3] == "1",
                "bbox_lo": tuple(float(x) for x in parts[4:4 + n]),
                "bbox_hi": tuple(float(x) for x in parts[4 + n:4 + 2 * n]),
            }
        elif kind == "cells":
            idx_s, _, runs_s = rest.partition(",")
            runs = []
            if runs_s:
                for item in runs_s.split(";"):
                    a, _, n = item.partition(":")
                    runs.append((int(a), int(n)))
            sets[int(idx_s)]["cells"] = _expand_runs(runs)
        elif kind == "edge":
            i, j = rest.split(",")
            edges.append((int(i), int(j)))
        elif kind == "rec":
            parts = rest.split(",")
            rec_parts.setdefault(int(parts[0]), {})["stats"] = parts
        elif kind == "rechist":
            parts = rest.split(",")
            rec_parts.setdefault(int(parts[0]), {})["hist"] = parts
        elif kind == "recvals":
            idx_s, _, vals = rest.partition(",")
            arr = np.array([int(v) for v in vals.split(";")], dtype=np.int64) \
                if vals else np.empty(0, dtype=np.int64)
            rec_parts.setdefault(int(idx_s), {})["vals"] = arr
        elif kind == "recskip":
            rec_skipped = rest
        else:
            raise ContractViolation(f"{path}: unknown record line kind {kind!r}")
    set_list = []
    for idx in sorted(sets):
        d = sets[idx]
        cells = d.get("cells", np.empty(0, dtype=np.int64))
        if cells.size != d["card"]:
            raise ContractViolation(f"{path}: set {idx} cell count mismatch")
        set_list.append(SetSummary(
            index=idx, card=d["card"], attracting=d["attracting"],
            boundary=d["boundary"], bbox_lo=d["bbox_lo"], bbox_hi=d["bbox_hi"],
            cells=cells,
        ))
    for idx, parts in rec_parts.items():
        stats = parts["stats"]
        hist = parts["hist"]
        rec_summary = RecSummary(
            set_index=idx,
            card=int(stats[1]),
            mean=float(stats[2]),
            median=float(stats[3]),
            frrv=float(stats[4]),
            nfrrv=float(stats[5]),
            histogram=ReducedHistogram(
                bars=tuple(float(x) for x in hist[4:14]),
                lo=float(hist[1]), hi=float(hist[2]), degenerate=hist[3] == "1",
            ),
            rec=parts.get("vals", np.empty(0, dtype=np.int64)),
        )
    return BoxRecord(
        coords=coords, map_name=map_name, varying=varying, fixed=fixed,
        phase_bounds=tuple(phase), resolution=tuple(resolution),
        sets=set_list, reduced_edges=tuple(edges), rec=rec_summary,
        rec_skipped=rec_skipped, warnings=warnings, failure=failure,
    )
