"""Command-line entry points, configuration files, and run directories.

Commands are thin orchestration over the library modules.  Every run
writes into a single-writer output directory with a versioned JSON
manifest; per-stage completion markers make re-runs no-ops and
interrupted runs resumable.  Wall-clock times go to ``timings.json``
only, never into comparable artifacts.

Exit codes: 0 success (possibly with warnings), 1 usage, 2 missing or
unreadable upstream artifact, 3 internal contract violation.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .cluster import PRESETS, dbscan, frr_features, histogram_features
from .continuation import (
    REC_CARD_THRESHOLD,
    ParameterGrid,
    SweepOptions,
    _box_filename,
    continuation_classes,
    run_box,
    sweep,
)
from .dynsys import ParamBox, get_map
from .errors import ContractViolation, DependencyError, MorserecError, UsageError
from .graphrep import build_representation
from .grid import Grid
from .records import read_box_record, write_box_record
from .recurrence import analyze_set
from .render import (
    colorbar_csv,
    morse_graph_dot,
    render_heatmap,
    render_sets,
    render_values,
)
from .sim import COVER_ICS, SimConfig, attractor_cover_size, lattice, simulate

__all__ = ["main", "console_main", "build_parser"]

CONFIG_VERSION = 1

# option names accepted both as flags and as config-file keys
_CONFIG_KEYS = frozenset({
    "map", "params", "phase_box", "resolution", "out", "scale",
    "recurrence", "rec_threshold", "rec_method", "workers", "deterministic",
    "param_box", "param_grid",
    "sweep_dir", "features", "eps", "minpts", "metric",
    "morse_set_file", "set_index",
    "ics", "ic_box", "ic_counts", "burn", "sample", "mode",
    "cover_box", "cover_resolution", "raster",
    "input",
})

# manifest keys that must match for a directory to accept a re-run
_COMPARABLE = (
    "command", "map", "fixed", "varying",
    "param_resolution", "phase_bounds", "phase_resolution", "options",
)


# ---------------------------------------------------------------------------
# flag/config value parsing
# ---------------------------------------------------------------------------

def _as_int(v, what: str) -> int:
    try:
        return int(v)
    except (TypeError, ValueError):
        raise UsageError(f"{what} must be an integer, got {v!r}") from None


def _as_float(v, what: str) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise UsageError(f"{what} must be a number, got {v!r}") from None


def _parse_value(v, what: str):
    """A parameter value: single number or lo:hi range."""
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise UsageError(f"{what}: range needs exactly lo and hi, got {v!r}")
        return (_as_float(v[0], what), _as_float(v[1], what))
    s = str(v)
    if ":" in s:
        lo, _, hi = s.partition(":")
        return (_as_float(lo, what), _as_float(hi, what))
    return _as_float(s, what)


def _parse_params(v) -> dict:
    """``a=0.89,k=0.02:0.04`` (or a config mapping) to name -> value/range."""
    if v is None or v == "":
        return {}
    if isinstance(v, dict):
        return {str(n): _parse_value(x, f"parameter {n!r}") for n, x in v.items()}
    out: dict = {}
    for entry in str(v).split(","):
        name, eq, val = entry.partition("=")
        name = name.strip()
        if not eq or not name:
            raise UsageError(f"parameters must be name=value entries, got {entry!r}")
        out[name] = _parse_value(val.strip(), f"parameter {name!r}")
    return out


def _parse_box(v, what: str) -> list[tuple[float, float]]:
    """``lo:hi,lo:hi`` (or a config list of pairs) to per-axis bounds."""
    if isinstance(v, (list, tuple)):
        parts = list(v)
    else:
        parts = [p.strip() for p in str(v).split(",")]
    out = []
    for part in parts:
        val = part if isinstance(part, tuple) else _parse_value(part, what)
        if not isinstance(val, tuple):
            raise UsageError(f"{what} axes must be lo:hi ranges, got {part!r}")
        out.append(val)
    return out


def _parse_ints(v, what: str, minimum: int = 1) -> tuple[int, ...]:
    if isinstance(v, (int, float)):
        vals = (_as_int(v, what),)
    elif isinstance(v, (list, tuple)):
        vals = tuple(_as_int(x, what) for x in v)
    else:
        vals = tuple(_as_int(x.strip(), what) for x in str(v).split(","))
    if any(x < minimum for x in vals):
        raise UsageError(f"{what} must be >= {minimum} per axis, got {vals}")
    return vals


def _parse_ics(v) -> np.ndarray:
    """``x,y;x,y`` (or a config list of points) to an (m, d) float array."""
    if isinstance(v, (list, tuple)):
        arr = np.asarray(v, dtype=np.float64)
    else:
        rows = [p for p in str(v).split(";") if p.strip()]
        arr = np.array(
            [[_as_float(x, "initial condition") for x in r.split(",")] for r in rows],
            dtype=np.float64,
        )
    arr = np.atleast_2d(arr)
    if not np.isfinite(arr).all():
        raise UsageError("initial conditions must be finite")
    return arr


def _make_grid(bounds, resolution) -> Grid:
    try:
        return Grid(bounds, resolution)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _split_params(mapdef, params: dict) -> tuple[dict, dict]:
    """Validate names against the map; split point values from ranges."""
    unknown = sorted(set(params) - set(mapdef.param_names))
    if unknown:
        raise UsageError(f"map {mapdef.name!r} has no parameters {unknown}")
    missing = sorted(set(mapdef.param_names) - set(params))
    if missing:
        raise UsageError(f"map {mapdef.name!r} missing parameters {missing}")
    fixed = {n: v for n, v in params.items() if not isinstance(v, tuple)}
    ranged = {n: v for n, v in params.items() if isinstance(v, tuple)}
    return fixed, ranged


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DependencyError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    version = cfg.pop("config_version", None)
    if version != CONFIG_VERSION:
        raise UsageError(
            f"config_version must be {CONFIG_VERSION}, got {version!r}"
        )
    unknown = sorted(set(cfg) - _CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys {unknown}")
    return cfg


def _opt(args, cfg: dict, name: str, default=None):
    """Flag beats config file beats built-in default."""
    v = getattr(args, name, None)
    if v is None:
        v = cfg.get(name)
    return default if v is None else v


def _recurrence_enabled(args, cfg: dict) -> bool:
    if args.no_recurrence:
        return False
    return bool(cfg.get("recurrence", True))


def _workers(args, cfg: dict) -> int:
    if args.deterministic or cfg.get("deterministic"):
        return 1
    return _as_int(_opt(args, cfg, "workers", os.cpu_count() or 1), "--workers")


# ---------------------------------------------------------------------------
# run directories: manifest, stage markers, atomic artifact writes
# ---------------------------------------------------------------------------

def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _save_manifest(out: str, man: dict) -> None:
    _write_text(os.path.join(out, "manifest.json"),
                json.dumps(man, indent=2, sort_keys=True) + "\n")


def _load_manifest(out: str) -> dict | None:
    path = os.path.join(out, "manifest.json")
    if not os.path.exists(path):
        return None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DependencyError(f"unreadable manifest {path}: {exc}") from None


def _open_run(out: str, fresh: dict) -> dict:
    """Create or re-open a run directory; refuse a mismatched configuration."""
    os.makedirs(out, exist_ok=True)
    existing = _load_manifest(out)
    if existing is not None:
        mine = {k: fresh.get(k) for k in _COMPARABLE}
        theirs = {k: existing.get(k) for k in _COMPARABLE}
        if _canon(mine) != _canon(theirs):
            diffs = [k for k in _COMPARABLE if _canon(mine[k]) != _canon(theirs[k])]
            raise UsageError(
                f"output directory {out} holds a different run (differs in {diffs}); "
                "use a fresh directory"
            )
        return existing
    fresh = dict(fresh)
    fresh.setdefault("stages", {})
    fresh.setdefault("completed", {})
    _save_manifest(out, fresh)
    return fresh


def _stage_done(man: dict, name: str, cfg: dict) -> bool:
    return bool(man.get("completed", {}).get(name)) and \
        _canon(man.get("stages", {}).get(name)) == _canon(cfg)


def _mark_stage(out: str, man: dict, name: str, cfg: dict) -> None:
    man.setdefault("stages", {})[name] = cfg
    man.setdefault("completed", {})[name] = True
    _save_manifest(out, man)


def _bump_timings(out: str, updates: dict) -> None:
    path = os.path.join(out, "timings.json")
    timings = {}
    if os.path.exists(path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                timings = json.load(fh)
        except (OSError, json.JSONDecodeError):
            timings = {}
    timings.update(updates)
    _write_text(path, json.dumps(timings, indent=2, sort_keys=True) + "\n")


class _PointParams:
    """Stands in for a ParameterGrid when no parameter varies."""

    def __init__(self, fixed: dict):
        self.fixed = dict(fixed)

    def param_rect(self, coords) -> dict:
        return {}

    def param_box(self, coords) -> ParamBox:
        return ParamBox(self.fixed)


# ---------------------------------------------------------------------------
# artifact writers shared between commands
# ---------------------------------------------------------------------------

def _coord_header(dim: int, tail: str) -> str:
    return ",".join([f"c{k}" for k in range(dim)] + [tail])


def _write_box_images(out: str, record, scale: int, prefix: str = "") -> list[str]:
    """Phase portrait, Morse graph text, and recurrence diagram of a record."""
    written = []
    if len(record.resolution) != 2:
        return written
    img = render_sets([s.cells for s in record.sets], record.resolution, scale)
    path = os.path.join(out, "images", f"{prefix}morse.ppm")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    img.save(path)
    written.append(path)
    dot = morse_graph_dot(
        [s.card for s in record.sets],
        [s.attracting for s in record.sets],
        record.reduced_edges,
    )
    gpath = os.path.join(out, "graphs", f"{prefix}morse.txt")
    _write_text(gpath, dot)
    written.append(gpath)
    if record.rec is not None:
        cells = record.sets[record.rec.set_index].cells
        rimg = render_values(cells, record.rec.rec, record.resolution, scale)
        rpath = os.path.join(out, "images", f"{prefix}rec.ppm")
        rimg.save(rpath)
        written.append(rpath)
        lo = float(record.rec.rec.min())
        hi = float(record.rec.rec.max())
        cpath = os.path.join(out, "features", f"{prefix}rec_colorbar.csv")
        _write_text(cpath, colorbar_csv(lo, hi))
        written.append(cpath)
    return written


def _labels_csv_text(labels: np.ndarray) -> str:
    lines = [_coord_header(labels.ndim, "label")]
    for coords in itertools.product(*(range(r) for r in labels.shape)):
        vals = ",".join(str(c) for c in coords)
        lines.append(f"{vals},{int(labels[coords])}")
    return "\n".join(lines) + "\n"


def _read_labels(out: str, resolution: tuple[int, ...]) -> np.ndarray:
    path = os.path.join(out, "labels", "continuation.csv")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = fh.read().splitlines()
    except OSError as exc:
        raise DependencyError(f"missing continuation labels: {exc}") from None
    labels = np.full(resolution, -1, dtype=np.int64)
    for row in rows[1:]:
        parts = row.split(",")
        labels[tuple(int(x) for x in parts[:-1])] = int(parts[-1])
    return labels


def _sweep_feature_text(records: dict) -> str:
    dim = len(next(iter(records))) if records else 0
    lines = [_coord_header(dim, "set,card,mean,median,frrv,nfrrv")]
    for coords in sorted(records):
        r = records[coords].rec
        if r is None:
            continue
        head = ",".join(str(c) for c in coords)
        lines.append(
            f"{head},{r.set_index},{r.card},{r.mean!r},{r.median!r},{r.frrv!r},{r.nfrrv!r}"
        )
    return "\n".join(lines) + "\n"


def _write_sweep_images(out: str, records: dict, labels: np.ndarray, scale: int) -> list[str]:
    written = []
    if labels.ndim != 2:
        return written
    nfrrv = np.full(labels.shape, np.nan)
    for coords, rec in records.items():
        if rec.ok and rec.rec is not None:
            nfrrv[coords] = rec.rec.nfrrv
    mask = ~np.isfinite(nfrrv)
    if not mask.all():
        img = render_heatmap(nfrrv, mask=mask, classes=labels, scale=scale)
        path = os.path.join(out, "images", "nfrrv.ppm")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        img.save(path)
        written.append(path)
        live = nfrrv[~mask]
        cpath = os.path.join(out, "features", "nfrrv_colorbar.csv")
        _write_text(cpath, colorbar_csv(float(live.min()), float(live.max())))
        written.append(cpath)
    cimg = render_heatmap(
        labels.astype(np.float64), mask=labels < 0, classes=labels, scale=scale
    )
    cpath = os.path.join(out, "images", "classes.ppm")
    os.makedirs(os.path.dirname(cpath), exist_ok=True)
    cimg.save(cpath)
    written.append(cpath)
    return written


def _load_records(out: str, resolution: tuple[int, ...]) -> dict:
    records = {}
    for coords in itertools.product(*(range(r) for r in resolution)):
        path = os.path.join(out, "boxes", _box_filename(coords))
        try:
            records[coords] = read_box_record(path)
        except OSError as exc:
            raise DependencyError(f"missing box record: {exc}") from None
    return records


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    map_name = _opt(args, cfg, "map")
    if map_name is None:
        raise UsageError("--map is required")
    mapdef = get_map(map_name)
    params = _parse_params(_opt(args, cfg, "params"))
    fixed, ranged = _split_params(mapdef, params)
    bounds = _parse_box(_opt(args, cfg, "phase_box") or _err("--phase-box"), "--phase-box")
    resolution = _parse_ints(_opt(args, cfg, "resolution") or _err("--resolution"), "--resolution")
    if len(resolution) == 1:
        resolution = resolution * len(bounds)
    out = _opt(args, cfg, "out")
    if out is None:
        raise UsageError("--out is required")
    scale = _as_int(_opt(args, cfg, "scale", 1), "--scale")
    options = SweepOptions(
        recurrence=_recurrence_enabled(args, cfg),
        rec_threshold=_as_int(_opt(args, cfg, "rec_threshold", REC_CARD_THRESHOLD), "--rec-threshold"),
        rec_method=str(_opt(args, cfg, "rec_method", "bfs")),
    )
    phase_grid = _make_grid(bounds, resolution)
    if ranged:
        names = tuple(ranged)
        pgrid = ParameterGrid([ranged[n] for n in names], (1,) * len(names), names, fixed)
        coords = (0,) * len(names)
    else:
        pgrid = _PointParams(fixed)
        coords = (0, 0)
    man = _open_run(out, {
        "schema": "morserec-run",
        "config_version": CONFIG_VERSION,
        "version": __version__,
        "command": "analyze",
        "map": map_name,
        "fixed": fixed,
        "varying": [[n, lo, hi] for n, (lo, hi) in ranged.items()],
        "param_resolution": [1] * len(ranged),
        "phase_bounds": [list(b) for b in bounds],
        "phase_resolution": list(resolution),
        "options": {
            "recurrence": options.recurrence,
            "rec_threshold": options.rec_threshold,
            "rec_method": options.rec_method,
        },
    })
    timings = {}
    box_path = os.path.join(out, "boxes", _box_filename(coords))
    record = None
    if _stage_done(man, "box", {}) and os.path.exists(box_path):
        try:
            record = read_box_record(box_path)
        except (MorserecError, ValueError, OSError):
            record = None
    if record is None:
        t0 = time.perf_counter()
        record = run_box(map_name, pgrid, phase_grid, coords, options)
        os.makedirs(os.path.dirname(box_path), exist_ok=True)
        write_box_record(record, box_path)
        timings["box_s"] = time.perf_counter() - t0
        if record.warnings:
            man.setdefault("warnings", {})[_box_filename(coords)[:-4]] = list(record.warnings)
        _mark_stage(out, man, "box", {})
    img_cfg = {"scale": scale}
    if not _stage_done(man, "images", img_cfg):
        t0 = time.perf_counter()
        _write_box_images(out, record, scale)
        timings["images_s"] = time.perf_counter() - t0
        _mark_stage(out, man, "images", img_cfg)
    if timings:
        timings["total_s"] = sum(timings.values())
        _bump_timings(out, timings)

    pstr = " ".join(
        f"{n}={v!r}" if not isinstance(v, tuple) else f"{n}={v[0]!r}:{v[1]!r}"
        for n, v in params.items()
    )
    print(f"map {map_name}  {pstr}")
    print(f"phase {' x '.join(f'[{lo!r}, {hi!r}]' for lo, hi in bounds)}  "
          f"resolution {'x'.join(str(r) for r in resolution)}")
    if record.failure:
        raise MorserecError(f"box computation failed: {record.failure}")
    print(f"Morse sets: {len(record.sets)}")
    for s in record.sets:
        flags = " attracting" if s.attracting else ""
        flags += " boundary" if s.boundary else ""
        bbox = " x ".join(f"[{lo!r}, {hi!r}]" for lo, hi in zip(s.bbox_lo, s.bbox_hi))
        print(f"  set {s.index}: card {s.card}{flags}  bbox {bbox}")
    if record.rec is not None:
        r = record.rec
        print(f"recurrence set {r.set_index}: mean {r.mean:.6g} median {r.median:.6g} "
              f"frrv {r.frrv:.6g} nfrrv {r.nfrrv:.6g}")
    elif record.rec_skipped:
        print(f"recurrence skipped: {record.rec_skipped}")
    for w in record.warnings:
        print(f"warning: {w}")
    print(f"wrote {out}")
    return 0


def _err(flag: str):
    raise UsageError(f"{flag} is required")


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    map_name = _opt(args, cfg, "map") or _err("--map")
    mapdef = get_map(map_name)
    fixed_in = _parse_params(_opt(args, cfg, "params"))
    pbox = _parse_params(_opt(args, cfg, "param_box") or _err("--param-box"))
    for n, v in pbox.items():
        if not isinstance(v, tuple):
            raise UsageError(f"--param-box entries must be ranges, got {n}={v!r}")
    for n, v in fixed_in.items():
        if isinstance(v, tuple):
            raise UsageError(f"fixed parameter {n} must be a single value; ranges belong in --param-box")
    fixed, ranged = _split_params(mapdef, {**fixed_in, **pbox})
    if set(ranged) != set(pbox):
        raise UsageError("--param-box and --params disagree about which parameters vary")
    names = tuple(pbox)  # axis order as given
    param_res = _parse_ints(_opt(args, cfg, "param_grid") or _err("--param-grid"), "--param-grid")
    if len(param_res) != len(names):
        raise UsageError(f"--param-grid needs {len(names)} axis counts, got {len(param_res)}")
    bounds = _parse_box(_opt(args, cfg, "phase_box") or _err("--phase-box"), "--phase-box")
    resolution = _parse_ints(_opt(args, cfg, "resolution") or _err("--resolution"), "--resolution")
    if len(resolution) == 1:
        resolution = resolution * len(bounds)
    out = _opt(args, cfg, "out") or _err("--out")
    scale = _as_int(_opt(args, cfg, "scale", 1), "--scale")
    options = SweepOptions(
        recurrence=_recurrence_enabled(args, cfg),
        rec_threshold=_as_int(_opt(args, cfg, "rec_threshold", REC_CARD_THRESHOLD), "--rec-threshold"),
        rec_method=str(_opt(args, cfg, "rec_method", "bfs")),
        workers=_workers(args, cfg),
    )
    try:
        pgrid = ParameterGrid([pbox[n] for n in names], param_res, names, fixed)
    except ContractViolation as exc:
        raise UsageError(str(exc)) from None
    phase_grid = _make_grid(bounds, resolution)
    man = _open_run(out, {
        "schema": "morserec-run",
        "config_version": CONFIG_VERSION,
        "version": __version__,
        "command": "sweep",
        "map": map_name,
        "fixed": fixed,
        "varying": [[n, lo, hi] for n, (lo, hi) in pbox.items()],
        "param_resolution": list(param_res),
        "phase_bounds": [list(b) for b in bounds],
        "phase_resolution": list(resolution),
        "options": {
            "recurrence": options.recurrence,
            "rec_threshold": options.rec_threshold,
            "rec_method": options.rec_method,
        },
    })
    timings = {}
    t0 = time.perf_counter()
    records = sweep(map_name, pgrid, phase_grid, options, out_dir=out)
    if not _stage_done(man, "boxes", {}):
        timings["boxes_s"] = time.perf_counter() - t0
        warn = {
            _box_filename(c)[:-4]: list(r.warnings)
            for c, r in sorted(records.items()) if r.warnings
        }
        if warn:
            man.setdefault("warnings", {}).update(warn)
        _mark_stage(out, man, "boxes", {})

    if _stage_done(man, "diagram", {}):
        labels = _read_labels(out, param_res)
    else:
        t0 = time.perf_counter()
        diagram = continuation_classes(records, pgrid)
        labels = diagram.labels
        _write_text(os.path.join(out, "labels", "continuation.csv"),
                    _labels_csv_text(labels))
        dim = len(param_res)
        head = ",".join(
            [f"a{k}" for k in range(dim)] + [f"b{k}" for k in range(dim)] + ["reason"]
        )
        lines = [head]
        for ca, cb, reason in diagram.failed_edges:
            lines.append(",".join(
                [str(x) for x in ca] + [str(x) for x in cb] + [reason]
            ))
        _write_text(os.path.join(out, "labels", "failed_edges.csv"),
                    "\n".join(lines) + "\n")
        timings["diagram_s"] = time.perf_counter() - t0
        _mark_stage(out, man, "diagram", {})

    img_cfg = {"scale": scale}
    if not _stage_done(man, "images", img_cfg):
        t0 = time.perf_counter()
        _write_text(os.path.join(out, "features", "recurrence.csv"),
                    _sweep_feature_text(records))
        _write_sweep_images(out, records, labels, scale)
        timings["images_s"] = time.perf_counter() - t0
        _mark_stage(out, man, "images", img_cfg)
    if timings:
        timings["total_s"] = sum(timings.values())
        _bump_timings(out, timings)

    n_failed = sum(1 for r in records.values() if not r.ok)
    n_rec = sum(1 for r in records.values() if r.rec is not None)
    print(f"boxes: {len(records)}  failed: {n_failed}  with recurrence: {n_rec}")
    print(f"continuation classes: {int(labels.max()) + 1}")
    print(f"wrote {out}")
    return 0


def _cmd_recurrence(args) -> int:
    cfg = _load_config(args.config)
    path = _opt(args, cfg, "morse_set_file") or _err("--morse-set-file")
    try:
        record = read_box_record(path)
    except OSError as exc:
        raise DependencyError(f"cannot read box record: {exc}") from None
    except (MorserecError, ValueError) as exc:
        raise DependencyError(f"malformed box record {path}: {exc}") from None
    if record.failure:
        raise DependencyError(f"box record marks a failed computation: {record.failure}")
    if not record.sets:
        raise UsageError("box record holds no Morse sets")
    set_index = _opt(args, cfg, "set_index")
    if set_index is None:
        if record.rec is not None:
            set_index = record.rec.set_index
        else:
            set_index = int(np.argmax([s.card for s in record.sets]))
    set_index = _as_int(set_index, "--set-index")
    if not 0 <= set_index < len(record.sets):
        raise UsageError(f"--set-index must be in [0, {len(record.sets) - 1}]")
    method = str(_opt(args, cfg, "rec_method", "bfs"))
    scale = _as_int(_opt(args, cfg, "scale", 1), "--scale")
    out = _opt(args, cfg, "out")
    if out is None:
        parent = os.path.dirname(os.path.abspath(path))
        out = os.path.dirname(parent) if os.path.basename(parent) == "boxes" else parent

    stem = os.path.splitext(os.path.basename(path))[0]
    name = f"rec_{stem}_set{set_index}"
    man = _load_manifest(out)
    stage_cfg = {"method": method, "scale": scale, "set_index": set_index}
    if man is not None and _stage_done(man, name, stage_cfg):
        print(f"{name}: up to date in {out}")
        return 0

    t0 = time.perf_counter()
    mapdef = get_map(record.map_name)
    entries: dict = dict(record.fixed)
    entries.update(record.varying)
    grid = _make_grid(record.phase_bounds, record.resolution)
    rep = build_representation(mapdef, ParamBox(entries), grid)
    cells = record.sets[set_index].cells
    try:
        field = analyze_set(rep, cells, method=method)
    except ContractViolation as exc:
        raise UsageError(str(exc)) from None

    lines = [_coord_header(len(record.resolution), "rec")]
    for row, r in zip(field.coords, field.rec):
        lines.append(",".join([str(int(c)) for c in row] + [str(int(r))]))
    _write_text(os.path.join(out, "features", f"{name}.csv"), "\n".join(lines) + "\n")
    h = field.histogram
    width = (h.hi - h.lo) / 10.0
    hlines = ["bin,lo,hi,mass"]
    for k, mass in enumerate(h.bars):
        hlines.append(f"{k},{h.lo + k * width!r},{h.lo + (k + 1) * width!r},{mass!r}")
    _write_text(os.path.join(out, "features", f"{name}_hist.csv"), "\n".join(hlines) + "\n")
    if len(record.resolution) == 2:
        img = render_values(field.cells, field.rec, record.resolution, scale)
        ipath = os.path.join(out, "images", f"{name}.ppm")
        os.makedirs(os.path.dirname(ipath), exist_ok=True)
        img.save(ipath)
        _write_text(os.path.join(out, "features", f"{name}_colorbar.csv"),
                    colorbar_csv(float(field.rec.min()), float(field.rec.max())))
    if man is not None:
        _mark_stage(out, man, name, stage_cfg)
    _bump_timings(out, {f"{name}_s": time.perf_counter() - t0})
    print(f"set {set_index}: card {field.card}  mean {field.mean:.6g}  "
          f"median {field.median:.6g}  frrv {field.frrv:.6g}  nfrrv {field.nfrrv:.6g}")
    print(f"wrote {out}")
    return 0


def _cmd_cluster(args) -> int:
    cfg = _load_config(args.config)
    sweep_dir = _opt(args, cfg, "sweep_dir") or _err("--sweep-dir")
    kind = _opt(args, cfg, "features") or _err("--features")
    if kind not in PRESETS:
        raise UsageError(f"--features must be one of {sorted(PRESETS)}, got {kind!r}")
    preset = PRESETS[kind]
    eps = _as_float(_opt(args, cfg, "eps", preset["eps"]), "--eps")
    minpts = _as_int(_opt(args, cfg, "minpts", preset["minpts"]), "--minpts")
    metric = str(_opt(args, cfg, "metric", preset["metric"]))
    scale = _as_int(_opt(args, cfg, "scale", 1), "--scale")
    man = _load_manifest(sweep_dir)
    if man is None:
        raise DependencyError(f"no run manifest in {sweep_dir}; run sweep first")
    if not man.get("completed", {}).get("boxes"):
        raise DependencyError(f"sweep in {sweep_dir} has not completed its boxes stage")
    param_res = tuple(man["param_resolution"])
    stage_cfg = {"eps": eps, "minpts": minpts, "metric": metric, "scale": scale}
    stage = f"cluster_{kind}"
    if _stage_done(man, stage, stage_cfg):
        print(f"{stage}: up to date in {sweep_dir}")
        return 0

    t0 = time.perf_counter()
    records = _load_records(sweep_dir, param_res)
    fm = histogram_features(records) if kind == "hist" else frr_features(records)
    labels = dbscan(fm.rows, eps, minpts, metric)

    dim = len(param_res)
    k = fm.rows.shape[1]
    flines = [_coord_header(dim, ",".join(f"f{i}" for i in range(k)))]
    for coords, row in zip(fm.coords, fm.rows):
        flines.append(",".join([str(c) for c in coords] + [repr(float(x)) for x in row]))
    _write_text(os.path.join(sweep_dir, "features", f"{kind}.csv"),
                "\n".join(flines) + "\n")

    grid_labels = np.full(param_res, -1, dtype=np.int64)
    for coords, label in zip(fm.coords, labels):
        grid_labels[coords] = label
    _write_text(os.path.join(sweep_dir, "labels", f"{kind}_labels.csv"),
                _labels_csv_text(grid_labels))
    xlines = [_coord_header(dim, "reason")]
    for coords, reason in fm.excluded:
        xlines.append(",".join([str(c) for c in coords] + [reason.replace(",", ";")]))
    _write_text(os.path.join(sweep_dir, "labels", f"{kind}_excluded.csv"),
                "\n".join(xlines) + "\n")
    if len(param_res) == 2:
        img = render_heatmap(
            grid_labels.astype(np.float64), mask=grid_labels < 0,
            classes=grid_labels, scale=scale,
        )
        ipath = os.path.join(sweep_dir, "images", f"{kind}_labels.ppm")
        os.makedirs(os.path.dirname(ipath), exist_ok=True)
        img.save(ipath)
    _mark_stage(sweep_dir, man, stage, stage_cfg)
    _bump_timings(sweep_dir, {f"{stage}_s": time.perf_counter() - t0})

    n_noise = int((labels == 0).sum())
    print(f"points: {fm.n}  clusters: {int(labels.max()) if fm.n else 0}  "
          f"noise: {n_noise}  excluded: {len(fm.excluded)}")
    print(f"wrote {sweep_dir}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    map_name = _opt(args, cfg, "map") or _err("--map")
    mapdef = get_map(map_name)
    params = _parse_params(_opt(args, cfg, "params"))
    for n, v in params.items():
        if isinstance(v, tuple):
            raise UsageError(f"simulate needs point parameter values, got {n}={v[0]!r}:{v[1]!r}")
    mode = str(_opt(args, cfg, "mode", "bounds"))
    if mode not in ("bounds", "cover"):
        raise UsageError(f"--mode must be bounds or cover, got {mode!r}")
    burn = _as_int(_opt(args, cfg, "burn", 10_000), "--burn")
    sample = _as_int(_opt(args, cfg, "sample", 100), "--sample")
    if burn < 0 or sample < 0:
        raise UsageError("--burn and --sample must be >= 0")

    ics_flag = _opt(args, cfg, "ics")
    ic_box = _opt(args, cfg, "ic_box")
    if ics_flag is not None and ic_box is not None:
        raise UsageError("give either --ics or --ic-box, not both")
    if ic_box is not None:
        counts = _parse_ints(_opt(args, cfg, "ic_counts") or _err("--ic-counts"), "--ic-counts")
        box = _parse_box(ic_box, "--ic-box")
        if len(counts) != len(box):
            raise UsageError("--ic-counts must give one count per --ic-box axis")
        ics = lattice(box, counts)
    elif ics_flag is not None:
        ics = _parse_ics(ics_flag)
    else:
        ics = np.asarray(COVER_ICS, dtype=np.float64)

    pbox = _parse_params(_opt(args, cfg, "param_box"))
    varying = tuple(pbox)
    if pbox:
        for n, v in pbox.items():
            if not isinstance(v, tuple):
                raise UsageError(f"--param-box entries must be ranges, got {n}={v!r}")
        counts = _parse_ints(_opt(args, cfg, "param_grid") or _err("--param-grid"), "--param-grid")
        if len(counts) != len(varying):
            raise UsageError("--param-grid must give one count per --param-box axis")
        fixed, _ = _split_params(mapdef, {**params, **pbox})
        points = lattice([pbox[n] for n in varying], counts)
    else:
        fixed, _ = _split_params(mapdef, params)
        counts = ()
        points = np.empty((1, 0))

    if mode == "cover":
        cover_box = _parse_box(_opt(args, cfg, "cover_box", "-0.1:7.5,-1.3:2.7"), "--cover-box")
        cover_res = _parse_ints(_opt(args, cfg, "cover_resolution", "1024,1024"), "--cover-resolution")
        sim_cfg = SimConfig(burn, sample, cover_grid=_make_grid(cover_box, cover_res))
    else:
        sim_cfg = SimConfig(burn, sample)

    dim = mapdef.dim
    rows = []
    if mode == "bounds" and not pbox:
        full = dict(fixed)
        sums = simulate(mapdef, full, ics, sim_cfg)
        header = ",".join(
            [f"ic_{k}" for k in range(dim)]
            + [f"lo_{k}" for k in range(dim)]
            + [f"hi_{k}" for k in range(dim)]
            + ["diverged"]
        )
        for s in sums:
            rows.append(",".join(
                [repr(float(x)) for x in s.ic]
                + [repr(float(x)) for x in s.lo]
                + [repr(float(x)) for x in s.hi]
                + [str(int(s.diverged))]
            ))
        good = [s for s in sums if not s.diverged]
        if good:
            lo = np.min([s.lo for s in good], axis=0)
            hi = np.max([s.hi for s in good], axis=0)
            span = " x ".join(f"[{float(a)!r}, {float(b)!r}]" for a, b in zip(lo, hi))
            print(f"union bounds over {len(good)} trajectories: {span}")
        if len(good) < len(sums):
            print(f"diverged: {len(sums) - len(good)} of {len(sums)}")
    elif mode == "bounds":
        header = ",".join(
            list(varying)
            + [f"lo_{k}" for k in range(dim)]
            + [f"hi_{k}" for k in range(dim)]
            + ["n_diverged"]
        )
        overall_lo = np.full(dim, np.inf)
        overall_hi = np.full(dim, -np.inf)
        for pt in points:
            full = dict(fixed)
            full.update(zip(varying, pt))
            sums = simulate(mapdef, full, ics, sim_cfg)
            good = [s for s in sums if not s.diverged]
            if good:
                lo = np.min([s.lo for s in good], axis=0)
                hi = np.max([s.hi for s in good], axis=0)
                overall_lo = np.minimum(overall_lo, lo)
                overall_hi = np.maximum(overall_hi, hi)
            else:
                lo = np.full(dim, np.nan)
                hi = np.full(dim, np.nan)
            rows.append(",".join(
                [repr(float(x)) for x in pt]
                + [repr(float(x)) for x in lo]
                + [repr(float(x)) for x in hi]
                + [str(len(sums) - len(good))]
            ))
        if np.isfinite(overall_lo).all():
            span = " x ".join(
                f"[{float(a)!r}, {float(b)!r}]" for a, b in zip(overall_lo, overall_hi)
            )
            print(f"union bounds over {points.shape[0]} parameter points: {span}")
    else:
        header = ",".join(list(varying) + ["cover_cells"]) if pbox else "cover_cells"
        sizes = []
        ic_tuples = tuple(tuple(float(x) for x in row) for row in ics)
        for pt in points:
            full = dict(fixed)
            full.update(zip(varying, pt))
            n = attractor_cover_size(mapdef, full, sim_cfg, ics=ic_tuples)
            sizes.append(n)
            rows.append(",".join([repr(float(x)) for x in pt] + [str(n)]) if pbox else str(n))
        if not pbox:
            print(f"cover cells: {sizes[0]}")
        else:
            print(f"cover cells: min {min(sizes)} max {max(sizes)} over {len(sizes)} parameter points")
        raster = _opt(args, cfg, "raster")
        if raster:
            if len(counts) != 2:
                raise UsageError("--raster needs a 2-D --param-grid")
            arr = np.asarray(sizes, dtype=np.float64).reshape(counts)
            render_heatmap(arr, scale=_as_int(_opt(args, cfg, "scale", 1), "--scale")).save(raster)
            print(f"wrote {raster}")

    text = "\n".join([header] + rows) + "\n"
    out = _opt(args, cfg, "out")
    if out:
        _write_text(out, text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_render(args) -> int:
    cfg = _load_config(args.config)
    target = _opt(args, cfg, "input") or _err("--input")
    scale = _as_int(_opt(args, cfg, "scale", 1), "--scale")
    if os.path.isdir(target):
        man = _load_manifest(target)
        if man is None:
            raise DependencyError(f"no run manifest in {target}")
        img_cfg = {"scale": scale}
        if _stage_done(man, "images", img_cfg):
            print(f"images: up to date in {target}")
            return 0
        param_res = tuple(man["param_resolution"])
        if man["command"] == "analyze":
            coords = (0,) * len(param_res) if param_res else (0, 0)
            path = os.path.join(target, "boxes", _box_filename(coords))
            try:
                record = read_box_record(path)
            except OSError as exc:
                raise DependencyError(f"missing box record: {exc}") from None
            _write_box_images(target, record, scale)
        else:
            if not man.get("completed", {}).get("boxes"):
                raise DependencyError(f"sweep in {target} has not completed its boxes stage")
            records = _load_records(target, param_res)
            labels = _read_labels(target, param_res)
            _write_text(os.path.join(target, "features", "recurrence.csv"),
                        _sweep_feature_text(records))
            _write_sweep_images(target, records, labels, scale)
        _mark_stage(target, man, "images", img_cfg)
        print(f"wrote {target}")
        return 0
    try:
        record = read_box_record(target)
    except OSError as exc:
        raise DependencyError(f"cannot read box record: {exc}") from None
    except (MorserecError, ValueError) as exc:
        raise DependencyError(f"malformed box record {target}: {exc}") from None
    out = _opt(args, cfg, "out")
    if out is None:
        parent = os.path.dirname(os.path.abspath(target))
        out = os.path.dirname(parent) if os.path.basename(parent) == "boxes" else parent
    stem = os.path.splitext(os.path.basename(target))[0]
    written = _write_box_images(out, record, scale, prefix=f"{stem}_")
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="morserec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--scale", type=int, help="integer image upscale factor (default 1)")

    def pipeline(p):
        common(p)
        p.add_argument("--map", help="map family name")
        p.add_argument("--params", help="name=value or name=lo:hi, comma separated")
        p.add_argument("--phase-box", help="phase-space bounds lo:hi per axis, comma separated")
        p.add_argument("--resolution", help="grid cells per axis, comma separated")
        p.add_argument("--out", help="output directory")
        p.add_argument("--no-recurrence", action="store_true", default=None,
                       help="skip recurrence analysis of the largest Morse set")
        p.add_argument("--rec-threshold", type=int,
                       help=f"minimum set size for recurrence (default {REC_CARD_THRESHOLD})")
        p.add_argument("--rec-method", choices=("bfs", "distance-matrix"),
                       help="recurrence algorithm variant (default bfs)")

    p = sub.add_parser("analyze", help="single-box pipeline: decomposition, stability, renders")
    pipeline(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("sweep", help="run the box pipeline over a parameter grid")
    pipeline(p)
    p.add_argument("--param-box", help="varying parameters name=lo:hi, comma separated")
    p.add_argument("--param-grid", help="parameter boxes per axis, comma separated")
    p.add_argument("--workers", type=int, help="parallel workers (default: available cores)")
    p.add_argument("--deterministic", action="store_true", default=None,
                   help="force single-threaded execution")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("recurrence", help="recurrence field of one recorded Morse set")
    common(p)
    p.add_argument("--morse-set-file", help="box record CSV holding the set")
    p.add_argument("--set-index", type=int, help="Morse set index (default: largest)")
    p.add_argument("--rec-method", choices=("bfs", "distance-matrix"))
    p.add_argument("--out", help="output directory (default: the record's run directory)")
    p.set_defaults(func=_cmd_recurrence)

    p = sub.add_parser("cluster", help="DBSCAN over per-box recurrence features")
    common(p)
    p.add_argument("--sweep-dir", help="completed sweep directory")
    p.add_argument("--features", choices=("hist", "frr"),
                   help="histogram bars or standardized (nfrrv, median)")
    p.add_argument("--eps", type=float, help="neighborhood radius (default: preset)")
    p.add_argument("--minpts", type=int, help="core-point threshold (default: preset)")
    p.add_argument("--metric", choices=("l1", "l2"))
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("simulate", help="non-rigorous trajectory bounds or cover sizes")
    common(p)
    p.add_argument("--map", help="map family name")
    p.add_argument("--params", help="fixed parameter values name=value")
    p.add_argument("--ics", help="initial conditions x,y;x,y (default: the four cover-map points)")
    p.add_argument("--ic-box", help="IC lattice bounds lo:hi per axis")
    p.add_argument("--ic-counts", help="IC lattice points per axis (endpoints included)")
    p.add_argument("--burn", type=int, help="burn-in iterations (default 10000)")
    p.add_argument("--sample", type=int, help="recorded iterations after burn-in (default 100)")
    p.add_argument("--mode", choices=("bounds", "cover"), help="tail bounds or cover-cell counts")
    p.add_argument("--param-box", help="varying parameters name=lo:hi for a lattice of runs")
    p.add_argument("--param-grid", help="lattice points per parameter axis (endpoints included)")
    p.add_argument("--cover-box", help="cover grid bounds (default -0.1:7.5,-1.3:2.7)")
    p.add_argument("--cover-resolution", help="cover grid cells per axis (default 1024,1024)")
    p.add_argument("--raster", help="write a cover-size heat map PPM to this path")
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("render", help="regenerate images from recorded artifacts")
    common(p)
    p.add_argument("--input", help="run directory or box record CSV")
    p.add_argument("--out", help="output directory for a bare box record")
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 3
    except MorserecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
