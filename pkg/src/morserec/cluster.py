"""Density clustering of recurrence-derived features over parameter boxes.

Implements DBSCAN with pluggable l1/l2 metrics and the two feature
extractions used for parameter-region classification: 10-bar reduced
recurrence histograms, and standardized (nfrrv, median) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .records import BoxRecord

__all__ = [
    "NOISE",
    "dbscan",
    "FeatureMatrix",
    "histogram_features",
    "frr_features",
    "PRESETS",
]

NOISE = 0

# default settings for the two feature kinds; tuned on the bundled model
PRESETS = {
    "hist": {"eps": 0.2, "minpts": 150, "metric": "l1"},
    "frr": {"eps": 0.8, "minpts": 100, "metric": "l1"},
}


def _pairwise_within(points: np.ndarray, eps: float, metric: str) -> list[np.ndarray]:
    """Index lists of eps-neighbors (inclusive of self), chunked rows."""
    n = points.shape[0]
    out: list[np.ndarray] = []
    chunk = max(1, min(n, 8_000_000 // max(1, n)))
    for start in range(0, n, chunk):
        block = points[start:start + chunk]
        diff = block[:, None, :] - points[None, :, :]
        if metric == "l1":
            dist = np.abs(diff).sum(axis=2)
        elif metric == "l2":
            dist = np.sqrt((diff * diff).sum(axis=2))
        else:
            raise ContractViolation(f"unknown metric {metric!r}")
        for row in dist <= eps:
            out.append(np.nonzero(row)[0])
    return out


def dbscan(points: np.ndarray, eps: float, minpts: int, metric: str = "l1") -> np.ndarray:
    """Labels >= 1 per cluster, 0 for noise.

    Core point: at least ``minpts`` points (itself included) within
    ``eps``. Clusters are discovered by scanning rows in order and
    flooding through core points, so border points attach to the first
    cluster that reaches them.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return np.empty(0, dtype=np.int64)
    if points.ndim != 2:
        raise ContractViolation("dbscan expects an (n, k) feature matrix")
    if eps <= 0 or minpts < 1:
        raise ContractViolation("dbscan needs eps > 0 and minpts >= 1")
    n = points.shape[0]
    neigh = _pairwise_within(points, eps, metric)
    core = np.array([idx.size >= minpts for idx in neigh])
    labels = np.zeros(n, dtype=np.int64)
    next_label = 1
    for seed in range(n):
        if not core[seed] or labels[seed] != 0:
            continue
        label = next_label
        next_label += 1
        labels[seed] = label
        frontier = [seed]
        while frontier:
            v = frontier.pop()
            for w in neigh[v]:
                if labels[w] != 0:
                    continue
                labels[w] = label
                if core[w]:
                    frontier.append(w)
    return labels


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-box feature rows with their box coordinates and exclusions."""

    coords: tuple[tuple[int, ...], ...]
    rows: np.ndarray                        # (n, k) float64
    excluded: tuple[tuple[tuple[int, ...], str], ...]

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])


def _eligible(records: dict[tuple[int, ...], BoxRecord]):
    """Boxes whose largest Morse set was analyzed, in row-major coord order."""
    keep = []
    excluded = []
    for coords in sorted(records):
        rec = records[coords]
        if not rec.ok:
            excluded.append((coords, "failed"))
        elif rec.rec is None:
            excluded.append((coords, rec.rec_skipped or "no recurrence analysis"))
        else:
            keep.append((coords, rec))
    return keep, excluded


def histogram_features(records: dict[tuple[int, ...], BoxRecord]) -> FeatureMatrix:
    """Rows of 10 reduced-histogram heights for every eligible box."""
    keep, excluded = _eligible(records)
    coords = []
    rows = []
    for c, rec in keep:
        h = rec.rec.histogram
        if h.degenerate:
            excluded.append((c, "degenerate histogram"))
            continue
        coords.append(c)
        rows.append(h.bars)
    mat = np.array(rows, dtype=np.float64) if rows else np.empty((0, 10))
    return FeatureMatrix(coords=tuple(coords), rows=mat, excluded=tuple(excluded))


def frr_features(records: dict[tuple[int, ...], BoxRecord]) -> FeatureMatrix:
    """Standardized (nfrrv, median recurrence) pairs, scaled by 7.

    Standardization uses the population standard deviation; the scale
    factor compensates for comparing 2-dimensional points against the
    10-dimensional histogram analysis with the same kind of eps values.
    """
    keep, excluded = _eligible(records)
    coords = tuple(c for c, _ in keep)
    raw = np.array(
        [(rec.rec.nfrrv, rec.rec.median) for _, rec in keep], dtype=np.float64
    ).reshape(len(keep), 2)
    if len(keep):
        mean = raw.mean(axis=0)
        std = raw.std(axis=0)  # population form: divide by N
        for col, name in enumerate(("nfrrv", "median")):
            if std[col] == 0:
                raise ContractViolation(f"zero variance in feature column {name!r}")
        raw = (raw - mean) / std * 7.0
    return FeatureMatrix(coords=coords, rows=raw, excluded=tuple(excluded))
