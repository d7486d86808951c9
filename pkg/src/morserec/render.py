"""Deterministic raster and graph-text emission.

Phase portraits of Morse decompositions, recurrence diagrams, parameter-space
heat maps with class borders, and Morse graphs in DOT form.  Everything here
is a pure function of its inputs: no timestamps, fixed palettes, byte-exact
reruns.  Images are binary PPM (P6); conversion to PNG is left to external
tools.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = [
    "PALETTE",
    "RasterImage",
    "render_sets",
    "render_morse",
    "render_values",
    "render_recurrence",
    "render_heatmap",
    "ramp_color",
    "colorbar_rows",
    "colorbar_csv",
    "morse_graph_dot",
    "export_morse_graph",
]

WHITE = (255, 255, 255)
GRAY = (128, 128, 128)
BLACK = (0, 0, 0)

# Fixed 16-color cycle for Morse sets, indexed by set order (i % 16).
PALETTE = (
    (230, 25, 75),  # red
    (60, 130, 245),  # blue
    (60, 180, 75),  # green
    (245, 130, 48),  # orange
    (145, 30, 180),  # purple
    (70, 240, 240),  # cyan
    (240, 50, 230),  # magenta
    (210, 190, 40),  # dark yellow
    (0, 128, 128),  # teal
    (220, 120, 180),  # pink
    (154, 99, 36),  # brown
    (128, 0, 0),  # maroon
    (128, 128, 0),  # olive
    (0, 0, 128),  # navy
    (255, 160, 122),  # salmon
    (110, 110, 110),  # gray tone
)

# Dark-to-bright ramp anchors for scalar fields (recurrence, heat maps).
_RAMP = np.array(
    [
        (0, 0, 4),
        (87, 16, 110),
        (188, 55, 84),
        (249, 142, 9),
        (252, 255, 164),
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class RasterImage:
    """RGB raster, row-major with top-left origin."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def to_ppm(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.pixels.tobytes()

    def save(self, path) -> None:
        data = self.to_ppm()
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)


def _check_2d(resolution) -> tuple[int, int]:
    if len(resolution) != 2:
        raise UsageError(f"rendering supports 2-D grids only, got dimension {len(resolution)}")
    return int(resolution[0]), int(resolution[1])


def _blank(resolution, scale: int, color) -> np.ndarray:
    d1, d2 = _check_2d(resolution)
    if scale < 1:
        raise UsageError(f"scale must be a positive integer, got {scale}")
    px = np.empty((d2 * scale, d1 * scale, 3), dtype=np.uint8)
    px[:] = color
    return px


def _paint(px: np.ndarray, resolution, scale: int, cells, colors) -> None:
    """Color flat cell ids; pixel (px,py) maps to cell (px/s, flip(py)/s)."""
    d1, d2 = _check_2d(resolution)
    cells = np.asarray(cells, dtype=np.int64)
    j1, j2 = np.unravel_index(cells, (d1, d2))
    rows = (d2 - 1 - j2) * scale  # grid y-axis points up, pixel rows go down
    cols = j1 * scale
    colors = np.asarray(colors, dtype=np.uint8)
    if colors.ndim == 1:
        colors = np.broadcast_to(colors, (cells.size, 3))
    for dr in range(scale):
        for dc in range(scale):
            px[rows + dr, cols + dc] = colors


def render_sets(sets, resolution, scale: int = 1) -> RasterImage:
    """White-background portrait with set ``i`` in ``PALETTE[i % 16]``.

    ``sets`` is a sequence of flat cell-id arrays over a 2-D grid of the given
    resolution.
    """
    px = _blank(resolution, scale, WHITE)
    for i, cells in enumerate(sets):
        cells = np.asarray(cells, dtype=np.int64)
        if cells.size:
            _paint(px, resolution, scale, cells, PALETTE[i % len(PALETTE)])
    return RasterImage(px.shape[1], px.shape[0], px)


def render_morse(decomp, scale: int = 1) -> RasterImage:
    """Phase portrait of a Morse decomposition (2-D grids only)."""
    return render_sets(decomp.sets, decomp.rep.grid.resolution, scale)


def ramp_color(t: float) -> tuple[int, int, int]:
    """Dark-to-bright ramp color for t in [0, 1]."""
    t = min(max(float(t), 0.0), 1.0)
    pos = t * (len(_RAMP) - 1)
    k = min(int(pos), len(_RAMP) - 2)
    frac = pos - k
    rgb = _RAMP[k] * (1.0 - frac) + _RAMP[k + 1] * frac
    return tuple(int(round(v)) for v in rgb)


def _ramp_array(t: np.ndarray) -> np.ndarray:
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    pos = t * (len(_RAMP) - 1)
    k = np.minimum(pos.astype(np.int64), len(_RAMP) - 2)
    frac = (pos - k)[..., None]
    rgb = _RAMP[k] * (1.0 - frac) + _RAMP[k + 1] * frac
    return np.rint(rgb).astype(np.uint8)


def _normalize(values: np.ndarray, vrange=None) -> np.ndarray:
    if vrange is None:
        lo, hi = float(values.min()), float(values.max())
    else:
        lo, hi = float(vrange[0]), float(vrange[1])
    if hi <= lo:
        return np.full(values.shape, 0.5)  # constant field: single mid-ramp hue
    return (values - lo) / (hi - lo)


def render_values(cells, values, resolution, scale: int = 1, vrange=None) -> RasterImage:
    """Scalar field over a cell subset, low values dark and high bright.

    The ramp is linear over the observed range unless ``vrange`` pins it.
    Cells outside the field stay white.
    """
    cells = np.asarray(cells, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if cells.shape[0] != values.shape[0]:
        raise UsageError("cells and values must have matching length")
    px = _blank(resolution, scale, WHITE)
    if cells.size:
        _paint(px, resolution, scale, cells, _ramp_array(_normalize(values, vrange)))
    return RasterImage(px.shape[1], px.shape[0], px)


def render_recurrence(field, grid, scale: int = 1) -> RasterImage:
    """Recurrence diagram of one analyzed Morse set."""
    return render_values(field.cells, field.rec, grid.resolution, scale)


def colorbar_rows(lo: float, hi: float, n: int = 16):
    """(value, r, g, b) legend rows sampling the ramp from lo to hi."""
    if n < 2:
        raise UsageError("colorbar needs at least 2 rows")
    rows = []
    for k in range(n):
        t = k / (n - 1)
        v = lo + (hi - lo) * t
        rows.append((v, *ramp_color(t if hi > lo else 0.5)))
    return rows


def colorbar_csv(lo: float, hi: float, n: int = 16) -> str:
    lines = ["value,r,g,b"]
    for v, r, g, b in colorbar_rows(lo, hi, n):
        lines.append(f"{v!r},{r},{g},{b}")
    return "\n".join(lines) + "\n"


def render_heatmap(values, mask=None, classes=None, scale: int = 1, vrange=None) -> RasterImage:
    """Heat map over a 2-D parameter grid.

    ``values[i, j]`` colors the box at coords (i, j) via the ramp; masked
    boxes are gray and excluded from the observed range.  When ``classes`` is
    given, 1-pixel black borders separate face-adjacent boxes with different
    labels.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise UsageError(f"heatmap values must be 2-D, got {values.ndim}-D")
    d1, d2 = values.shape
    if mask is None:
        mask = ~np.isfinite(values)
    else:
        mask = np.asarray(mask, dtype=bool) | ~np.isfinite(values)
    px = _blank((d1, d2), scale, GRAY)
    live = ~mask
    if live.any():
        t = np.full(values.shape, 0.5)
        t[live] = _normalize(values[live], vrange)
        flat = np.flatnonzero(live.reshape(-1))
        _paint(px, (d1, d2), scale, flat, _ramp_array(t.reshape(-1)[flat]))
    if classes is not None:
        classes = np.asarray(classes)
        if classes.shape != values.shape:
            raise UsageError("classes shape must match values shape")
        s = scale
        for i in range(d1 - 1):
            for j in np.flatnonzero(classes[i, :] != classes[i + 1, :]):
                rows = slice((d2 - 1 - j) * s, (d2 - j) * s)
                px[rows, (i + 1) * s - 1] = BLACK  # right edge of box i
        for j in range(d2 - 1):
            for i in np.flatnonzero(classes[:, j] != classes[:, j + 1]):
                cols = slice(i * s, (i + 1) * s)
                px[(d2 - 1 - j) * s, cols] = BLACK  # top edge of box j
    return RasterImage(px.shape[1], px.shape[0], px)


def morse_graph_dot(cards, attracting, edges) -> str:
    """DOT text: nodes ``"i : card"``, attracting sets as filled yellow boxes,
    edges in flow direction."""
    lines = ["digraph morse {"]
    for i, card in enumerate(cards):
        label = f"{i} : {int(card)}"
        if bool(attracting[i]):
            style = 'shape=box, style=filled, fillcolor="yellow"'
        else:
            style = "shape=ellipse"
        lines.append(f'  n{i} [label="{label}", {style}];')
    for i, j in edges:
        lines.append(f"  n{int(i)} -> n{int(j)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_morse_graph(decomp) -> str:
    """Morse graph of a decomposition; edges are the transitive reduction."""
    cards = [int(s.size) for s in decomp.sets]
    return morse_graph_dot(cards, decomp.attracting, decomp.reduced_edges)
