"""Uniform rectangular grids over boxes in R^n.

A grid subdivides a box ``prod_i [a_i, b_i]`` into ``d_i`` closed cells per
axis.  The exact subdivision points ``a_i + (j/d_i)(b_i - a_i)`` are rarely
representable, so every axis carries two float edge arrays: one rounded down
and one rounded up, each within one ulp of the exact rational value (computed
with `fractions.Fraction`, so the directed rounding is exact, not merely
nudged).  A cell's float bounds use the rounded-down left edge and rounded-up
right edge and therefore always contain the exact cell.

``cover`` returns every cell whose closed exact bounds could intersect a query
box, erring on the side of inclusion (the rounded edges decide, so a box
within one ulp of an edge picks up the neighbor as well).  This conservatism
is what makes outer enclosures built on top of covers sound.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .interval import Interval, IntervalRect

__all__ = ["CellId", "RectangularSet", "Grid"]

CellId = tuple  # tuple[int, ...]; kept loose for speed


class RectangularSet:
    """A box with strictly positive width in every dimension."""

    __slots__ = ("rect",)

    def __init__(self, rect):
        if not isinstance(rect, IntervalRect):
            rect = IntervalRect(
                iv if isinstance(iv, Interval) else Interval(iv[0], iv[1]) for iv in rect
            )
        for i, iv in enumerate(rect):
            if not iv.lo < iv.hi:
                raise ValueError(f"axis {i} has zero width: {iv!r}")
        object.__setattr__(self, "rect", rect)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("RectangularSet is immutable")

    def __reduce__(self):
        return (RectangularSet, (self.rect,))

    @property
    def dim(self) -> int:
        return self.rect.dim

    def __getitem__(self, i: int) -> Interval:
        return self.rect[i]

    def __iter__(self):
        return iter(self.rect)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RectangularSet):
            return NotImplemented
        return self.rect == other.rect

    def __hash__(self) -> int:
        return hash(self.rect)

    def __repr__(self) -> str:
        return f"RectangularSet({self.rect!r})"


def _round_fraction_down(x: Fraction) -> float:
    f = float(x)  # correctly rounded to nearest
    if Fraction(f) > x:
        f = math.nextafter(f, -math.inf)
    return f


def _round_fraction_up(x: Fraction) -> float:
    f = float(x)
    if Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    return f


class Grid:
    """Uniform grid with ``resolution[i]`` closed cells along axis ``i``.

    Cells are addressed by integer coordinate tuples ``(j_1, ..., j_n)`` with
    ``0 <= j_i < d_i`` and linearized row-major (axis 0 slowest).
    """

    __slots__ = ("domain", "resolution", "_edges_lo", "_edges_hi", "_strides")

    def __init__(self, domain, resolution: Sequence[int]):
        if not isinstance(domain, RectangularSet):
            domain = RectangularSet(domain)
        resolution = tuple(int(d) for d in resolution)
        if len(resolution) != domain.dim:
            raise ValueError("resolution/domain dimension mismatch")
        if any(d < 1 for d in resolution):
            raise ValueError(f"resolution must be >= 1 per axis, got {resolution}")
        edges_lo = []
        edges_hi = []
        for ax in range(domain.dim):
            a = Fraction(domain[ax].lo)
            delta = Fraction(domain[ax].hi) - a
            d = resolution[ax]
            exact = [a + Fraction(j, d) * delta for j in range(d + 1)]
            lo = np.array([_round_fraction_down(e) for e in exact], dtype=np.float64)
            hi = np.array([_round_fraction_up(e) for e in exact], dtype=np.float64)
            if not (np.all(np.diff(lo) > 0) and np.all(np.diff(hi) > 0)):
                raise ValueError(
                    f"resolution {d} too fine for float subdivision on axis {ax}"
                )
            edges_lo.append(lo)
            edges_hi.append(hi)
        strides = [1] * len(resolution)
        for ax in range(len(resolution) - 2, -1, -1):
            strides[ax] = strides[ax + 1] * resolution[ax + 1]
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "_edges_lo", tuple(edges_lo))
        object.__setattr__(self, "_edges_hi", tuple(edges_hi))
        object.__setattr__(self, "_strides", tuple(strides))

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("Grid is immutable")

    def __reduce__(self):
        return (Grid, (self.domain, self.resolution))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.domain == other.domain and self.resolution == other.resolution

    def __hash__(self) -> int:
        return hash((self.domain, self.resolution))

    def __repr__(self) -> str:
        return f"Grid({self.domain!r}, resolution={self.resolution})"

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.resolution, dtype=np.int64))

    def edges_lo(self, ax: int) -> np.ndarray:
        """Rounded-down subdivision points of axis ``ax`` (read-only view)."""
        return self._edges_lo[ax]

    def edges_hi(self, ax: int) -> np.ndarray:
        return self._edges_hi[ax]

    # -- addressing ---------------------------------------------------------

    def lin(self, coords: Sequence[int]) -> int:
        k = 0
        for c, s, d in zip(coords, self._strides, self.resolution):
            if not 0 <= c < d:
                raise ValueError(f"cell coordinate {tuple(coords)} out of range")
            k += c * s
        return k

    def unlin(self, k: int) -> CellId:
        if not 0 <= k < self.n_cells:
            raise ValueError(f"linear cell index {k} out of range")
        out = []
        for s in self._strides:
            out.append(k // s)
            k %= s
        return tuple(out)

    def all_coords(self) -> np.ndarray:
        """(n_cells, dim) int array of cell coordinates in linear order."""
        return (
            np.indices(self.resolution)
            .reshape(self.dim, -1)
            .T.astype(np.int64, copy=False)
        )

    # -- geometry -----------------------------------------------------------

    def cell_bounds(self, coords: Sequence[int]) -> RectangularSet:
        """Outward-rounded float bounds of the closed cell ``coords``."""
        ivs = []
        for ax, j in enumerate(coords):
            d = self.resolution[ax]
            if not 0 <= j < d:
                raise ValueError(f"cell coordinate {tuple(coords)} out of range")
            ivs.append(Interval(self._edges_lo[ax][j], self._edges_hi[ax][j + 1]))
        return RectangularSet(IntervalRect(ivs))

    def all_cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounds of every cell: two (n_cells, dim) arrays (lo, hi)."""
        coords = np.indices(self.resolution).reshape(self.dim, -1)
        m = coords.shape[1]
        lo = np.empty((m, self.dim), dtype=np.float64)
        hi = np.empty((m, self.dim), dtype=np.float64)
        for ax in range(self.dim):
            lo[:, ax] = self._edges_lo[ax][coords[ax]]
            hi[:, ax] = self._edges_hi[ax][coords[ax] + 1]
        return lo, hi

    def block_hull_outer(self, lo_coords: Sequence[int], hi_coords: Sequence[int]) -> IntervalRect:
        """Outward-rounded hull of the cell block ``lo_coords..hi_coords``."""
        ivs = []
        for ax, (jl, jh) in enumerate(zip(lo_coords, hi_coords)):
            if jl > jh:
                raise ValueError("empty block")
            ivs.append(Interval(self._edges_lo[ax][jl], self._edges_hi[ax][jh + 1]))
        return IntervalRect(ivs)

    def block_hull_inner(self, lo_coords: Sequence[int], hi_coords: Sequence[int]) -> IntervalRect:
        """Inward-rounded hull: guaranteed to be contained in the block union."""
        ivs = []
        for ax, (jl, jh) in enumerate(zip(lo_coords, hi_coords)):
            if jl > jh:
                raise ValueError("empty block")
            ivs.append(Interval(self._edges_hi[ax][jl], self._edges_lo[ax][jh + 1]))
        return IntervalRect(ivs)

    # -- covers -------------------------------------------------------------

    def cover_ranges(
        self, lo: np.ndarray, hi: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized cover: index ranges of cells intersecting each box.

        ``lo``/``hi`` are (m, dim) arrays of finite box bounds.  Returns
        ``(lo_idx, hi_idx, escaped)`` where a row covers cells
        ``lo_idx..hi_idx`` per axis (``lo_idx > hi_idx`` marks an empty
        intersection) and ``escaped`` flags rows extending beyond the domain.
        """
        m = lo.shape[0]
        lo_idx = np.empty((m, self.dim), dtype=np.int64)
        hi_idx = np.empty((m, self.dim), dtype=np.int64)
        escaped = np.zeros(m, dtype=bool)
        for ax in range(self.dim):
            d = self.resolution[ax]
            el = self._edges_lo[ax]
            eh = self._edges_hi[ax]
            escaped |= (lo[:, ax] < el[0]) | (hi[:, ax] > eh[d])
            # smallest j with rounded-up right edge >= box lo
            lo_idx[:, ax] = np.searchsorted(eh[1:], lo[:, ax], side="left")
            # largest j with rounded-down left edge <= box hi
            hi_idx[:, ax] = np.searchsorted(el[:d], hi[:, ax], side="right") - 1
        empty = (lo_idx > hi_idx).any(axis=1)
        np.clip(lo_idx, 0, np.asarray(self.resolution) - 1, out=lo_idx)
        np.clip(hi_idx, 0, np.asarray(self.resolution) - 1, out=hi_idx)
        lo_idx[empty] = 0
        hi_idx[empty] = -1
        return lo_idx, hi_idx, escaped

    def cover(self, rect: IntervalRect) -> tuple[list[CellId], bool]:
        """Cells whose closed bounds may intersect ``rect``, plus escape flag.

        ``rect`` may be degenerate (zero width); a box lying exactly on a
        shared cell edge covers the cells on both sides.  The escape flag
        reports whether ``rect`` extends beyond the grid domain.
        """
        if isinstance(rect, RectangularSet):
            rect = rect.rect
        if rect.dim != self.dim:
            raise ValueError("dimension mismatch")
        lo = np.array([rect.los], dtype=np.float64)
        hi = np.array([rect.his], dtype=np.float64)
        lo_idx, hi_idx, escaped = self.cover_ranges(lo, hi)
        lo_idx, hi_idx = lo_idx[0], hi_idx[0]
        if (lo_idx > hi_idx).any():
            return [], bool(escaped[0])
        cells = [
            tuple(c)
            for c in itertools.product(
                *(range(int(l), int(h) + 1) for l, h in zip(lo_idx, hi_idx))
            )
        ]
        return cells, bool(escaped[0])

    def cells_containing(self, point: Sequence[float]) -> list[CellId]:
        """Cells whose closed bounds contain ``point`` (usually exactly one;
        two or more when the point sits within an ulp of a shared edge)."""
        ivs = IntervalRect(Interval(float(x)) for x in point)
        cells, _ = self.cover(ivs)
        return cells

    def boundary_cells(self) -> set:
        """All cells touching the topological boundary of the domain."""
        out: set = set()
        for ax, d in enumerate(self.resolution):
            for face in {0, d - 1}:
                ranges: list[Iterable[int]] = [range(r) for r in self.resolution]
                ranges[ax] = (face,)
                out.update(itertools.product(*ranges))
        return out

    def is_boundary_coords(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized boundary test for an (m, dim) coordinate array."""
        res = np.asarray(self.resolution)
        return ((coords == 0) | (coords == res - 1)).any(axis=1)
