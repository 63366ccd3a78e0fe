"""Grids, finite unions of intervals and prediction bands."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "IntervalUnion",
    "PredictionBand",
    "METHODS",
    "measure",
    "from_indicator",
    "intersection_measure",
    "symmetric_difference_measure",
]

METHODS = (
    "full_conformal",
    "sandwich_joint",
    "slicer",
    "cops",
    "local_slicer",
    "linear_baseline",
    "oracle",
)


@dataclass(frozen=True)
class GridSpec:
    """``m`` equally spaced nodes from ``lo`` to ``hi`` inclusive."""

    lo: float
    hi: float
    m: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError("grid needs finite lo < hi")
        if int(self.m) < 2:
            raise ValueError("grid needs at least two points")
        object.__setattr__(self, "m", int(self.m))

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.m - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.m)

    @classmethod
    def around(cls, values, pad: float, m: int = 512) -> "GridSpec":
        """Grid spanning the range of ``values`` widened by ``pad`` on each side."""
        values = np.asarray(values, dtype=float)
        lo, hi = float(values.min()) - pad, float(values.max()) + pad
        if hi <= lo:
            lo, hi = lo - 1.0, hi + 1.0
        return cls(lo, hi, m)


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, pairwise disjoint closed intervals.

    Overlapping or touching input intervals are merged on construction.
    """

    intervals: tuple = ()

    def __post_init__(self):
        raw = sorted((float(a), float(b)) for a, b in self.intervals)
        merged: list[list[float]] = []
        for a, b in raw:
            if a > b:
                raise ValueError(f"interval [{a}, {b}] has a > b")
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        object.__setattr__(self, "intervals", tuple((a, b) for a, b in merged))

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        hit = np.zeros(y.shape, dtype=bool)
        for a, b in self.intervals:
            hit |= (y >= a) & (y <= b)
        return bool(hit) if hit.ndim == 0 else hit


def measure(s: IntervalUnion) -> float:
    """Lebesgue measure of a union of intervals."""
    return s.measure


def from_indicator(mask, grid: GridSpec) -> IntervalUnion:
    """Turn a 0/1 indicator on grid nodes into intervals.

    Each maximal run of included nodes becomes the interval reaching half a
    spacing past its first and last node (clipped to the grid ends), so a
    run of ``c`` interior nodes has measure ``c * spacing``.
    """
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != grid.m:
        raise ValueError("indicator length does not match grid")
    if not mask.any():
        return IntervalUnion(())
    pts = grid.points
    half = 0.5 * grid.spacing
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    change = np.diff(padded)
    starts = np.flatnonzero(change == 1)
    stops = np.flatnonzero(change == -1) - 1
    return IntervalUnion(
        tuple(
            (max(pts[s] - half, grid.lo), min(pts[e] + half, grid.hi))
            for s, e in zip(starts, stops)
        )
    )


def intersection_measure(a: IntervalUnion, b: IntervalUnion) -> float:
    total = 0.0
    i = j = 0
    ia, ib = a.intervals, b.intervals
    while i < len(ia) and j < len(ib):
        lo = max(ia[i][0], ib[j][0])
        hi = min(ia[i][1], ib[j][1])
        if hi > lo:
            total += hi - lo
        if ia[i][1] < ib[j][1]:
            i += 1
        else:
            j += 1
    return total


def symmetric_difference_measure(a: IntervalUnion, b: IntervalUnion) -> float:
    """``mu(A) + mu(B) - 2 mu(A & B)``, exact on the interval endpoints."""
    return max(a.measure + b.measure - 2.0 * intersection_measure(a, b), 0.0)


@dataclass
class PredictionBand:
    """One :class:`IntervalUnion` per point of an x-grid.

    ``cells`` optionally records the partition bin of every grid point; with
    a ``locator`` (any callable mapping x-points to bin ids) lookups for new
    x values stay inside the bin the point falls in.
    """

    x_grid: np.ndarray
    sets: list
    alpha: float
    method: str
    cells: np.ndarray | None = None
    locator: object = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        self.x_grid = x
        if len(self.sets) != x.shape[0]:
            raise ValueError("need exactly one set per x-grid point")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0,1)")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def d(self) -> int:
        return self.x_grid.shape[1]

    def measures(self) -> np.ndarray:
        return np.array([s.measure for s in self.sets])

    def index_for(self, x) -> np.ndarray:
        """Index of the x-grid point used for each query point."""
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        dist = ((x[:, None, :] - self.x_grid[None, :, :]) ** 2).sum(axis=-1)
        if self.cells is not None and self.locator is not None:
            bins = np.asarray(self.locator(x))
            same = bins[:, None] == self.cells[None, :]
            has = same.any(axis=1)
            dist = np.where(same | ~has[:, None], dist, np.inf)
        return np.argmin(dist, axis=1)

    def set_at(self, x) -> IntervalUnion:
        return self.sets[int(self.index_for(x)[0])]

    def covers(self, x, y) -> np.ndarray:
        """Whether each ``y[i]`` lies in the band's set at ``x[i]``."""
        y = np.asarray(y, dtype=float).ravel()
        idx = self.index_for(x)
        hit = np.zeros(y.shape, dtype=bool)
        for g in np.unique(idx):
            sel = idx == g
            hit[sel] = self.sets[g].contains(y[sel])
        return hit


def band_from_masks(
    x_grid, masks: Sequence, y_grid: GridSpec, alpha: float, method: str, **kw
) -> PredictionBand:
    return PredictionBand(
        x_grid, [from_indicator(m, y_grid) for m in masks], alpha, method, **kw
    )
