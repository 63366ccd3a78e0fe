"""Locally valid prediction bands (COPS) on a partition of the x-space.

Observations are grouped into bins; inside each bin the candidate ``y`` is
ranked against the bin's responses with an augmented density score, so the
band keeps its coverage conditionally on the bin the new ``x`` falls in.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conformal import _floor, conformal_level, default_y_grid
from .density import (
    Dataset,
    EmptyBin,
    LocalSample,
    as_kernel_list,
    augmented_local_kde,
    product_kernel_matrix,
)
from .kernels import KernelSpec, evaluate, kernel_span, peak
from .sets import GridSpec, PredictionBand, from_indicator

__all__ = [
    "Partition",
    "ThinBinWarning",
    "SCHEMES",
    "VARIANTS",
    "build_partition",
    "local_conformity_rank",
    "local_pvalues",
    "local_sandwich_masks",
    "conformity_variant",
    "cops_band",
    "local_slicer_band",
]

SCHEMES = ("equal_width", "equal_count")
VARIANTS = ("local_marginal", "joint_density", "conditional_density")
DEFAULT_N_MIN = 20


class ThinBinWarning(UserWarning):
    """Some bins hold fewer than ``n_min`` observations."""


@dataclass
class Partition:
    """Axis-aligned bins covering the x-range.

    ``edges[j]`` holds the bin boundaries on axis ``j``; bins are half-open
    ``[e_i, e_{i+1})`` except the last on each axis, and points outside the
    range are assigned to the nearest edge bin.
    """

    scheme: str
    parameter: float
    edges: list
    assignments: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return len(self.edges)

    @property
    def shape(self) -> tuple:
        return tuple(len(e) - 1 for e in self.edges)

    @property
    def n_bins(self) -> int:
        return int(np.prod(self.shape))

    def locate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        idx = [np.searchsorted(e[1:-1], x[:, j], side="right") for j, e in enumerate(self.edges)]
        return np.ravel_multi_index(idx, self.shape)

    def bounds(self, k: int) -> list[tuple[float, float]]:
        ijk = np.unravel_index(k, self.shape)
        return [(float(e[i]), float(e[i + 1])) for e, i in zip(self.edges, ijk)]

    def center(self, k: int) -> np.ndarray:
        return np.array([(a + b) / 2 for a, b in self.bounds(k)])

    def counts(self) -> np.ndarray:
        return np.array([s.n_k for s in self.assignments])

    def describe(self) -> str:
        edges = ";".join("|".join(repr(float(v)) for v in e) for e in self.edges)
        return f"{self.scheme}:{self.parameter:g}:{edges}"


def _width_edges(lo: float, hi: float, w: float) -> np.ndarray:
    nb = max(1, math.ceil((hi - lo) / w - 1e-9))
    edges = lo + w * np.arange(nb + 1)
    edges[-1] = hi
    return edges


def _count_edges(x: np.ndarray, k: int, lo: float, hi: float) -> np.ndarray:
    xs = np.sort(x)
    n = xs.size
    cuts = []
    for b in range(1, k):
        i = int(math.floor(b * n / k))
        cuts.append(0.5 * (xs[i - 1] + xs[i]))
    edges = np.unique(np.concatenate([[lo], cuts, [hi]]))
    return edges


def build_partition(data: Dataset, scheme: str = "equal_width", parameter: float = 0.3, support=None) -> Partition:
    """Partition the x-range into bins.

    ``equal_width`` uses cubes of side ``parameter`` anchored at the lower
    end of the range (the last bin on each axis is clipped); ``equal_count``
    (d = 1 only) makes ``parameter`` bins with edges at midpoints between
    consecutive order statistics.  ``support`` overrides the observed range,
    as ``(lo, hi)`` or one pair per axis.
    """
    scheme = scheme.replace("-", "_")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown partition scheme {scheme!r}")
    if not parameter > 0:
        raise ValueError("partition parameter must be positive")
    if support is None:
        support = [(float(data.x[:, j].min()), float(data.x[:, j].max())) for j in range(data.d)]
    elif np.ndim(support) == 1:
        support = [tuple(support)] * data.d
    support = [(float(a), float(b)) for a, b in support]

    if scheme == "equal_width":
        edges = []
        for lo, hi in support:
            if hi <= lo or parameter >= hi - lo:
                if hi - lo > 0 and parameter > hi - lo:
                    warnings.warn("bin width exceeds the data range; using a single bin", stacklevel=2)
                edges.append(np.array([lo, max(hi, lo)]))
            else:
                edges.append(_width_edges(lo, hi, float(parameter)))
    else:
        if data.d != 1:
            raise ValueError("equal-count partitions require d = 1")
        k = int(parameter)
        if k < 1 or k != parameter:
            raise ValueError("equal-count partitions need a positive integer bin count")
        lo, hi = support[0]
        edges = [_count_edges(data.x[:, 0], min(k, data.n), lo, hi)]
        if len(edges[0]) - 1 < k:
            warnings.warn(f"tied x values merged bins: {len(edges[0]) - 1} of {k} remain", stacklevel=2)

    part = Partition(scheme, float(parameter), edges)
    ids = part.locate(data.x)
    part.assignments = [LocalSample(k, np.flatnonzero(ids == k)) for k in range(part.n_bins)]
    return part


def local_conformity_rank(
    data: Dataset, partition: Partition, k: int, ky: KernelSpec, candidate
) -> float:
    """Rank of the candidate's augmented bin density among the bin's responses.

    Written directly with :func:`augmented_local_kde`; the band builders use
    the vectorised :func:`local_pvalues`.
    """
    x, y = candidate
    if int(partition.locate(x)[0]) != k:
        raise ValueError(f"candidate x does not fall in bin {k}")
    sample = partition.assignments[k]
    if sample.n_k == 0:
        raise EmptyBin(f"bin {k} has no observations")
    yk = data.y[sample.member_indices]
    sigma = augmented_local_kde(data, sample, ky, y, yk)
    sigma_cand = augmented_local_kde(data, sample, ky, y, y)
    return (np.count_nonzero(sigma <= sigma_cand) + 1) / (sample.n_k + 1)


def _local_scores(yk: np.ndarray, ky: KernelSpec, y_points: np.ndarray):
    """Unnormalised augmented bin densities at members and at each candidate."""
    h = ky.bandwidth
    base = evaluate(ky, (yk[:, None] - yk[None, :]) / h).sum(axis=1)
    kyc = evaluate(ky, (y_points[:, None] - yk[None, :]) / h)
    return base[None, :] + kyc, kyc.sum(axis=1) + peak(ky)


def local_pvalues(yk, ky: KernelSpec, y_points) -> np.ndarray:
    """Local conformity rank of every candidate in ``y_points`` for one bin."""
    yk = np.asarray(yk, dtype=float)
    if yk.size == 0:
        raise EmptyBin("bin has no observations")
    sigma, sigma_cand = _local_scores(yk, ky, np.asarray(y_points, dtype=float))
    return (np.count_nonzero(sigma <= sigma_cand[:, None], axis=1) + 1) / (yk.size + 1)


def local_sandwich_masks(yk, ky: KernelSpec, alpha: float, y_points):
    """Inner and outer plug-in level sets bracketing the bin's COPS set.

    Both threshold the bin KDE at its ``floor(n_k alpha)``-th smallest
    sample height; the outer set lowers that level by
    ``kernel_span / (n_k h)``.  ``floor(n_k alpha) = 0`` keeps everything.
    """
    yk = np.asarray(yk, dtype=float)
    n_k = yk.size
    y_points = np.asarray(y_points, dtype=float)
    j = _floor(n_k * alpha)
    if j == 0:
        full = np.ones(y_points.size, dtype=bool)
        return full, full
    h = ky.bandwidth
    dens_sample = evaluate(ky, (yk[:, None] - yk[None, :]) / h).sum(axis=1) / (n_k * h)
    order = np.lexsort((np.arange(n_k), dens_sample))
    level = dens_sample[order[j - 1]]
    dens = evaluate(ky, (y_points[:, None] - yk[None, :]) / h).sum(axis=1) / (n_k * h)
    return dens >= level, dens >= level - kernel_span(ky) / (n_k * h)


def conformity_variant(
    data: Dataset,
    partition: Partition,
    variant: str = "local_marginal",
    ky: KernelSpec | None = None,
    kx=None,
) -> Callable:
    """Scoring rule used to rank a candidate inside its bin.

    Returns ``score(k, x, y_points) -> (member_scores, candidate_scores)``
    with shapes ``(m, n_k)`` and ``(m,)``.  Scores are the augmented
    density heights up to a factor shared by all entries, which leaves the
    ranks unchanged.

    ``local_marginal`` uses the KDE of the bin's responses (independent of
    ``x`` within the bin); ``joint_density`` and ``conditional_density``
    use the full-sample joint KDE and its ratio to the x-marginal.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown conformity variant {variant!r}")
    if ky is None:
        raise ValueError("a y-kernel is required")

    if variant == "local_marginal":
        def score(k, x, y_points):
            idx = partition.assignments[k].member_indices
            if idx.size == 0:
                raise EmptyBin(f"bin {k} has no observations")
            return _local_scores(data.y[idx], ky, np.asarray(y_points, dtype=float))
        return score

    if kx is None:
        raise ValueError(f"variant {variant!r} needs x-kernels")
    kx = as_kernel_list(kx, data.d)

    kxx = product_kernel_matrix(kx, data.x, data.x)
    kyy = evaluate(ky, (data.y[:, None] - data.y[None, :]) / ky.bandwidth)
    joint_base = (kxx * kyy).sum(axis=1)
    marg_base = kxx.sum(axis=1)
    k0x = float(np.prod([peak(s) for s in kx]))
    k0y = peak(ky)

    cache = {}

    def ky_matrix(y_points):
        key = (y_points.size, y_points[0], y_points[-1], float(y_points.sum()))
        if cache.get("key") != key:
            cache["key"] = key
            cache["value"] = evaluate(ky, (y_points[:, None] - data.y[None, :]) / ky.bandwidth)
        return cache["value"]

    def score(k, x, y_points):
        idx = partition.assignments[k].member_indices
        if idx.size == 0:
            raise EmptyBin(f"bin {k} has no observations")
        y_points = np.asarray(y_points, dtype=float)
        kx_all = product_kernel_matrix(kx, np.reshape(x, (1, -1)), data.x)[0]
        ky_all = ky_matrix(y_points)
        cand_joint = ky_all @ kx_all + k0x * k0y
        mem_joint = joint_base[idx][None, :] + kx_all[idx][None, :] * ky_all[:, idx]
        if variant == "joint_density":
            return mem_joint, cand_joint
        mem_marg = marg_base[idx] + kx_all[idx]
        cand_marg = kx_all.sum() + k0x
        small = mem_marg < 1e-12
        if small.any():
            warnings.warn("vanishing x-marginal at some observations; their scores are set to 0", stacklevel=2)
        mem = np.where(small[None, :], 0.0, mem_joint / np.where(small, 1.0, mem_marg)[None, :])
        return mem, cand_joint / cand_marg

    return score


def _resolve_ky(ky, k: int) -> KernelSpec:
    if isinstance(ky, KernelSpec):
        return ky
    return ky[k]


def _widest_ky(ky) -> KernelSpec:
    if isinstance(ky, KernelSpec):
        return ky
    return max(ky.values(), key=lambda s: s.bandwidth)


def _default_x_grid(partition: Partition, m: int = 101):
    if partition.d != 1:
        raise ValueError("pass x_grid explicitly when d > 1")
    e = partition.edges[0]
    return np.linspace(e[0], e[-1], m)


def _thin_bins(partition: Partition, n_min: int, used: set) -> list:
    thin = [k for k in sorted(used) if partition.assignments[k].n_k < n_min]
    if thin:
        warnings.warn(
            f"bins {thin} hold fewer than {n_min} observations; using the full y-range there",
            ThinBinWarning,
            stacklevel=3,
        )
    return thin


def cops_band(
    data: Dataset,
    partition: Partition,
    ky,
    alpha: float,
    y_grid: GridSpec | None = None,
    x_grid=None,
    variant: str = "local_marginal",
    kx=None,
    n_min: int = DEFAULT_N_MIN,
    threshold: str = "alpha",
) -> PredictionBand:
    """Conformal Optimized Prediction Set band.

    For ``x`` in bin ``k`` the set is ``{y : local rank >= alpha}`` on
    ``y_grid``.  ``ky`` is one kernel or a mapping from bin id to kernel
    (per-bin bandwidths).  With the ``local_marginal`` score the set is
    computed once per bin and shared by its x-grid points; the other
    variants re-rank at every x-grid point.  Bins with fewer than ``n_min``
    observations get the whole y-grid range.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    if y_grid is None:
        y_grid = default_y_grid(data, _widest_ky(ky))
    if x_grid is None:
        x_grid = _default_x_grid(partition)
    x_grid = np.asarray(x_grid, dtype=float).reshape(-1, partition.d)
    y_pts = y_grid.points
    cells = partition.locate(x_grid)
    thin = set(_thin_bins(partition, n_min, set(cells.tolist())))

    scorers = {}

    def scorer(k):
        spec = _resolve_ky(ky, k)
        key = (spec.family, spec.bandwidth)
        if key not in scorers:
            scorers[key] = conformity_variant(data, partition, variant, spec, kx)
        return scorers[key]

    def mask_for(k, x):
        n_k = partition.assignments[k].n_k
        if k in thin:
            return np.ones(y_grid.m, dtype=bool)
        level = conformal_level(alpha, n_k, threshold)
        sigma, sigma_cand = scorer(k)(k, x, y_pts)
        rank = (np.count_nonzero(sigma <= sigma_cand[:, None], axis=1) + 1) / (n_k + 1)
        return rank >= level

    bin_masks = {}
    masks = []
    for g, k in enumerate(cells.tolist()):
        if variant == "local_marginal":
            if k not in bin_masks:
                bin_masks[k] = mask_for(k, None)
            masks.append(bin_masks[k])
        else:
            masks.append(mask_for(k, x_grid[g]))
    sets = [from_indicator(m, y_grid) for m in masks]
    return PredictionBand(
        x_grid,
        sets,
        alpha,
        "cops",
        cells=cells,
        locator=partition.locate,
        info={
            "variant": variant,
            "threshold_rule": threshold,
            "thin_bins": sorted(thin),
            "n_k": partition.counts().tolist(),
            "y_grid": y_grid,
            "bin_masks": bin_masks,
            "partition": partition.describe(),
        },
    )


def local_slicer_band(
    data: Dataset,
    partition: Partition,
    ky,
    alpha: float,
    y_grid: GridSpec | None = None,
    x_grid=None,
    kx=None,
    n_min: int = DEFAULT_N_MIN,
    inner: bool = False,
) -> PredictionBand:
    """Per-bin sandwich approximation to the COPS band.

    Each bin's set is the outer plug-in level set of the bin's response
    KDE; ``inner=True`` returns the inner set instead (no slack), which is
    contained in the COPS set.  ``kx`` is accepted for signature symmetry
    and unused.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    if y_grid is None:
        y_grid = default_y_grid(data, _widest_ky(ky))
    if x_grid is None:
        x_grid = _default_x_grid(partition)
    x_grid = np.asarray(x_grid, dtype=float).reshape(-1, partition.d)
    cells = partition.locate(x_grid)
    thin = set(_thin_bins(partition, n_min, set(cells.tolist())))
    bin_masks = {}
    for k in sorted(set(cells.tolist())):
        if k in thin:
            bin_masks[k] = np.ones(y_grid.m, dtype=bool)
            continue
        yk = data.y[partition.assignments[k].member_indices]
        lo_set, hi_set = local_sandwich_masks(yk, _resolve_ky(ky, k), alpha, y_grid.points)
        bin_masks[k] = lo_set if inner else hi_set
    sets = [from_indicator(bin_masks[k], y_grid) for k in cells.tolist()]
    return PredictionBand(
        x_grid,
        sets,
        alpha,
        "local_slicer",
        cells=cells,
        locator=partition.locate,
        info={
            "inner": inner,
            "thin_bins": sorted(thin),
            "n_k": partition.counts().tolist(),
            "y_grid": y_grid,
            "bin_masks": bin_masks,
            "partition": partition.describe(),
        },
    )
