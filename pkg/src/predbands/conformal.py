"""Conformal prediction sets from kernel density heights.

The full conformal set tests every grid candidate ``z`` by ranking the
density of the augmented sample at each observation against its density at
``z``.  The sandwich set replaces that per-candidate augmentation with one
plug-in threshold and always contains the full conformal set; slicing the
sandwich set of ``(x, y)`` along ``x`` gives a marginally valid band.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .density import Dataset, as_kernel_list, product_kernel_matrix
from .kernels import KernelSpec, peak, silverman_bandwidth
from .sets import GridSpec, PredictionBand, from_indicator

__all__ = [
    "conformal_pvalue",
    "conformal_level",
    "full_conformal_set",
    "sandwich_threshold",
    "sandwich_joint_set",
    "slicer_band",
    "default_kernels",
    "default_y_grid",
    "default_x_grid",
]

FULL_CONFORMAL_MAX_N = 500
FULL_CONFORMAL_MAX_DIM = 2
_CHUNK = 2048


def _floor(t: float) -> int:
    # guards products like 0.1 * 30 = 3.0000000000000004 and 0.7 * 10 = 6.999...
    return int(np.floor(t + 1e-9))


def conformal_pvalue(scores) -> float:
    """Fraction of the ``n + 1`` scores at or below the last (candidate) score."""
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size < 1:
        raise ValueError("need at least the candidate's score")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return float(np.count_nonzero(scores <= scores[-1]) / scores.size)


def conformal_level(alpha: float, n: int, threshold: str = "alpha") -> float:
    """Cut-off applied to the p-value.

    ``"alpha"`` keeps ``alpha`` itself; ``"alpha-tilde"`` uses
    ``floor((n + 1) alpha) / (n + 1)``, which is never larger.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    if threshold == "alpha":
        return float(alpha)
    if threshold == "alpha-tilde":
        return _floor((n + 1) * alpha) / (n + 1)
    raise ValueError(f"unknown threshold rule {threshold!r}")


def _as_sample(z) -> np.ndarray:
    if isinstance(z, Dataset):
        return z.joint()
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] < 1:
        raise ValueError("sample must be a non-empty n-by-p array")
    if not np.all(np.isfinite(z)):
        raise ValueError("sample contains non-finite values")
    return z


def _grid_points(grids: Sequence[GridSpec]) -> np.ndarray:
    axes = np.meshgrid(*[g.points for g in grids], indexing="ij")
    return np.column_stack([a.ravel() for a in axes])


def _normalise_grids(grids, p: int) -> list[GridSpec]:
    if isinstance(grids, GridSpec):
        grids = [grids] * p
    grids = list(grids)
    if len(grids) != p:
        raise ValueError(f"need one grid per axis ({p}), got {len(grids)}")
    return grids


def _warn_if_uncovered(z: np.ndarray, grids: Sequence[GridSpec]):
    for j, g in enumerate(grids):
        if z[:, j].min() < g.lo or z[:, j].max() > g.hi:
            warnings.warn(f"grid on axis {j} does not cover the data range", stacklevel=3)


def _kernel_sums(kernels, z: np.ndarray) -> np.ndarray:
    """``sum_j K(z_i - z_j)`` for every sample row (unnormalised)."""
    out = np.empty(z.shape[0])
    for s in range(0, z.shape[0], _CHUNK):
        out[s:s + _CHUNK] = product_kernel_matrix(kernels, z[s:s + _CHUNK], z).sum(axis=1)
    return out


def full_conformal_set(
    z,
    kernels,
    alpha: float,
    grids,
    threshold: str = "alpha",
) -> np.ndarray:
    """Exact conformal set on a grid, by test inversion at every node.

    Parameters
    ----------
    z : array_like, shape (n, p) or Dataset
        The sample; a :class:`Dataset` is used through its ``(x, y)`` rows.
    kernels : KernelSpec or sequence of KernelSpec
        One kernel per coordinate of ``z``.
    alpha : float
        Miscoverage level.
    grids : GridSpec or sequence of GridSpec
        Grid per axis; candidates are the nodes of their product.
    threshold : {"alpha", "alpha-tilde"}
        Cut-off rule for the p-value.

    Returns
    -------
    ndarray of bool, shape (m_1, ..., m_p)
        Indicator of the nodes whose conformal p-value reaches the cut-off.
    """
    z = _as_sample(z)
    n, p = z.shape
    if p > FULL_CONFORMAL_MAX_DIM or n > FULL_CONFORMAL_MAX_N:
        raise ValueError(
            f"full conformal set is limited to p <= {FULL_CONFORMAL_MAX_DIM} and "
            f"n <= {FULL_CONFORMAL_MAX_N}; use the sandwich set instead"
        )
    kernels = as_kernel_list(kernels, p)
    grids = _normalise_grids(grids, p)
    _warn_if_uncovered(z, grids)
    level = conformal_level(alpha, n, threshold)

    # Scores share the factor 1 / ((n + 1) prod h), which does not affect ranks.
    base = _kernel_sums(kernels, z)
    k0 = float(np.prod([peak(k) for k in kernels]))
    pts = _grid_points(grids)
    keep = np.empty(pts.shape[0], dtype=bool)
    for s in range(0, pts.shape[0], _CHUNK):
        kgz = product_kernel_matrix(kernels, pts[s:s + _CHUNK], z)
        sigma = base[None, :] + kgz
        sigma_cand = kgz.sum(axis=1) + k0
        count = np.count_nonzero(sigma <= sigma_cand[:, None], axis=1) + 1
        keep[s:s + _CHUNK] = count / (n + 1) >= level
    return keep.reshape([g.m for g in grids])


def sandwich_threshold(z, kernels, alpha: float) -> tuple[float, int]:
    """Plug-in level ``p(Z_(j)) - K(0) / (n prod h)`` with ``j = floor(n alpha)``.

    Returns ``(threshold, j)``; ``j == 0`` gives ``-inf`` (every point kept).
    Sample points are ordered by density, ties broken by row index.
    """
    z = _as_sample(z)
    n, p = z.shape
    kernels = as_kernel_list(kernels, p)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    j = _floor(n * alpha)
    if j == 0:
        warnings.warn(
            f"floor(n * alpha) = 0 for n={n}, alpha={alpha}; returning the whole grid",
            stacklevel=3,
        )
        return -np.inf, 0
    hprod = float(np.prod([k.bandwidth for k in kernels]))
    dens = _kernel_sums(kernels, z) / (n * hprod)
    order = np.lexsort((np.arange(n), dens))
    k0 = float(np.prod([peak(k) for k in kernels]))
    return float(dens[order[j - 1]] - k0 / (n * hprod)), j


def _kde_on_points(kernels, z: np.ndarray, pts: np.ndarray) -> np.ndarray:
    hprod = float(np.prod([k.bandwidth for k in kernels]))
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], _CHUNK):
        out[s:s + _CHUNK] = product_kernel_matrix(kernels, pts[s:s + _CHUNK], z).sum(axis=1)
    return out / (z.shape[0] * hprod)


def sandwich_joint_set(z, kernels, alpha: float, grids) -> np.ndarray:
    """Grid indicator of the plug-in (sandwich) approximation to the conformal set."""
    z = _as_sample(z)
    p = z.shape[1]
    kernels = as_kernel_list(kernels, p)
    grids = _normalise_grids(grids, p)
    t, _ = sandwich_threshold(z, kernels, alpha)
    shape = [g.m for g in grids]
    if t == -np.inf:
        return np.ones(shape, dtype=bool)
    return (_kde_on_points(kernels, z, _grid_points(grids)) >= t).reshape(shape)


def default_kernels(data: Dataset, family: str = "gaussian"):
    """Per-axis Silverman bandwidths for ``(x, y)``."""
    kx = [KernelSpec(family, silverman_bandwidth(data.x[:, j])) for j in range(data.d)]
    ky = KernelSpec(family, silverman_bandwidth(data.y))
    return kx, ky


def default_y_grid(data: Dataset, ky: KernelSpec, m: int = 512) -> GridSpec:
    return GridSpec.around(data.y, 4.0 * ky.bandwidth, m)


def default_x_grid(data: Dataset, m: int = 101) -> np.ndarray:
    if data.d != 1:
        raise ValueError("default x-grid is only defined for d = 1; pass points explicitly")
    return np.linspace(data.x[:, 0].min(), data.x[:, 0].max(), m)


def slicer_band(
    data: Dataset,
    kx,
    ky: KernelSpec,
    alpha: float,
    x_grid=None,
    y_grid: GridSpec | None = None,
) -> PredictionBand:
    """Marginally valid band from x-slices of the joint sandwich set.

    One global threshold is taken from the ordered joint density heights at
    the sample; the set at each x-grid point is ``{y : p(x, y) >= threshold}``
    on ``y_grid``.
    """
    kx = as_kernel_list(kx, data.d)
    if x_grid is None:
        x_grid = default_x_grid(data)
    if y_grid is None:
        y_grid = default_y_grid(data, ky)
    x_grid = np.asarray(x_grid, dtype=float).reshape(-1, data.d)
    specs = kx + [ky]
    t, j = sandwich_threshold(data.joint(), specs, alpha)

    hprod = float(np.prod([k.bandwidth for k in specs]))
    kxm = product_kernel_matrix(kx, x_grid, data.x)
    kym = product_kernel_matrix([ky], data.y[:, None], y_grid.points[:, None])
    dens = (kxm @ kym) / (data.n * hprod)
    sets = [from_indicator(row >= t, y_grid) for row in dens]
    return PredictionBand(
        x_grid,
        sets,
        alpha,
        "slicer",
        info={
            "threshold": t,
            "rank": j,
            "bandwidths": [k.bandwidth for k in specs],
            "kernel": ky.family,
            "y_grid": y_grid,
        },
    )
