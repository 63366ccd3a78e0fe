"""Kernel density estimators used as conformity scores.

Every estimator is a plain O(n) kernel sum per evaluation point.  The
"augmented" variants add one virtual observation (the candidate) to the
sample, which is what the conformal constructions rank against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import KernelSpec, evaluate

__all__ = [
    "Dataset",
    "LocalSample",
    "EmptyBin",
    "as_kernel_list",
    "product_kernel_matrix",
    "joint_kde",
    "joint_kde_grid",
    "augmented_joint_kde",
    "local_kde",
    "augmented_local_kde",
]


class EmptyBin(ValueError):
    """Raised when a local estimator is asked for a bin with no members."""


@dataclass(frozen=True)
class Dataset:
    """``n`` paired observations ``(x_i, y_i)`` with ``x_i`` in R^d."""

    x: np.ndarray
    y: np.ndarray
    x_names: tuple = ()
    y_name: str = "y"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("x must be an n-by-d matrix")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if y.shape[0] < 1:
            raise ValueError("empty dataset")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        names = tuple(self.x_names) or tuple(f"x{j}" for j in range(x.shape[1]))
        object.__setattr__(self, "x_names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.x[idx], self.y[idx], self.x_names, self.y_name)

    def append(self, x, y) -> "Dataset":
        """The augmented dataset with one extra row."""
        x = np.asarray(x, dtype=float).reshape(1, self.d)
        return Dataset(
            np.vstack([self.x, x]), np.append(self.y, float(y)), self.x_names, self.y_name
        )

    def joint(self) -> np.ndarray:
        """Rows ``(x_i, y_i)`` stacked as an ``n x (d+1)`` matrix."""
        return np.column_stack([self.x, self.y])


@dataclass(frozen=True)
class LocalSample:
    """Row indices of the observations falling in one partition bin."""

    bin_id: int
    member_indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.member_indices, dtype=int).ravel()
        if np.unique(idx).size != idx.size:
            raise ValueError("member indices must be distinct")
        object.__setattr__(self, "member_indices", idx)

    @property
    def n_k(self) -> int:
        return self.member_indices.size


def as_kernel_list(kx, d: int) -> list[KernelSpec]:
    if isinstance(kx, KernelSpec):
        kx = [kx] * d
    kx = list(kx)
    if len(kx) != d:
        raise ValueError(f"need {d} x-kernels, got {len(kx)}")
    return kx


def product_kernel_matrix(specs: Sequence[KernelSpec], a, b) -> np.ndarray:
    """Unscaled product kernel between every row of ``a`` and every row of ``b``.

    Returns ``M[i, j] = prod_k K_k((a[i, k] - b[j, k]) / h_k)``; the
    ``1 / prod h_k`` normaliser is left to the caller.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    out = np.ones((a.shape[0], b.shape[0]))
    for k, spec in enumerate(specs):
        out *= evaluate(spec, (a[:, k, None] - b[None, :, k]) / spec.bandwidth)
    return out


def _bandwidth_product(specs: Sequence[KernelSpec]) -> float:
    return float(np.prod([s.bandwidth for s in specs]))


def _check_points(data: Dataset, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    scalar = v.ndim == 0
    u = u.reshape(-1, data.d)
    v = v.reshape(-1)
    if u.shape[0] != v.shape[0]:
        raise ValueError("u and v must describe the same number of points")
    return u, v, scalar


def joint_kde(data: Dataset, kx, ky: KernelSpec, u, v):
    """Joint product-kernel density estimate at ``(u, v)``.

    ``u`` may be a single point in R^d or an ``m x d`` array matched with
    ``m`` values in ``v``.  With per-axis bandwidths the normaliser is the
    product of all ``d + 1`` bandwidths.
    """
    if data.n < 1:
        raise ValueError("empty dataset")
    kx = as_kernel_list(kx, data.d)
    specs = kx + [ky]
    u, v, scalar = _check_points(data, u, v)
    pts = np.column_stack([u, v])
    vals = product_kernel_matrix(specs, pts, data.joint()).mean(axis=1)
    vals /= _bandwidth_product(specs)
    return float(vals[0]) if scalar else vals


def joint_kde_grid(data: Dataset, kx, ky: KernelSpec, x_points, y_values) -> np.ndarray:
    """Joint density on the product of ``x_points`` (m x d) and ``y_values``.

    The product kernel factorises, so the whole grid is one matrix product
    (still an exact n-term sum per grid node).
    """
    kx = as_kernel_list(kx, data.d)
    x_points = np.asarray(x_points, dtype=float).reshape(-1, data.d)
    y_values = np.asarray(y_values, dtype=float).ravel()
    kxm = product_kernel_matrix(kx, x_points, data.x)
    kym = evaluate(ky, (data.y[:, None] - y_values[None, :]) / ky.bandwidth)
    return (kxm @ kym) / (data.n * _bandwidth_product(kx + [ky]))


def augmented_joint_kde(data: Dataset, kx, ky: KernelSpec, candidate, u, v):
    """Joint KDE of the data with ``candidate = (x, y)`` appended."""
    kx = as_kernel_list(kx, data.d)
    cx, cy = candidate
    cx = np.asarray(cx, dtype=float).reshape(1, data.d)
    plain = joint_kde(data, kx, ky, u, v)
    uu, vv, _ = _check_points(data, u, v)
    pts = np.column_stack([uu, vv])
    cand = np.column_stack([cx, [[float(cy)]]])
    extra = product_kernel_matrix(kx + [ky], pts, cand)[:, 0] / _bandwidth_product(kx + [ky])
    n = data.n
    out = n / (n + 1) * np.asarray(plain) + extra / (n + 1)
    return float(out[0]) if np.ndim(plain) == 0 else out


def _members(data: Dataset, sample: LocalSample) -> np.ndarray:
    if sample.n_k == 0:
        raise EmptyBin(f"bin {sample.bin_id} has no observations")
    idx = sample.member_indices
    if idx.min() < 0 or idx.max() >= data.n:
        raise IndexError("member index out of range")
    return data.y[idx]


def local_kde(data: Dataset, sample: LocalSample, ky: KernelSpec, v):
    """KDE of the responses of the observations in one bin."""
    yk = _members(data, sample)
    v = np.asarray(v, dtype=float)
    vals = ky.scaled(yk[:, None] - v.reshape(1, -1)).mean(axis=0)
    return float(vals[0]) if v.ndim == 0 else vals.reshape(v.shape)


def augmented_local_kde(data: Dataset, sample: LocalSample, ky: KernelSpec, candidate_y, v):
    """Bin KDE with ``candidate_y`` added to the bin's responses."""
    n_k = sample.n_k
    plain = np.asarray(local_kde(data, sample, ky, v))
    extra = ky.scaled(np.asarray(v, dtype=float) - float(candidate_y))
    out = n_k / (n_k + 1) * plain + extra / (n_k + 1)
    return float(out) if out.ndim == 0 else out
