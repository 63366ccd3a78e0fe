"""Univariate smoothing kernels and the constants used by the sandwich bounds.

Kernels are evaluated unscaled, ``K(u)``; callers apply the bandwidth as
``K((v - y) / h) / h``.  Product kernels over ``d`` coordinates are built from
one :class:`KernelSpec` per axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "FAMILIES",
    "KernelSpec",
    "evaluate",
    "kernel_span",
    "peak",
    "product_evaluate",
    "silverman_bandwidth",
]

FAMILIES = ("gaussian", "epanechnikov", "uniform", "biweight")

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
# Gaussian tail beyond |u| = 8 is below 1e-14 and is dropped.
_GAUSS_CUTOFF = 8.0


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family together with the bandwidth it is applied with."""

    family: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; choose from {FAMILIES}"
            )
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("bandwidth must be a positive finite number")

    def with_bandwidth(self, h: float) -> "KernelSpec":
        return KernelSpec(self.family, float(h))

    def scaled(self, t) -> np.ndarray:
        """``K(t / h) / h``: the kernel at bandwidth ``h`` applied to raw offsets."""
        return evaluate(self, np.asarray(t, dtype=float) / self.bandwidth) / self.bandwidth


def evaluate(spec: KernelSpec, u):
    """Unscaled kernel ``K(u)``; vectorised over ``u``."""
    u = np.asarray(u, dtype=float)
    fam = spec.family
    if fam == "gaussian":
        out = np.exp(-0.5 * u * u) * _INV_SQRT_2PI
        out = np.where(np.abs(u) <= _GAUSS_CUTOFF, out, 0.0)
    else:
        inside = np.abs(u) <= 1.0
        if fam == "epanechnikov":
            out = np.where(inside, 0.75 * (1.0 - u * u), 0.0)
        elif fam == "uniform":
            out = np.where(inside, 0.5, 0.0)
        else:  # biweight
            out = np.where(inside, 0.9375 * (1.0 - u * u) ** 2, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def peak(spec: KernelSpec) -> float:
    """``K(0)``, the maximum of every shipped family."""
    return evaluate(spec, 0.0)


def kernel_span(spec: KernelSpec) -> float:
    """``sup K - inf K`` of the unscaled kernel.

    All shipped kernels peak at zero and have infimum zero over the real
    line (the Gaussian only approaches it), so this equals ``K(0)``.
    """
    return peak(spec)


def product_evaluate(specs: Sequence[KernelSpec], u) -> np.ndarray | float:
    """Product kernel ``prod_j K_j(u_j)``.

    ``u`` has trailing dimension ``d = len(specs)``; leading dimensions are
    broadcast.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u.reshape(1)
    if len(specs) == 0 or u.shape[-1] != len(specs):
        raise ValueError(
            f"dimension mismatch: {len(specs)} kernels for points of dimension {u.shape[-1]}"
        )
    out = np.ones(u.shape[:-1])
    for j, spec in enumerate(specs):
        out = out * evaluate(spec, u[..., j])
    if out.ndim == 0:
        return float(out)
    return out


def silverman_bandwidth(values) -> float:
    """Rule-of-thumb bandwidth ``1.06 * sd * n^(-1/5)``.

    Falls back to 1.0 when the sample has zero spread.
    """
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
    if not sd > 0:
        return 1.0
    return 1.06 * sd * n ** (-0.2)
