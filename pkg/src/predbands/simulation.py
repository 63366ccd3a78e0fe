"""Synthetic models, oracle bands and Monte Carlo coverage diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .cops import build_partition, cops_band
from .density import Dataset
from .kernels import KernelSpec
from .sets import GridSpec, IntervalUnion, PredictionBand, symmetric_difference_measure

__all__ = [
    "MODELS",
    "SyntheticModel",
    "NumericError",
    "CoverageReport",
    "lw_mean",
    "lw_gap",
    "lw_variance",
    "sample",
    "sample_y_given_x",
    "conditional_pdf",
    "conditional_mass",
    "oracle_band",
    "coverage_report",
    "monte_carlo_coverage",
    "band_distance",
    "critical_rate",
    "rate_trend",
    "loglog_slope",
]

MODELS = ("indep_gaussian", "lw_mixture")
LW_SUPPORT = (-1.5, 1.5)


class NumericError(RuntimeError):
    """A numerical search failed to converge."""


@dataclass(frozen=True)
class SyntheticModel:
    """A bivariate model with a known conditional density of ``Y`` given ``X``.

    ``indep_gaussian``: X and Y independent standard normals.
    ``lw_mixture``: X uniform on [-1.5, 1.5]; Y given x an equal mixture of
    normals centred at ``lw_mean(x) -/+ lw_gap(x)`` with variance
    ``lw_variance(x)``.
    """

    name: str = "lw_mixture"
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in MODELS:
            raise ValueError(f"unknown model {self.name!r}; choose from {MODELS}")

    @property
    def x_support(self):
        return LW_SUPPORT if self.name == "lw_mixture" else None

    def components(self, x):
        """Mixture weights, means and standard deviations of Y given each x."""
        x = np.asarray(x, dtype=float).ravel()
        if self.name == "indep_gaussian":
            w = np.tile([1.0, 0.0], (x.size, 1))
            mu = np.zeros((x.size, 2))
            sd = np.ones((x.size, 2))
        else:
            f, g = lw_mean(x), lw_gap(x)
            mu = np.column_stack([f - g, f + g])
            sd = np.repeat(np.sqrt(lw_variance(x))[:, None], 2, axis=1)
            w = np.full((x.size, 2), 0.5)
        return w, mu, sd


def lw_mean(x):
    x = np.asarray(x, dtype=float)
    return (x - 1.0) ** 2 * (x + 1.0)


def lw_gap(x):
    x = np.asarray(x, dtype=float)
    return np.where(x >= -0.5, 2.0 * np.sqrt(np.clip(x + 0.5, 0.0, None)), 0.0)


def lw_variance(x):
    return 0.25 + np.abs(np.asarray(x, dtype=float))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_x(model: SyntheticModel, n: int, rng) -> np.ndarray:
    rng = _rng(rng)
    if model.name == "lw_mixture":
        return rng.uniform(*LW_SUPPORT, size=n)
    return rng.standard_normal(n)


def sample_y_given_x(model: SyntheticModel, x, rng) -> np.ndarray:
    rng = _rng(rng)
    w, mu, sd = model.components(x)
    pick = (rng.uniform(size=w.shape[0]) >= w[:, 0]).astype(int)
    rows = np.arange(w.shape[0])
    return mu[rows, pick] + sd[rows, pick] * rng.standard_normal(w.shape[0])


def sample(model: SyntheticModel, n: int, seed=None) -> Dataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = _rng(seed)
    x = sample_x(model, n, rng)
    y = sample_y_given_x(model, x, rng)
    return Dataset(x[:, None], y, ("x",), "y")


_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _mixture_pdf(w, mu, sd, y):
    out = 0.0
    for c in range(2):
        if w[c] > 0:
            z = (y - mu[c]) / sd[c]
            out = out + w[c] * _INV_SQRT_2PI / sd[c] * np.exp(-0.5 * z * z)
    return out


def conditional_pdf(model: SyntheticModel, x: float, y):
    w, mu, sd = model.components([x])
    return _mixture_pdf(w[0], mu[0], sd[0], np.asarray(y, dtype=float))


def conditional_mass(model: SyntheticModel, x: float, s: IntervalUnion) -> float:
    """Conditional probability of a union of intervals, from the normal CDF."""
    w, mu, sd = model.components([x])
    total = 0.0
    for a, b in s:
        for c in range(2):
            if w[0, c] > 0:
                total += w[0, c] * (
                    special.ndtr((b - mu[0, c]) / sd[0, c]) - special.ndtr((a - mu[0, c]) / sd[0, c])
                )
    return float(total)


def _level_set(pdf: Callable, t: float, lo: float, hi: float, m: int) -> IntervalUnion:
    ys = np.linspace(lo, hi, m)
    above = pdf(ys) >= t
    if not above.any():
        return IntervalUnion(())
    g = lambda v: float(pdf(v)) - t
    edges = np.flatnonzero(np.diff(above.astype(np.int8)))
    pieces, start = [], (ys[0] if above[0] else None)
    for e in edges:
        root = optimize.brentq(g, ys[e], ys[e + 1], xtol=1e-12)
        if above[e]:
            pieces.append((start, root))
            start = None
        else:
            start = root
    if start is not None:
        pieces.append((start, ys[-1]))
    return IntervalUnion(tuple(pieces))


def oracle_set(model: SyntheticModel, x: float, alpha: float, tol: float = 1e-4, m: int = 4096, max_iter: int = 200) -> IntervalUnion:
    """Highest-density set of Y given x holding mass in ``[1 - alpha, 1 - alpha + tol]``."""
    w, mu, sd = model.components([x])
    active = w[0] > 0
    lo = float((mu[0] - 10 * sd[0])[active].min())
    hi = float((mu[0] + 10 * sd[0])[active].max())
    pdf = lambda v: _mixture_pdf(w[0], mu[0], sd[0], v)
    t_lo, t_hi = 0.0, float(pdf(np.linspace(lo, hi, m)).max())
    target = 1.0 - alpha
    for _ in range(max_iter):
        t = 0.5 * (t_lo + t_hi)
        s = _level_set(pdf, t, lo, hi, m)
        mass = conditional_mass(model, x, s)
        if target <= mass <= target + tol:
            return s
        if mass > target:
            t_lo = t
        else:
            t_hi = t
    raise NumericError(
        f"oracle level search did not converge at x={x}: last mass {mass:.6f}, "
        f"level bracket [{t_lo:.6g}, {t_hi:.6g}]"
    )


def oracle_band(model: SyntheticModel, alpha: float, x_grid, y_grid: GridSpec | None = None, tol: float = 1e-4) -> PredictionBand:
    """Conditional oracle band: the smallest set with conditional mass ``1 - alpha``.

    Set endpoints are exact level-crossings of the known conditional density,
    so ``y_grid`` is only recorded for reference.
    """
    x_grid = np.asarray(x_grid, dtype=float).ravel()
    sets = [oracle_set(model, float(x), alpha, tol) for x in x_grid]
    return PredictionBand(x_grid, sets, alpha, "oracle", info={"model": model.name, "y_grid": y_grid})


@dataclass
class CoverageReport:
    marginal: tuple
    per_bin: list
    conditional_curve: list
    n_reps: int
    seed: int

    def rows(self):
        yield ("marginal", "", *self.marginal)
        for k, p, se in self.per_bin:
            yield ("bin", k, p, se)
        for x, p, se in self.conditional_curve:
            yield ("conditional", x, p, se)


def _estimate(hits: int, total: int) -> tuple[float, float]:
    if total == 0:
        return float("nan"), float("nan")
    p = hits / total
    return p, float(np.sqrt(p * (1.0 - p) / total))


def _per_bin(locator, x, hit, n_bins=None):
    bins = np.asarray(locator(x[:, None]))
    keys = range(n_bins) if n_bins is not None else np.unique(bins)
    return [(int(k), *_estimate(int(hit[bins == k].sum()), int((bins == k).sum()))) for k in keys]


def coverage_report(
    band: PredictionBand,
    model: SyntheticModel,
    n_reps: int,
    seed: int = 0,
    locator=None,
    conditional: bool = True,
) -> CoverageReport:
    """Coverage of a fixed band on fresh draws.

    ``n_reps`` pairs are drawn for the marginal and per-bin estimates, and
    ``n_reps`` responses from Y given x at every x-grid point for the
    conditional curve.  Bins come from ``locator`` or the band's own one.
    """
    rng = np.random.default_rng(seed)
    x = sample_x(model, n_reps, rng)
    y = sample_y_given_x(model, x, rng)
    hit = band.covers(x[:, None], y)
    marginal = _estimate(int(hit.sum()), n_reps)
    locator = locator or band.locator
    per_bin = _per_bin(locator, x, hit) if locator is not None else []
    curve = []
    if conditional:
        for g, xg in enumerate(band.x_grid[:, 0]):
            yc = sample_y_given_x(model, np.full(n_reps, xg), rng)
            c = band.sets[g].contains(yc)
            curve.append((float(xg), *_estimate(int(c.sum()), n_reps)))
    return CoverageReport(marginal, per_bin, curve, n_reps, seed)


def monte_carlo_coverage(
    fit: Callable[[Dataset], PredictionBand],
    model: SyntheticModel,
    n: int,
    reps: int,
    n_test: int,
    seed: int = 0,
    locator=None,
    n_bins: int | None = None,
) -> CoverageReport:
    """Coverage over repeated training sets.

    Replication ``r`` draws its training sample and then ``n_test`` fresh
    pairs from generator ``seed + r``; hits are pooled across replications.
    """
    hits = total = 0
    bin_hits = bin_total = None
    for r in range(reps):
        rng = np.random.default_rng(seed + r)
        data = sample(model, n, rng)
        band = fit(data)
        x = sample_x(model, n_test, rng)
        y = sample_y_given_x(model, x, rng)
        hit = band.covers(x[:, None], y)
        hits += int(hit.sum())
        total += n_test
        if locator is not None:
            bins = np.asarray(locator(x[:, None]))
            nb = n_bins or int(bins.max()) + 1
            if bin_hits is None:
                bin_hits, bin_total = np.zeros(nb, dtype=int), np.zeros(nb, dtype=int)
            bin_hits += np.bincount(bins, weights=hit, minlength=nb).astype(int)[:nb]
            bin_total += np.bincount(bins, minlength=nb)[:nb]
    per_bin = []
    if bin_hits is not None:
        per_bin = [(k, *_estimate(int(bin_hits[k]), int(bin_total[k]))) for k in range(bin_hits.size)]
    return CoverageReport(_estimate(hits, total), per_bin, [], reps, seed)


def band_distance(band: PredictionBand, reference: PredictionBand) -> tuple[float, float]:
    """Sup and mean over the x-grid of the symmetric-difference measure."""
    if band.x_grid.shape != reference.x_grid.shape or not np.allclose(band.x_grid, reference.x_grid):
        raise ValueError("bands are defined on different x-grids")
    d = np.array([symmetric_difference_measure(a, b) for a, b in zip(band.sets, reference.sets)])
    return float(d.max()), float(d.mean())


def critical_rate(n, beta: float = 2.0, d: int = 1):
    n = np.asarray(n, dtype=float)
    return (np.log(n) / n) ** (beta / (beta * (d + 2) + 1))


def rate_trend(
    model: SyntheticModel,
    alphas: Sequence[float],
    n_list: Sequence[int],
    reps: int,
    seed: int = 0,
    n0: int = 1000,
    w0: float = 0.3,
    h0: float = 0.3,
    x_grid=None,
    y_points: int = 512,
    family: str = "gaussian",
    beta: float = 2.0,
):
    """Median sup-distance of COPS to the oracle as ``n`` grows.

    Bin width and bandwidth follow ``w = w0 * r_n / r_n0`` and
    ``h = h0 * (r_n / r_n0) ** (1 / beta)``.  Returns one dict per
    ``(alpha, n)`` with the medians and the per-seed distances.
    """
    if list(n_list) != sorted(n_list):
        raise ValueError("n_list must be increasing")
    support = model.x_support
    if x_grid is None:
        lo, hi = support if support is not None else (-2.0, 2.0)
        x_grid = np.linspace(lo, hi, 121)
    r0 = critical_rate(n0, beta)
    table = []
    for alpha in np.atleast_1d(alphas):
        oracle = oracle_band(model, float(alpha), x_grid)
        for n in n_list:
            ratio = critical_rate(n, beta) / r0
            w, h = w0 * ratio, h0 * ratio ** (1.0 / beta)
            sups, means = [], []
            for r in range(reps):
                data = sample(model, n, seed + r)
                part = build_partition(data, "equal_width", w, support=support)
                yg = GridSpec.around(data.y, 4.0 * h, y_points)
                band = cops_band(data, part, KernelSpec(family, h), float(alpha), y_grid=yg, x_grid=x_grid)
                s, m = band_distance(band, oracle)
                sups.append(s)
                means.append(m)
            table.append(
                {
                    "alpha": float(alpha),
                    "n": int(n),
                    "w": w,
                    "h": h,
                    "median_sup": float(np.median(sups)),
                    "median_mean": float(np.median(means)),
                    "sups": sups,
                }
            )
    return table


def loglog_slope(table, key: str = "median_sup") -> float:
    """Least-squares slope of ``log(key)`` against ``log(n)``."""
    n = np.array([row["n"] for row in table], dtype=float)
    v = np.array([row[key] for row in table], dtype=float)
    return float(np.polyfit(np.log(n), np.log(v), 1)[0])
