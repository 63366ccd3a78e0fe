"""Data-driven choice of bin width and per-bin bandwidths by sample splitting.

The first half of the data picks, for every candidate width, the bandwidth
that minimises each bin's set measure; the width with the smallest
count-weighted average measure wins.  The band itself is then fitted on the
second half only, so its coverage guarantee is untouched by the search.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .conformal import conformal_level
from .cops import DEFAULT_N_MIN, build_partition, cops_band, local_pvalues
from .density import Dataset
from .kernels import KernelSpec, silverman_bandwidth
from .sets import GridSpec, PredictionBand, from_indicator

__all__ = [
    "TuningGrid",
    "TuningResult",
    "TuningInfeasible",
    "split",
    "default_tuning_grid",
    "bin_set_measures",
    "bandwidth_curve",
    "tune_cops",
]

WIDTH_DIVISORS = (4, 6, 8, 10, 14, 20)
BANDWIDTH_FACTORS = (0.5, 0.75, 1.0, 1.5, 2.0)


class TuningInfeasible(RuntimeError):
    """No candidate width leaves enough observations per bin."""


@dataclass(frozen=True)
class TuningGrid:
    widths: tuple
    bandwidths: tuple

    def __post_init__(self):
        w = tuple(sorted(float(v) for v in self.widths))
        h = tuple(sorted(float(v) for v in self.bandwidths))
        if not w or not h:
            raise ValueError("candidate lists must be nonempty")
        if min(w) <= 0 or min(h) <= 0:
            raise ValueError("candidates must be positive")
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "bandwidths", h)


@dataclass
class TuningResult:
    chosen_w: float
    chosen_h_per_bin: dict
    objective_trace: dict
    split_seed: int
    # width -> list of (bin, n_k, chosen h or None, set measure)
    per_bin: dict = field(default_factory=dict)
    dropped_widths: tuple = ()
    n_first: int = 0

    def recompute_objective(self, w: float) -> float:
        rows = self.per_bin[w]
        return sum(n_k * mu for _, n_k, _, mu in rows) / self.n_first

    def report(self) -> str:
        lines = [
            f"chosen_w={self.chosen_w:.10g}",
            f"split_seed={self.split_seed}",
            f"dropped_widths={','.join(f'{w:.10g}' for w in self.dropped_widths)}",
            "",
            "w,Q",
        ]
        lines += [f"{w:.10g},{q:.10g}" for w, q in self.objective_trace.items()]
        lines += ["", "bin,h"]
        lines += [f"{k},{h:.10g}" for k, h in sorted(self.chosen_h_per_bin.items())]
        return "\n".join(lines) + "\n"


def split(data: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Random halves of sizes ``floor(n/2)`` and ``ceil(n/2)``."""
    if data.n < 2:
        raise ValueError("need at least two observations to split")
    perm = np.random.default_rng(seed).permutation(data.n)
    half = data.n // 2
    return data.subset(np.sort(perm[:half])), data.subset(np.sort(perm[half:]))


def default_tuning_grid(data: Dataset) -> TuningGrid:
    """Widths ``range / {4, ..., 20}`` and bandwidths ``Silverman * {0.5, ..., 2}``."""
    rng = float(np.ptp(data.x[:, 0])) if data.d == 1 else float(np.ptp(data.x, axis=0).min())
    h0 = silverman_bandwidth(data.y)
    return TuningGrid(
        tuple(rng / k for k in WIDTH_DIVISORS), tuple(h0 * f for f in BANDWIDTH_FACTORS)
    )


def bin_set_measures(yk, family: str, bandwidths, alpha: float, y_grid: GridSpec, threshold: str = "alpha"):
    """COPS set measure of one bin for each candidate bandwidth."""
    level = conformal_level(alpha, len(yk), threshold)
    out = []
    for h in bandwidths:
        mask = local_pvalues(yk, KernelSpec(family, h), y_grid.points) >= level
        out.append(from_indicator(mask, y_grid).measure)
    return np.array(out)


def bandwidth_curve(
    data: Dataset,
    partition,
    bandwidths,
    alpha: float,
    y_grid: GridSpec,
    family: str = "gaussian",
    n_min: int = DEFAULT_N_MIN,
):
    """Count-weighted average COPS set measure for each common bandwidth."""
    full = y_grid.hi - y_grid.lo
    totals = np.zeros(len(bandwidths))
    for s in partition.assignments:
        if s.n_k == 0:
            continue
        if s.n_k < n_min:
            totals += s.n_k * full
            continue
        totals += s.n_k * bin_set_measures(data.y[s.member_indices], family, bandwidths, alpha, y_grid)
    return np.column_stack([np.asarray(bandwidths, dtype=float), totals / data.n])


def _n_bins(data: Dataset, w: float, support) -> int:
    if support is None:
        ranges = np.ptp(data.x, axis=0)
    else:
        s = np.atleast_2d(np.asarray(support, dtype=float))
        ranges = np.broadcast_to(s[:, 1] - s[:, 0], (data.d,))
    return int(np.prod([max(1, int(np.ceil(r / w - 1e-9))) for r in ranges]))


def tune_cops(
    data: Dataset,
    grid: TuningGrid | None = None,
    alpha: float = 0.1,
    y_grid: GridSpec | None = None,
    seed: int = 0,
    family: str = "gaussian",
    n_min: int = DEFAULT_N_MIN,
    support=None,
    x_grid=None,
    threshold: str = "alpha",
) -> tuple[TuningResult, PredictionBand]:
    """Pick ``(w, h_k)`` on one half of the data and fit COPS on the other.

    Ties in either argmin go to the smaller candidate.  Bins that are thin
    on the first half score the whole y-range.  The second half is
    partitioned afresh with the chosen width; its bins without a tuned
    bandwidth use the middle bandwidth candidate.
    """
    if grid is None:
        grid = default_tuning_grid(data)
    z1, z2 = split(data, seed)
    if y_grid is None:
        y_grid = GridSpec.around(data.y, 4.0 * max(grid.bandwidths), 512)
    full = y_grid.hi - y_grid.lo

    widths, dropped = [], []
    for w in grid.widths:
        if data.n >= 2 * _n_bins(data, w, support) * n_min:
            widths.append(w)
        else:
            dropped.append(w)
    if dropped:
        warnings.warn(f"dropping widths with too few points per bin: {dropped}", stacklevel=2)
    if not widths:
        raise TuningInfeasible("every candidate width leaves too few observations per bin")

    trace, per_bin, best_h = {}, {}, {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for w in widths:
            part = build_partition(z1, "equal_width", w, support=support)
            rows, hs = [], {}
            for s in part.assignments:
                if s.n_k == 0:
                    continue
                if s.n_k < n_min:
                    rows.append((s.bin_id, s.n_k, None, full))
                    continue
                mus = bin_set_measures(z1.y[s.member_indices], family, grid.bandwidths, alpha, y_grid, threshold)
                i = int(np.argmin(mus))  # first minimum: smallest h
                hs[s.bin_id] = grid.bandwidths[i]
                rows.append((s.bin_id, s.n_k, grid.bandwidths[i], float(mus[i])))
            per_bin[w] = rows
            best_h[w] = hs
            trace[w] = sum(n_k * mu for _, n_k, _, mu in rows) / z1.n

    w_hat = min(widths, key=lambda w: (trace[w], w))
    result = TuningResult(
        chosen_w=w_hat,
        chosen_h_per_bin=dict(best_h[w_hat]),
        objective_trace=trace,
        split_seed=seed,
        per_bin=per_bin,
        dropped_widths=tuple(dropped),
        n_first=z1.n,
    )

    part2 = build_partition(z2, "equal_width", w_hat, support=support)
    fallback = grid.bandwidths[len(grid.bandwidths) // 2]
    ky = {
        k: KernelSpec(family, result.chosen_h_per_bin.get(k, fallback))
        for k in range(part2.n_bins)
    }
    band = cops_band(z2, part2, ky, alpha, y_grid=y_grid, x_grid=x_grid, n_min=n_min, threshold=threshold)
    band.info["tuning"] = result
    band.info["bandwidths"] = [ky[k].bandwidth for k in range(part2.n_bins)]
    return result, band
