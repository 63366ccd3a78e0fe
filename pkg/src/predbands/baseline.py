"""Classical normal-theory prediction band from a straight-line fit."""

from __future__ import annotations

import numpy as np
from scipy import stats

from .density import Dataset
from .sets import IntervalUnion, PredictionBand

__all__ = ["linear_baseline"]


def linear_baseline(data: Dataset, alpha: float, x_grid=None) -> PredictionBand:
    """Ordinary least squares band ``yhat(x) +/- t * s * sqrt(1 + 1/n + (x - xbar)^2 / Sxx)``."""
    if data.d != 1:
        raise ValueError("the linear baseline needs a single predictor")
    if data.n < 3:
        raise ValueError("the linear baseline needs at least three observations")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    x, y = data.x[:, 0], data.y
    n = data.n
    xbar = x.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx <= 0:
        raise ValueError("predictor has zero variance")
    slope = float(((x - xbar) * (y - y.mean())).sum() / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    s = float(np.sqrt((resid ** 2).sum() / (n - 2)))
    tq = float(stats.t.ppf(1.0 - alpha / 2.0, n - 2))

    if x_grid is None:
        x_grid = np.linspace(x.min(), x.max(), 101)
    xg = np.asarray(x_grid, dtype=float).ravel()
    fit = intercept + slope * xg
    half = tq * s * np.sqrt(1.0 + 1.0 / n + (xg - xbar) ** 2 / sxx)
    sets = [IntervalUnion(((f - h, f + h),)) for f, h in zip(fit, half)]
    return PredictionBand(
        xg,
        sets,
        alpha,
        "linear_baseline",
        info={"intercept": intercept, "slope": slope, "s": s, "t": tq, "xbar": xbar, "sxx": sxx},
    )
