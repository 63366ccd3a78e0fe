"""
Choosing the bin width and bandwidths
=====================================

Half of the sample picks, for each candidate bin width, the bandwidth that
gives each bin its smallest set; the width with the smallest average set
wins.  The other half then builds the band, so the coverage guarantee is
unaffected by the search.
"""

import warnings

import numpy as np

from predbands import GridSpec, SyntheticModel, build_partition, sample, tune_cops
from predbands.simulation import LW_SUPPORT
from predbands.tuning import bandwidth_curve, default_tuning_grid

model = SyntheticModel("lw_mixture")
data = sample(model, 2000, seed=11)
grid = default_tuning_grid(data)
y_grid = GridSpec.around(data.y, 4 * max(grid.bandwidths), 512)

# Average set size against a common bandwidth with ten fixed bins
part = build_partition(data, "equal_width", 0.3, support=LW_SUPPORT)
curve = bandwidth_curve(data, part, np.geomspace(0.05, 2.0, 12), 0.1, y_grid)
print("     h   mean set measure")
for h, mu in curve:
    print(f"{h:6.3f}   {mu:.3f}")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    result, band = tune_cops(data, grid, 0.1, y_grid, seed=0, support=LW_SUPPORT)

print()
print(result.report())
print(f"final band built on {data.n - result.n_first} points, mean width {band.measures().mean():.3f}")
