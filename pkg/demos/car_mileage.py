"""
Fuel economy against horsepower
===============================

Mileage spreads out for low-powered cars and tightens for powerful ones.
A straight-line band has one width (up to the usual leverage factor) and
so is too wide on one end and too narrow on the other.  Eight bins with
equal counts and bandwidths 14 (horsepower) and 1.4 (mpg) give a band that
follows the spread.
"""

import numpy as np

from predbands import KernelSpec, build_partition, cops_band, linear_baseline
from predbands.conformal import default_y_grid
from predbands.io import fingerprint, load_auto_mpg

data = load_auto_mpg()
print(f"{data.n} cars ({data.meta['dropped']} dropped for missing horsepower), fingerprint {fingerprint(data)}")

part = build_partition(data, "equal_count", 8)
ky = KernelSpec("gaussian", 1.4)
x_grid = np.linspace(data.x.min(), data.x.max(), 41)
cops = cops_band(data, part, ky, 0.1, default_y_grid(data, ky), x_grid)
line = linear_baseline(data, 0.1, x_grid)

print("\n   hp   cops set              linear set")
for i in range(0, 41, 4):
    c = " ".join(f"[{a:.1f},{b:.1f}]" for a, b in cops.sets[i])
    (a, b), = line.sets[i].intervals
    print(f"{x_grid[i]:5.0f}   {c:20s}  [{a:.1f},{b:.1f}]")

for name, band in [("cops", cops), ("linear", line)]:
    print(f"{name}: in-sample coverage {band.covers(data.x, data.y).mean():.3f}")

print("\nbin   horsepower        n   width")
for k in range(part.n_bins):
    (lo, hi), = part.bounds(k)
    print(f"{k:3d}   [{lo:5.1f}, {hi:5.1f})  {part.assignments[k].n_k:4d}   {cops.info['bin_masks'][k].sum() * cops.info['y_grid'].spacing:.2f}")
