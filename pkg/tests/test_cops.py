import warnings

import numpy as np
import pytest

from predbands.conformal import full_conformal_set
from predbands.cops import (
    ThinBinWarning,
    build_partition,
    cops_band,
    local_conformity_rank,
    local_pvalues,
    local_sandwich_masks,
    local_slicer_band,
)
from predbands.density import Dataset, EmptyBin
from predbands.io import load_auto_mpg
from predbands.kernels import KernelSpec
from predbands.sets import GridSpec
from predbands.simulation import LW_SUPPORT, SyntheticModel, monte_carlo_coverage, sample

LW = SyntheticModel("lw_mixture")


def literal_rank(y_members, h, cand_y):
    """Rank written straight from the definition with a Gaussian kernel."""
    phi = lambda t: np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi)
    aug = list(y_members) + [cand_y]

    def dens(v):
        return sum(phi((v - q) / h) for q in aug) / (len(aug) * h)

    hits = sum(1 for yi in y_members if dens(yi) <= dens(cand_y))
    return (hits + 1) / (len(y_members) + 1)


def test_equal_width_lw():
    data = sample(LW, 1000, 0)
    part = build_partition(data, "equal_width", 0.3, support=LW_SUPPORT)
    assert part.n_bins == 10
    np.testing.assert_allclose(np.diff(part.edges[0]), 0.3)
    assert part.counts().sum() == 1000
    assigned = np.concatenate([s.member_indices for s in part.assignments])
    assert np.array_equal(np.sort(assigned), np.arange(1000))


def test_equal_count_car_data():
    data = load_auto_mpg()
    part = build_partition(data, "equal_count", 8)
    assert part.n_bins == 8
    counts = part.counts()
    assert counts.sum() == data.n
    # tied horsepower values cannot be split across bins
    ties = np.unique(data.x[:, 0], return_counts=True)[1].max()
    assert np.all(np.abs(counts - data.n / 8) <= ties)


def test_single_bin_when_width_exceeds_range():
    data = Dataset(np.arange(5.0)[:, None], np.zeros(5))
    with pytest.warns(UserWarning):
        part = build_partition(data, "equal_width", 10.0)
    assert part.n_bins == 1 and part.assignments[0].n_k == 5


def test_partition_errors():
    data = Dataset(np.zeros((4, 2)) + np.arange(4)[:, None], np.zeros(4))
    with pytest.raises(ValueError):
        build_partition(data, "equal_count", 2)
    with pytest.raises(ValueError):
        build_partition(data, "equal_width", 0.0)


def test_rank_examples():
    data = Dataset([[0.0]], [0.7])
    part = build_partition(data, "equal_width", 1.0)
    k = KernelSpec("gaussian", 1.0)
    assert local_conformity_rank(data, part, 0, k, ([0.0], 0.7)) == 1.0
    r = np.random.default_rng(0)
    y = r.standard_normal(40)
    data = Dataset(np.zeros((40, 1)), y)
    part = build_partition(data, "equal_width", 1.0)
    grid = np.linspace(-3, 3, 2001)
    mode = grid[np.argmax([np.exp(-0.5 * ((g - y) / 0.8) ** 2).sum() for g in grid])]
    assert local_conformity_rank(data, part, 0, KernelSpec("gaussian", 0.8), ([0.0], mode)) == 1.0


@pytest.mark.filterwarnings("ignore:bin width exceeds")
def test_rank_matches_literal_formula():
    r = np.random.default_rng(42)
    for _ in range(50):
        n = int(r.integers(2, 30))
        data = Dataset(r.uniform(0, 1, (n, 1)), r.standard_normal(n))
        part = build_partition(data, "equal_width", 0.5)
        k = int(r.integers(part.n_bins))
        if part.assignments[k].n_k == 0:
            continue
        h = float(r.uniform(0.2, 1.5))
        x = part.center(k)
        cy = float(r.normal(0, 2))
        yk = data.y[part.assignments[k].member_indices]
        expect = literal_rank(yk, h, cy)
        got = local_conformity_rank(data, part, k, KernelSpec("gaussian", h), (x, cy))
        assert got == pytest.approx(expect, abs=1e-12)
        assert local_pvalues(yk, KernelSpec("gaussian", h), [cy])[0] == pytest.approx(expect, abs=1e-12)


def test_rank_errors():
    data = Dataset([[0.0], [2.0]], [0.0, 1.0])
    part = build_partition(data, "equal_width", 0.5)
    with pytest.raises(EmptyBin):
        local_conformity_rank(data, part, 1, KernelSpec("gaussian"), ([0.6], 0.0))
    with pytest.raises(ValueError):
        local_conformity_rank(data, part, 0, KernelSpec("gaussian"), ([1.9], 0.0))


def test_independent_gaussian_widths():
    r = np.random.default_rng(3)
    data = Dataset(r.standard_normal((2000, 1)), r.standard_normal(2000))
    part = build_partition(data, "equal_count", 10)
    band = cops_band(data, part, KernelSpec("gaussian", 0.3), 0.1)
    for k, mask in band.info["bin_masks"].items():
        width = mask.sum() * band.info["y_grid"].spacing
        assert abs(width / 3.2897 - 1) <= 0.15, k


def test_bimodal_bins_on_mixture():
    data = sample(LW, 1000, 1)
    part = build_partition(data, "equal_width", 0.3, support=LW_SUPPORT)
    x_grid = [part.center(k) for k in range(part.n_bins)]
    band = cops_band(data, part, KernelSpec("gaussian", 0.3), 0.1, x_grid=x_grid)
    for k, xc in enumerate(x_grid):
        if xc[0] > 0.5:
            assert len(band.sets[k]) == 2, (k, band.sets[k])


@pytest.mark.parametrize("seed", range(10))
def test_sandwich_containment(seed):
    data = sample(LW, 200, seed)
    part = build_partition(data, "equal_width", 0.75, support=LW_SUPPORT)
    k = KernelSpec("gaussian", 0.4)
    yg = GridSpec.around(data.y, 1.6, 400)
    cops = cops_band(data, part, k, 0.1, yg)
    outer = local_slicer_band(data, part, k, 0.1, yg)
    inner = local_slicer_band(data, part, k, 0.1, yg, inner=True)
    for b in cops.info["bin_masks"]:
        c, o, i = cops.info["bin_masks"][b], outer.info["bin_masks"][b], inner.info["bin_masks"][b]
        assert not np.any(i & ~c)
        assert not np.any(c & ~o)


def test_near_flat_density_measure():
    r = np.random.default_rng(8)
    y = r.uniform(0, 1, 1000)
    yg = GridSpec(-0.5, 1.5, 801)
    _, outer = local_sandwich_masks(y, KernelSpec("gaussian", 0.05), 0.1, yg.points)
    data = Dataset(np.zeros((1000, 1)), y)
    band = local_slicer_band(data, build_partition(data, "equal_width", 1.0), KernelSpec("gaussian", 0.05), 0.1, yg)
    assert 0.85 <= band.sets[0].measure <= 1.0
    assert outer.sum() * yg.spacing == pytest.approx(band.sets[0].measure, abs=yg.spacing)


@pytest.mark.filterwarnings("ignore:bin width exceeds")
def test_single_bin_equals_global_conformal():
    r = np.random.default_rng(5)
    data = Dataset(r.uniform(0, 1, (60, 1)), r.standard_normal(60))
    part = build_partition(data, "equal_width", 5.0)
    k = KernelSpec("gaussian", 0.5)
    yg = GridSpec(-4, 4, 161)
    band = cops_band(data, part, k, 0.1, yg)
    np.testing.assert_array_equal(band.info["bin_masks"][0], full_conformal_set(data.y, k, 0.1, yg))


def test_monotone_in_alpha_and_permutation_invariant():
    data = sample(LW, 600, 2)
    part = build_partition(data, "equal_width", 0.3, support=LW_SUPPORT)
    k = KernelSpec("gaussian", 0.3)
    yg = GridSpec.around(data.y, 1.2, 300)
    measures = [cops_band(data, part, k, a, yg).measures() for a in (0.05, 0.1, 0.2, 0.3)]
    for a, b in zip(measures, measures[1:]):
        assert np.all(b <= a + 1e-12)
    perm = np.random.default_rng(0).permutation(data.n)
    shuffled = data.subset(perm)
    part2 = build_partition(shuffled, "equal_width", 0.3, support=LW_SUPPORT)
    assert cops_band(shuffled, part2, k, 0.1, yg).sets == cops_band(data, part, k, 0.1, yg).sets


def test_thin_bins_get_full_range():
    data = sample(LW, 100, 0)
    part = build_partition(data, "equal_width", 0.3, support=LW_SUPPORT)
    yg = GridSpec.around(data.y, 1.0, 200)
    with pytest.warns(ThinBinWarning):
        band = cops_band(data, part, KernelSpec("gaussian", 0.3), 0.1, yg, n_min=20)
    assert band.info["thin_bins"] == list(range(10))
    assert np.allclose(band.measures(), yg.hi - yg.lo)


def test_variants_agree_on_fine_partition():
    r = np.random.default_rng(0)
    x = r.uniform(-1, 1, 5000)
    data = Dataset(x[:, None], 0.5 * x + 0.3 * r.standard_normal(5000))
    part = build_partition(data, "equal_width", 0.1)
    yg = GridSpec(-2.5, 2.5, 101)
    xg = np.array([part.center(k) for k in range(part.n_bins)])
    ky, kx = KernelSpec("gaussian", 0.08), KernelSpec("gaussian", 0.03)
    base = cops_band(data, part, ky, 0.1, yg, xg)
    for variant in ("joint_density", "conditional_density"):
        other = cops_band(data, part, ky, 0.1, yg, xg, variant=variant, kx=kx)
        for a, b in zip(base.sets, other.sets):
            assert len(a) == len(b)
            for ia, ib in zip(a, b):
                assert np.max(np.abs(np.subtract(ia, ib))) <= 2 * yg.spacing + 1e-12


@pytest.mark.parametrize("variant", ["local_marginal", "joint_density", "conditional_density"])
def test_variants_locally_valid(variant):
    ref = build_partition(sample(LW, 10, 0), "equal_width", 0.3, support=LW_SUPPORT)

    def fit(d):
        part = build_partition(d, "equal_width", 0.3, support=LW_SUPPORT)
        yg = GridSpec.around(d.y, 1.2, 256)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return cops_band(d, part, KernelSpec("gaussian", 0.3), 0.1, yg, np.linspace(-1.5, 1.5, 61),
                             variant=variant, kx=KernelSpec("gaussian", 0.15))

    rep = monte_carlo_coverage(fit, LW, 500, 100, 1000, seed=7, locator=ref.locate, n_bins=10)
    for k, p, se in rep.per_bin:
        assert p >= 0.9 - 2 * se, (k, p, se)
    assert rep.marginal[0] >= 0.9 - 2 * rep.marginal[1]
