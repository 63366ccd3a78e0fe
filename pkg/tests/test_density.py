import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predbands.density import (
    Dataset,
    EmptyBin,
    LocalSample,
    augmented_joint_kde,
    augmented_local_kde,
    joint_kde,
    joint_kde_grid,
    local_kde,
)
from predbands.kernels import KernelSpec

G = KernelSpec("gaussian", 1.0)
U = KernelSpec("uniform", 1.0)


def test_single_point_at_mode():
    data = Dataset([[0.0]], [0.0])
    assert joint_kde(data, G, G, [0.0], 0.0) == pytest.approx(1 / (2 * np.pi))


def test_two_point_uniform_hand_value():
    # each term is K(0.25) * K(0.25) = 0.5 * 0.5, so the mean is 0.25
    data = Dataset([[0.0], [0.5]], [0.0, 0.5])
    assert joint_kde(data, U, U, [0.25], 0.25) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("c", [0.0, 0.3, 1.7, 4.0])
def test_symmetric_pair(c):
    data = Dataset([[-1.0], [1.0]], [0.0, 0.0])
    assert joint_kde(data, G, G, [c], 0.0) == pytest.approx(joint_kde(data, G, G, [-c], 0.0), abs=1e-15)


def test_per_axis_bandwidth_normaliser():
    data = Dataset([[0.0]], [0.0])
    val = joint_kde(data, KernelSpec("gaussian", 2.0), KernelSpec("gaussian", 0.5), [0.0], 0.0)
    assert val == pytest.approx(1 / (2 * np.pi) / (2.0 * 0.5))


def test_joint_kde_integrates_to_one(rng):
    data = Dataset(rng.standard_normal((30, 1)), rng.standard_normal(30))
    kx, ky = KernelSpec("gaussian", 0.4), KernelSpec("gaussian", 0.3)
    xs = np.linspace(data.x.min() - 8 * 0.4, data.x.max() + 8 * 0.4, 300)
    ys = np.linspace(data.y.min() - 8 * 0.3, data.y.max() + 8 * 0.3, 300)
    dens = joint_kde_grid(data, kx, ky, xs, ys)
    total = dens.sum() * (xs[1] - xs[0]) * (ys[1] - ys[0])
    assert total == pytest.approx(1.0, abs=1e-3)
    assert dens.min() >= 0


def test_grid_matches_pointwise(rng):
    data = Dataset(rng.standard_normal((20, 1)), rng.standard_normal(20))
    xs, ys = np.array([-0.5, 0.1, 1.2]), np.array([-1.0, 0.0, 0.4, 2.0])
    grid = joint_kde_grid(data, G, KernelSpec("gaussian", 0.5), xs, ys)
    for i, u in enumerate(xs):
        for j, v in enumerate(ys):
            assert grid[i, j] == pytest.approx(joint_kde(data, G, KernelSpec("gaussian", 0.5), [u], v), rel=1e-12)


def test_augmented_duplicate_row():
    data = Dataset([[0.3]], [-0.2])
    val = augmented_joint_kde(data, G, G, ([0.3], -0.2), [0.3], -0.2)
    assert val == pytest.approx(joint_kde(data, G, G, [0.3], -0.2), abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 15),
    st.integers(1, 2),
    st.integers(0, 2**31),
    st.sampled_from(["gaussian", "epanechnikov", "uniform", "biweight"]),
)
def test_augmentation_identities(n, d, seed, family):
    r = np.random.default_rng(seed)
    data = Dataset(r.standard_normal((n, d)), r.standard_normal(n))
    kx = [KernelSpec(family, b) for b in r.uniform(0.3, 2.0, d)]
    ky = KernelSpec(family, r.uniform(0.3, 2.0))
    cx, cy = r.standard_normal(d), r.standard_normal()
    u, v = r.standard_normal(d), r.standard_normal()
    aug = augmented_joint_kde(data, kx, ky, (cx, cy), u, v)
    assert aug == pytest.approx(joint_kde(data.append(cx, cy), kx, ky, u, v), abs=1e-12)
    hprod = np.prod([k.bandwidth for k in kx]) * ky.bandwidth
    term = np.prod([k.scaled(a - b) * k.bandwidth for k, a, b in zip(kx, u, cx)]) * ky.scaled(v - cy) * ky.bandwidth
    assert aug == pytest.approx(n / (n + 1) * joint_kde(data, kx, ky, u, v) + term / ((n + 1) * hprod), abs=1e-12)

    members = LocalSample(0, r.permutation(n)[: max(1, n // 2)])
    yk = data.y[members.member_indices]
    appended = Dataset(np.zeros((yk.size + 1, 1)), np.append(yk, cy))
    lhs = augmented_local_kde(data, members, ky, cy, v)
    rhs = local_kde(appended, LocalSample(0, np.arange(yk.size + 1)), ky, v)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs >= 0 and aug >= 0


def test_local_kde_values():
    data = Dataset([[0.0], [1.0]], [0.0, 1.0])
    assert local_kde(data, LocalSample(0, [0]), G, 0.0) == pytest.approx(0.398942280401)
    assert local_kde(data, LocalSample(0, [0, 1]), U, 0.5) == pytest.approx(0.5, abs=1e-15)
    e = KernelSpec("epanechnikov", 1.0)
    assert local_kde(data, LocalSample(0, [0, 1]), e, 1e6) == 0.0
    assert local_kde(data, LocalSample(0, [0, 1]), G, -1e6) == pytest.approx(0.0, abs=1e-12)


def test_augmented_local_hand_value():
    # n_k = 1, Y = {0}, candidate 0, v = 1: (1/2)K(1) + (1/2)K(1) = K(1)
    data = Dataset([[0.0]], [0.0])
    assert augmented_local_kde(data, LocalSample(0, [0]), G, 0.0, 1.0) == pytest.approx(0.241970724519, abs=1e-12)
    assert augmented_local_kde(data, LocalSample(0, [0]), G, 0.0, 0.0) == pytest.approx(local_kde(data, LocalSample(0, [0]), G, 0.0))


def test_local_kde_order_invariant(rng):
    data = Dataset(rng.standard_normal((30, 1)), rng.standard_normal(30))
    idx = np.arange(5, 25)
    v = np.linspace(-2, 2, 9)
    a = local_kde(data, LocalSample(0, idx), G, v)
    b = local_kde(data, LocalSample(0, rng.permutation(idx)), G, v)
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_errors():
    data = Dataset([[0.0], [1.0]], [0.0, 1.0])
    with pytest.raises(EmptyBin):
        local_kde(data, LocalSample(3, []), G, 0.0)
    with pytest.raises(ValueError):
        LocalSample(0, [1, 1])
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 1)), [])
    with pytest.raises(ValueError):
        Dataset([[np.nan]], [1.0])
    with pytest.raises(ValueError):
        Dataset([[0.0], [1.0]], [1.0])
