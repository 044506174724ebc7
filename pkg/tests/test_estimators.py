import math

import numpy as np
import pytest
from scipy import integrate, stats

from lsemp.estimators import (
    KERNELS,
    edf,
    get_kernel,
    kde,
    kernel_l2,
    localized_edf,
    localized_edf_batch,
    time_weights,
)


@pytest.fixture
def sample():
    return np.random.default_rng(0).standard_normal(997)


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_kernel_constants_against_quadrature(name):
    k = get_kernel(name)
    pts = [-0.5, 0.0, 0.5]
    mass, _ = integrate.quad(k, -0.5, 0.5, points=pts)
    l2, _ = integrate.quad(lambda u: k(u) ** 2, -0.5, 0.5, points=pts)
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert kernel_l2(name) == pytest.approx(l2, rel=1e-10)
    u = np.linspace(-0.5, 0.5, 20001)
    assert k(u).max() == pytest.approx(k.peak)
    if k.is_lipschitz:
        slopes = np.abs(np.diff(k(u))) / np.diff(u)
        assert slopes.max() == pytest.approx(k.lipschitz, rel=1e-3)
        assert k(0.5) == 0.0
    assert k(0.51) == 0.0


def test_unknown_kernel():
    with pytest.raises(ValueError, match="unknown kernel"):
        get_kernel("gauss")


def test_edf_matches_naive_count(sample):
    grid = np.concatenate([np.linspace(-3, 3, 31), sample[:5]])
    got = edf(sample, grid).values
    want = [np.mean(sample <= g) for g in grid]
    assert np.array_equal(got, want)


def test_localized_matches_naive_sum(sample):
    grid = np.linspace(-2, 2, 9)
    for kern in KERNELS:
        got = localized_edf(sample, grid, 0.4, 0.3, kern).values
        n = sample.size
        k = get_kernel(kern)
        want = [
            sum(k((i / n - 0.4) / 0.3) * (sample[i - 1] <= g) for i in range(1, n + 1)) / (n * 0.3)
            for g in grid
        ]
        assert np.allclose(got, want, rtol=1e-12, atol=1e-15)


def test_rectangular_full_window_is_plain_edf(sample):
    grid = np.linspace(-3, 3, 25)
    loc = localized_edf(sample, grid, 0.5, 1.0, "rectangular").values
    assert np.allclose(loc, edf(sample, grid).values, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", sorted(KERNELS))
@pytest.mark.parametrize("n", [100, 1_000, 10_000])
def test_time_weights_sum_to_one(name, n):
    # Riemann sum of a unit-mass kernel on spacing 1/(nh): interior error at most
    # Lip/(nh), plus up to one peak-height cell at each window edge
    h = 0.2
    k = get_kernel(name)
    lip = k.lipschitz if k.is_lipschitz else 0.0
    w = time_weights(n, 0.5, h, name)
    assert abs(w.sum() - 1.0) <= (lip + 2 * k.peak) / (n * h)


def test_time_weight_guards():
    with pytest.raises(ValueError, match="boundary"):
        time_weights(100, 0.05, 0.2, "epanechnikov")
    with pytest.raises(ValueError, match="empty time window"):
        time_weights(3, 0.5, 0.01, "epanechnikov")
    with pytest.raises(ValueError):
        time_weights(100, 0.5, 0.0, "epanechnikov")


def test_localized_edf_is_monotone_and_bounded(sample):
    grid = np.linspace(-4, 4, 200)
    res = localized_edf(sample, grid, 0.5, 0.25)
    assert np.all(np.diff(res.values) >= 0)
    assert res.values[0] == 0.0
    total = time_weights(sample.size, 0.5, 0.25, "epanechnikov").sum()
    assert res.values[-1] == pytest.approx(total)
    assert res.scaling == pytest.approx(math.sqrt(sample.size * 0.25))


def test_batch_matches_single_rows():
    paths = np.random.default_rng(1).standard_normal((4, 300))
    grid = np.linspace(-1, 1, 7)
    batch = localized_edf_batch(paths, grid, 0.6, 0.4, "triangular")
    for r in range(4):
        assert np.allclose(batch[r], localized_edf(paths[r], grid, 0.6, 0.4, "triangular").values)


def test_kde_matches_naive_double_sum(sample):
    xg = np.linspace(-2, 2, 11)
    vg = np.array([0.3, 0.5, 0.7])
    h1, h2 = 0.4, 0.5
    got = kde(sample, xg, vg, h1, h2, "triangular")
    k = get_kernel("triangular")
    n = sample.size
    t = np.arange(1, n + 1) / n
    for a, v in enumerate(vg):
        for j, x in enumerate(xg):
            want = np.sum(k((t - v) / h1) * k((sample - x) / h2)) / (n * h1 * h2)
            assert got[a, j] == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_kde_nonnegative_and_integrates_to_time_weight_mass(sample):
    h1, h2 = 0.3, 0.25
    xg = np.linspace(sample.min() - h2, sample.max() + h2, 400_001)
    g = kde(sample, xg, [0.5], h1, h2)[0]
    assert np.all(g >= 0)
    mass = integrate.trapezoid(g, xg)
    assert mass == pytest.approx(time_weights(sample.size, 0.5, h1, "epanechnikov").sum(), abs=1e-6)


def test_kde_iid_accuracy():
    # iid N(0,1): sd of the estimate is about sqrt(phi(x) |K|^2 / (n h1 h2)) <= 0.006,
    # bias about h2^2 * 0.05 * |phi''| / 2 <= 1e-3, so 0.02 leaves room for the sup over 41 points
    x = np.random.default_rng(7).standard_normal(100_000)
    xg = np.linspace(-2, 2, 41)
    g = kde(x, xg, [0.5], 0.5, 0.3)[0]
    assert np.max(np.abs(g - stats.norm.pdf(xg))) < 0.02


def test_kde_guards(sample):
    with pytest.raises(ValueError, match="sorted"):
        kde(sample, [1.0, 0.0], [0.5], 0.2, 0.2)
    with pytest.raises(ValueError, match="bandwidth"):
        kde(sample, [0.0], [0.5], 0.2, 0.0)
    with pytest.raises(ValueError, match="boundary"):
        kde(sample, [0.0], [0.95], 0.2, 0.2)
    with pytest.raises(ValueError, match="one-dimensional"):
        edf(np.ones((2, 2)), [0.0])
