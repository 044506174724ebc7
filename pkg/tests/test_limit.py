import math

import numpy as np
import pytest
from scipy import stats

from lsemp.limit import (
    bartlett_longrun,
    bartlett_weights,
    ks_distance,
    longrun_cov_indicator,
    psd_factor,
    sample_gaussian_limit,
)
from lsemp.process import ProcessSpec, simulate_stationary


def iid_indicator_cov(grid):
    # 1{X <= x} for iid X: Phi(min(x, y)) - Phi(x) Phi(y)
    p = stats.norm.cdf(grid)
    return np.minimum.outer(p, p) - np.outer(p, p)


def direct_edf_sup(grid, n, R, seed):
    # multinomial cell counts give the exact law of the EDF on the grid for iid data
    p = stats.norm.cdf(grid)
    cells = np.diff(np.concatenate([[0.0], p, [1.0]]))
    counts = np.random.default_rng(seed).multinomial(n, cells, size=R)
    F = np.cumsum(counts, axis=1)[:, :-1] / n
    return np.max(np.abs(math.sqrt(n) * (F - p)), axis=1)


def ar1_autocov_at_zero(a, k):
    # Cov(1{X_0 <= 0}, 1{X_k <= 0}) for a Gaussian AR(1): arcsin(a^|k|) / (2 pi)
    return np.arcsin(a ** np.abs(k)) / (2 * math.pi)


def test_iid_longrun_cov_matches_closed_form():
    grid = np.array([0.0, 1.0])
    cov = longrun_cov_indicator(ProcessSpec.iid(), 0.5, grid, pathlen=200_000, seed=3)
    want = iid_indicator_cov(grid)
    assert np.all(np.abs(cov.matrix - want) <= 3 * cov.se_matrix)
    assert want[0, 0] == 0.25


def test_ar1_longrun_cov_matches_arcsin_series():
    a, L, N = 0.5, 200, 1_000_000
    cov = longrun_cov_indicator(ProcessSpec.tvar1(str(a)), 0.5, [0.0], pathlen=N, lagmax=L, seed=4)
    k = np.arange(-L, L + 1)
    # Bartlett-weighted target removes the lag-window bias from the comparison
    target = float(np.sum(bartlett_weights(L) * ar1_autocov_at_zero(a, k)))
    full = 0.25 + sum(math.asin(a**j) for j in range(1, 200)) / math.pi
    assert full == pytest.approx(0.57679, abs=1e-5)
    assert abs(cov.matrix[0, 0] - target) <= 3 * cov.se_matrix[0, 0]
    assert abs(cov.matrix[0, 0] - full) <= 3 * cov.se_matrix[0, 0]


def test_lag_window_stability():
    spec = ProcessSpec.tvar1("0.5")
    vals = [
        longrun_cov_indicator(spec, 0.5, [0.0], pathlen=1_000_000, lagmax=L, seed=5)
        for L in (50, 100, 200)
    ]
    se = vals[-1].se_matrix[0, 0]
    for c in vals[:-1]:
        assert abs(c.matrix[0, 0] - vals[-1].matrix[0, 0]) <= 2 * se


def test_agrees_with_batch_means():
    spec = ProcessSpec.tvar1("0.5")
    N, b = 1_000_000, 1000
    cov = longrun_cov_indicator(spec, 0.5, [0.0], pathlen=N, lagmax=100, seed=6)
    path = simulate_stationary(spec, 0.5, n=N, seed=60).values[0]
    means = (path <= 0.0).reshape(-1, b).mean(axis=1)
    bm = b * means.var(ddof=1)
    bm_se = bm * math.sqrt(2 / (N // b - 1))
    assert abs(cov.matrix[0, 0] - bm) <= 3 * math.hypot(bm_se, cov.se_matrix[0, 0])


def test_bartlett_matches_naive_autocovariance_sum():
    x = np.random.default_rng(0).standard_normal((300, 2))
    x[:, 1] += 0.5 * np.roll(x[:, 0], 1)
    L = 7
    c = x - x.mean(axis=0)
    N = len(c)
    want = np.zeros((2, 2))
    for k in range(-L, L + 1):
        w = 1 - abs(k) / (L + 1)
        if k >= 0:
            G = c[: N - k].T @ c[k:] / N
        else:
            G = c[-k:].T @ c[: N + k] / N
        want += w * G
    want = 0.5 * (want + want.T)
    assert np.allclose(bartlett_longrun(x, L), want, rtol=1e-12, atol=1e-14)


def test_kernel_factor_scales_exactly():
    spec = ProcessSpec.tvar1("0.3")
    plain = longrun_cov_indicator(spec, 0.5, [-0.5, 0.5], pathlen=20_000, seed=1)
    local = longrun_cov_indicator(spec, 0.5, [-0.5, 0.5], pathlen=20_000, seed=1, kernel="epanechnikov")
    assert np.allclose(local.matrix, 1.2 * plain.matrix, rtol=1e-14)
    assert local.kernel_factor == 1.2


def test_pathlen_guard():
    with pytest.raises(ValueError, match="50"):
        longrun_cov_indicator(ProcessSpec.iid(), 0.5, [0.0], pathlen=1000, lagmax=100)


def test_identity_draws_have_identity_covariance():
    s = sample_gaussian_limit(np.eye(3), 100_000, seed=2)
    emp = np.cov(s.draws.T)
    assert np.all(np.abs(np.diag(emp) - 1) < 0.05)
    assert np.all(np.abs(emp[~np.eye(3, dtype=bool)]) < 0.05)
    assert s.chol_jitter == 0.0


def test_rank_one_draws_are_equal_across_coordinates():
    s = sample_gaussian_limit(np.full((4, 4), 0.3), 1000, seed=3)
    assert np.all(s.draws == s.draws[:, :1])
    assert np.allclose(s.draws[:, 0].var(), 0.3, rtol=0.15)


def test_draws_are_reproducible():
    a = sample_gaussian_limit(np.eye(2), 50, seed=4).draws
    b = sample_gaussian_limit(np.eye(2), 50, seed=4).draws
    assert np.array_equal(a, b)


def test_limit_sup_matches_finite_sample_sup():
    grid = np.array([-1.0, -0.3, 0.3, 1.0])
    R = 4000
    direct = direct_edf_sup(grid, 100_000, R, seed=9)
    limit = sample_gaussian_limit(iid_indicator_cov(grid), 20_000, seed=5).sup_stats
    # two-sample KS critical value at level 1e-3
    crit = 1.95 * math.sqrt(1 / R + 1 / 20_000)
    assert ks_distance(direct, limit) < crit


def test_ks_matches_scipy():
    r = np.random.default_rng(1)
    for a, b in [(r.normal(size=50), r.normal(0.3, size=70)), (r.integers(0, 5, 40), r.integers(0, 5, 60))]:
        assert ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-15)


def test_ks_edge_cases():
    assert ks_distance([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert ks_distance([0.0], [1.0]) == 1.0
    with pytest.raises(ValueError):
        ks_distance([], [1.0])


def test_psd_factor_guards_and_jitter():
    with pytest.raises(ValueError, match="positive semidefinite"):
        psd_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError, match="symmetric"):
        psd_factor(np.array([[1.0, 0.1], [0.0, 1.0]]))
    nearly = np.array([[1.0, 1.0], [1.0, 1.0]]) - 1e-11 * np.eye(2)
    F, jitter = psd_factor(nearly)
    assert 0 < jitter <= 1e-8
    assert np.allclose(F @ F.T, nearly + jitter * np.eye(2), atol=1e-14)
    F, jitter = psd_factor(np.zeros((2, 2)))
    assert jitter == 0.0 and not F.any()


def test_sup_mean_matches_direct_edf_simulation():
    grid = np.linspace(-1.5, 1.5, 5)
    R = 4000
    direct = direct_edf_sup(grid, 100_000, R, seed=12)
    limit = sample_gaussian_limit(iid_indicator_cov(grid), 20_000, seed=13).sup_stats
    se = math.hypot(direct.std(ddof=1) / math.sqrt(R), limit.std(ddof=1) / math.sqrt(limit.size))
    assert abs(direct.mean() - limit.mean()) < 3 * se


def test_ks_same_law_below_critical_value():
    a = np.random.default_rng(20).standard_normal(10_000)
    b = np.random.default_rng(21).standard_normal(10_000)
    assert ks_distance(a, b) < 1.63 * math.sqrt(2 / 10_000)
