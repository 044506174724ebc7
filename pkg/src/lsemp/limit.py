"""Long-run covariance of indicator vectors and sampling from the Gaussian limit."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack
from scipy.ndimage import convolve1d

from . import rng
from .estimators import get_kernel
from .process import simulate_stationary

JITTER_START = 1e-12
JITTER_CAP = 1e-8
PSD_SLACK = 1e-10
GLOBAL_U_POINTS = 64


@dataclass
class CovarianceEstimate:
    xgrid: np.ndarray
    matrix: np.ndarray
    lag_window: tuple
    kernel_factor: float
    pathlen: int
    se_matrix: np.ndarray
    min_eig: float = 0.0
    tv_proxy: np.ndarray = field(default=None)

    def scaled(self, factor):
        return CovarianceEstimate(
            self.xgrid, self.matrix * factor, self.lag_window, self.kernel_factor * factor,
            self.pathlen, self.se_matrix * abs(factor), self.min_eig * factor, self.tv_proxy,
        )


def bartlett_weights(lagmax):
    """``1 - |k|/(L+1)`` for ``k = -L..L``."""
    k = np.arange(-lagmax, lagmax + 1)
    return 1.0 - np.abs(k) / (lagmax + 1.0)


def bartlett_longrun(series, lagmax):
    """Bartlett lag-window long-run covariance of the columns of ``series``.

    Equals ``sum_{|k| <= L} w_k Gamma_k`` with ``Gamma_k = (1/N) sum_t c_t c_{t+k}'``
    on the mean-centred series, symmetrized.
    """
    c = np.asarray(series, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    c = c - c.mean(axis=0)
    N = c.shape[0]
    smoothed = convolve1d(c, bartlett_weights(lagmax), axis=0, mode="constant", cval=0.0)
    S = c.T @ smoothed / N
    return 0.5 * (S + S.T)


def _bartlett_se(S, lagmax, N):
    d = np.diag(S)
    return np.sqrt(np.maximum(2.0 / 3.0 * lagmax / N * (np.outer(d, d) + S**2), 0.0))


def longrun_cov_indicator(spec, v, xgrid, pathlen=100_000, lagmax=None, seed=0, kernel=None, burnin=None):
    """Long-run covariance of ``(1{X(v)_i <= x})_x`` for the frozen process at ``v``.

    A kernel multiplies the matrix by ``int K^2`` (local case).
    """
    grid = np.asarray(xgrid, dtype=float)
    if lagmax is None:
        lagmax = math.ceil(pathlen ** (1.0 / 3.0))
    if lagmax < 0 or pathlen < 50 * max(lagmax, 1):
        raise ValueError(f"pathlen={pathlen} too short for lagmax={lagmax}; need pathlen >= 50*lagmax")
    path = simulate_stationary(spec, v, n=pathlen, seed=seed, burnin=burnin, domain=rng.LONGRUN).values[0]
    S = bartlett_longrun((path[:, None] <= grid[None, :]).astype(float), lagmax)
    se = _bartlett_se(S, lagmax, pathlen)
    factor = 1.0
    if kernel is not None:
        factor = get_kernel(kernel).l2norm
    min_eig = float(np.linalg.eigvalsh(S)[0]) if S.size else 0.0
    return CovarianceEstimate(grid, S * factor, ("bartlett", lagmax), factor, pathlen, se * factor, min_eig * factor)


def longrun_cov_global(spec, xgrid, pathlen=100_000, lagmax=None, seed=0, kernel=None, u_points=GLOBAL_U_POINTS):
    """Average of the frozen long-run covariances over a midpoint ``u``-grid.

    ``tv_proxy`` holds the total variation of each diagonal entry along the
    grid; it is reported, not tested.
    """
    us = (np.arange(u_points) + 0.5) / u_points
    parts = [
        longrun_cov_indicator(spec, u, xgrid, pathlen, lagmax, rng.sub_seed(seed, j), kernel)
        for j, u in enumerate(us)
    ]
    mats = np.stack([p.matrix for p in parts])
    S = mats.mean(axis=0)
    se = np.sqrt(np.mean(np.stack([p.se_matrix for p in parts]) ** 2, axis=0) / u_points)
    diag = np.stack([np.diag(m) for m in mats])
    tv = np.sum(np.abs(np.diff(diag, axis=0)), axis=0)
    first = parts[0]
    return CovarianceEstimate(
        first.xgrid, 0.5 * (S + S.T), first.lag_window, first.kernel_factor, pathlen, se,
        float(np.linalg.eigvalsh(S)[0]), tv,
    )


@dataclass
class GaussianLimitSample:
    draws: np.ndarray
    chol_jitter: float
    sup_stats: np.ndarray


def psd_factor(matrix):
    """Factor ``F`` with ``F F' = matrix + jitter I``; returns ``(F, jitter)``.

    Jitter escalates by 10 from 1e-12 to 1e-8 times ``trace/dim`` until the
    shifted matrix is positive semidefinite. The factorization is a pivoted
    Cholesky, so rank-deficient matrices are handled exactly.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.array_equal(A, A.T):
        raise ValueError("covariance matrix is not symmetric")
    dim = A.shape[0]
    scale = max(float(np.trace(A)) / dim, 0.0)
    if scale == 0.0:
        if np.any(A != 0):
            raise ValueError("covariance matrix has nonpositive trace")
        return np.zeros_like(A), 0.0
    lam_min = float(np.linalg.eigvalsh(A)[0])
    jitter = 0.0
    level = JITTER_START
    while lam_min + jitter < -1e-14 * scale:
        if level > JITTER_CAP * (1 + 1e-9):
            raise ValueError(
                f"covariance is not positive semidefinite (min eigenvalue {lam_min:.3g}, "
                f"jitter cap {JITTER_CAP:g} x trace/dim)"
            )
        jitter = level * scale
        level *= 10.0
    B = A + jitter * np.eye(dim)
    c, piv, rank, info = lapack.dpstrf(B, lower=1, tol=-1.0)
    if info < 0:
        raise ValueError("pivoted Cholesky failed")
    L = np.tril(c)
    L[:, rank:] = 0.0
    F = np.empty_like(L)
    F[piv - 1] = L
    return F, jitter


def sample_gaussian_limit(cov, M, seed=0):
    """``M`` centred Gaussian draws with the given covariance on its grid."""
    if M < 1:
        raise ValueError("M must be at least 1")
    matrix = cov.matrix if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=float)
    F, jitter = psd_factor(matrix)
    z = rng.stream(seed, rng.LIMIT, 0).standard_normal((M, F.shape[1]))
    draws = z @ F.T
    return GaussianLimitSample(draws, jitter, np.max(np.abs(draws), axis=1))


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic ``sup_x |F_a(x) - F_b(x)|``."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))
