"""Empirical distribution functions, plain and localized in time, and the
localized kernel density estimator. Kernels live on [-1/2, 1/2]."""

import math
from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class KernelSpec:
    name: str
    code: int
    lipschitz: float
    l2norm: float
    peak: float

    @property
    def is_lipschitz(self):
        return math.isfinite(self.lipschitz)

    def __call__(self, u):
        return _kernel_values(np.asarray(u, dtype=float), self.code)


KERNELS = {
    "rectangular": KernelSpec("rectangular", 0, math.inf, 1.0, 1.0),
    "triangular": KernelSpec("triangular", 1, 4.0, 4.0 / 3.0, 2.0),
    "epanechnikov": KernelSpec("epanechnikov", 2, 6.0, 1.2, 1.5),
}


def get_kernel(kernel):
    if isinstance(kernel, KernelSpec):
        return kernel
    try:
        return KERNELS[str(kernel).lower()]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None


@numba.njit(cache=True, nogil=True)
def _kern(u, code):
    a = abs(u)
    if a > 0.5:
        return 0.0
    if code == 0:
        return 1.0
    if code == 1:
        return 4.0 * (0.5 - a)
    return 1.5 * (1.0 - 4.0 * u * u)


def _kernel_values(u, code):
    a = np.abs(u)
    inside = a <= 0.5
    if code == 0:
        out = inside.astype(float)
    elif code == 1:
        out = np.where(inside, 4.0 * (0.5 - a), 0.0)
    else:
        out = np.where(inside, 1.5 * (1.0 - 4.0 * u * u), 0.0)
    return out


def kernel_l2(kernel):
    """``int K^2``, closed form for the built-in kernels."""
    return get_kernel(kernel).l2norm


@dataclass
class EmpiricalProcessSample:
    xgrid: np.ndarray
    values: np.ndarray
    n: int
    h: object = None
    v: object = None
    scaling: float = 1.0


def _check_path(path):
    x = np.asarray(path, dtype=float)
    if x.ndim != 1:
        raise ValueError("path must be one-dimensional")
    if x.size == 0:
        raise ValueError("empty path")
    return x


def edf(path, xgrid):
    """``(1/n) #{i : X_i <= x}`` by binary search on the sorted sample."""
    x = _check_path(path)
    grid = np.asarray(xgrid, dtype=float)
    counts = np.searchsorted(np.sort(x), grid, side="right")
    return EmpiricalProcessSample(grid, counts / x.size, x.size, scaling=math.sqrt(x.size))


def time_weights(n, v, h, kernel):
    """``K((i/n - v)/h) / (n h)`` for ``i = 1..n``; errors outside ``[h/2, 1 - h/2]``."""
    k = get_kernel(kernel)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if not 0 < v < 1:
        raise ValueError("v must lie in (0, 1)")
    if v < h / 2 - 1e-12 or v > 1 - h / 2 + 1e-12:
        raise ValueError(f"v={v} is within h/2={h / 2} of the boundary; no boundary correction is applied")
    w = k((np.arange(1, n + 1) / n - v) / h) / (n * h)
    if not np.any(w != 0):
        raise ValueError(f"empty time window [{v - h / 2}, {v + h / 2}] for n={n}")
    return w


def localized_edf(path, xgrid, v, h, kernel="epanechnikov"):
    """``(1/(nh)) sum_i K((i/n - v)/h) 1{X_i <= x}`` on the grid."""
    x = _check_path(path)
    n = x.size
    w = time_weights(n, v, h, kernel)
    keep = w != 0
    xs, ws = x[keep], w[keep]
    order = np.argsort(xs, kind="stable")
    cum = np.concatenate([[0.0], np.cumsum(ws[order])])
    grid = np.asarray(xgrid, dtype=float)
    idx = np.searchsorted(xs[order], grid, side="right")
    return EmpiricalProcessSample(grid, cum[idx], n, h=h, v=v, scaling=math.sqrt(n * h))


def localized_edf_batch(paths, xgrid, v, h, kernel="epanechnikov"):
    """Localized EDF for each row of ``paths``; shape ``(reps, len(xgrid))``."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    n = paths.shape[1]
    w = time_weights(n, v, h, kernel)
    keep = w != 0
    grid = np.asarray(xgrid, dtype=float)
    ind = paths[:, keep, None] <= grid[None, None, :]
    return np.einsum("rjx,j->rx", ind, w[keep])


@numba.njit(cache=True, nogil=True)
def _kde_grid(x, xgrid, vgrid, h1, h2, code):
    n = x.shape[0]
    out = np.zeros((vgrid.shape[0], xgrid.shape[0]))
    for a in range(vgrid.shape[0]):
        v = vgrid[a]
        lo = max(1, int(math.floor((v - h1 / 2) * n)))
        hi = min(n, int(math.ceil((v + h1 / 2) * n)))
        for i in range(lo, hi + 1):
            wt = _kern((i / n - v) / h1, code)
            if wt == 0.0:
                continue
            wt = wt / (n * h1 * h2)
            xi = x[i - 1]
            j0 = np.searchsorted(xgrid, xi - h2 / 2)
            j1 = np.searchsorted(xgrid, xi + h2 / 2, side="right")
            for j in range(j0, j1):
                out[a, j] += wt * _kern((xi - xgrid[j]) / h2, code)
    return out


def kde(path, xgrid, vgrid, h1, h2, kernel="epanechnikov"):
    """``(1/n) sum_i K_h1(i/n - v) K_h2(X_i - x)`` as a ``(len(vgrid), len(xgrid))`` matrix.

    Exact sums over the observations whose time and space windows touch each
    grid point. ``xgrid`` must be sorted.
    """
    x = _check_path(path)
    k = get_kernel(kernel)
    if not (h1 > 0 and h2 > 0):
        raise ValueError("bandwidths must be positive")
    grid = np.asarray(xgrid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("xgrid must be sorted")
    vg = np.atleast_1d(np.asarray(vgrid, dtype=float))
    for v in vg:
        time_weights(x.size, v, h1, k)
    return _kde_grid(x, grid, vg, float(h1), float(h2), k.code)
