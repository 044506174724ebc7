"""Coupled-path Monte Carlo estimates of the functional dependence measure."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .process import coupled_terminal

N_BOOT = 200


@dataclass
class DependenceProfile:
    nu: float
    lags: np.ndarray
    delta_hat: np.ndarray
    se: np.ndarray
    reps: int
    spec_digest: str = ""

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=int)
        self.delta_hat = np.asarray(self.delta_hat, dtype=float)
        self.se = np.asarray(self.se, dtype=float)
        if self.delta_hat.shape != self.lags.shape or self.se.shape != self.lags.shape:
            raise ValueError("lags, estimates and standard errors must align")
        if np.any(self.delta_hat < 0):
            raise ValueError("dependence estimates must be nonnegative")

    @classmethod
    def exact(cls, lags, values, nu=2.0):
        """Wrap known values (zero standard errors)."""
        values = np.asarray(values, dtype=float)
        return cls(nu, np.asarray(lags), values, np.zeros_like(values), 0, "exact")

    def at(self, k):
        hit = np.nonzero(self.lags == k)[0]
        if hit.size == 0:
            raise KeyError(f"lag {k} not in profile")
        return float(self.delta_hat[hit[0]])


@dataclass(frozen=True)
class DecayModel:
    """Fitted decay ``c k**-alpha`` (poly), ``c rho**k`` (exp) or ``independent``."""

    kind: str
    c: float = 0.0
    rate: float = 0.0
    fit_range: tuple = field(default=())
    fit_residual: float = 0.0

    def __post_init__(self):
        if self.kind == "poly":
            if not (self.c > 0 and self.rate > 1):
                raise ValueError(f"polynomial decay needs c > 0, alpha > 1 (got c={self.c}, alpha={self.rate})")
        elif self.kind == "exp":
            if not (self.c > 0 and 0 < self.rate < 1):
                raise ValueError(f"exponential decay needs c > 0, 0 < rho < 1 (got c={self.c}, rho={self.rate})")
        elif self.kind != "independent":
            raise ValueError(f"unknown decay kind {self.kind!r}")

    @property
    def alpha(self):
        return self.rate if self.kind == "poly" else math.nan

    @property
    def rho(self):
        return self.rate if self.kind == "exp" else math.nan

    def __call__(self, k):
        """Evaluate the model at lag(s) ``k``; the polynomial form uses ``max(k, 1)``."""
        k = np.asarray(k, dtype=float)
        if self.kind == "independent":
            return np.zeros_like(k)
        if self.kind == "poly":
            return self.c * np.maximum(k, 1.0) ** (-self.rate)
        return self.c * self.rate**k


def _evaluation_indices(spec, n):
    # sup over i: i = n, plus the index where the coefficient is largest
    # when that beats the value at n
    idx = [n]
    if spec.family != "iid" and spec.is_time_varying():
        u = np.arange(1, n + 1) / n
        s = spec.strength(u)
        i_star = int(np.argmax(s)) + 1
        if s[i_star - 1] > s[-1]:
            idx.append(i_star)
    return idx


def _bootstrap_se(w, nu, seed, n_boot=N_BOOT):
    """Bootstrap SE of ``mean(w)**(1/nu)`` over replicate-level values."""
    if np.all(w == 0):
        return 0.0
    gen = rng.stream(seed, rng.BOOTSTRAP, 0)
    m = w.size
    est = np.empty(n_boot)
    for b in range(n_boot):
        idx = gen.integers(0, m, m)
        est[b] = np.mean(w[idx]) ** (1.0 / nu)
    return float(np.std(est, ddof=1))


def _terminal_powers(spec, ks, nu, reps, seed, burnin=None):
    """Replicate-level ``|X_i - X_i*|**nu``: one (lags x reps) array per index."""
    out = []
    for i in _evaluation_indices(spec, spec.n):
        x, xs = coupled_terminal(spec, list(ks), reps, seed, index=i, burnin=burnin)
        out.append(np.abs(x[None, :] - xs) ** nu)
    return out


def _pick(ws, nu, seed):
    best = max(ws, key=lambda w: float(np.mean(w)))
    return float(np.mean(best)) ** (1.0 / nu), _bootstrap_se(best, nu, seed)


def estimate_delta(spec, k, nu=2.0, reps=10_000, seed=0, burnin=None):
    """``(delta_hat, se)`` for the dependence measure at lag ``k``.

    ``delta_hat = mean(|X_n - X_n*|**nu) ** (1/nu)``; for time-varying models
    the index with the largest coefficient is also evaluated and the larger
    estimate reported.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    if reps < 100:
        raise ValueError("estimate_delta needs reps >= 100")
    spec.innovation.check_moment(nu)
    ws = _terminal_powers(spec, [k], nu, reps, seed, burnin)
    return _pick([w[0] for w in ws], nu, seed)


def delta_profile(spec, kmax, nu=2.0, reps=10_000, seed=0, burnin=None):
    """Raw estimates for lags ``0..kmax`` on common random numbers."""
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    if reps < 100:
        raise ValueError("delta_profile needs reps >= 100")
    if nu <= 0:
        raise ValueError("nu must be positive")
    spec.innovation.check_moment(nu)
    lags = np.arange(kmax + 1)
    est = np.empty(kmax + 1)
    se = np.empty(kmax + 1)
    ws = _terminal_powers(spec, lags, nu, reps, seed, burnin)
    for k in lags:
        est[k], se[k] = _pick([w[k] for w in ws], nu, seed)
    return DependenceProfile(nu, lags, est, se, reps, spec.digest())


def fit_decay(profile, kind="poly", fit_range=None, noise_floor=3.0):
    """Least-squares fit of ``log delta`` against ``log k`` (poly) or ``k`` (exp).

    Lags below 1, zero estimates and estimates under ``noise_floor`` standard
    errors are dropped. An all-zero profile gives the ``independent`` model.
    """
    if kind not in ("poly", "exp"):
        raise ValueError(f"unknown decay kind {kind!r}")
    lags = profile.lags
    d = profile.delta_hat
    keep = (lags >= 1) & (d > 0) & (d >= noise_floor * profile.se)
    if fit_range is not None:
        lo, hi = fit_range
        keep &= (lags >= lo) & (lags <= hi)
    if np.all(d[lags >= 1] == 0):
        return DecayModel("independent", fit_range=tuple(int(k) for k in lags[lags >= 1]))
    if keep.sum() < 4:
        raise ValueError(f"need at least 4 usable lags for a decay fit, have {int(keep.sum())}")
    k = lags[keep].astype(float)
    y = np.log(d[keep])
    x = np.log(k) if kind == "poly" else k
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    c = float(np.exp(coef[0]))
    rate = float(-coef[1]) if kind == "poly" else float(np.exp(coef[1]))
    worst = float(np.max(np.abs(resid)))
    try:
        return DecayModel(kind, c, rate, tuple(int(v) for v in k), worst)
    except ValueError as exc:
        raise ValueError(f"{exc}; max log-residual {worst:.3g}") from None


def ar1_gaussian_delta(a, k, nu=2.0, scale=1.0):
    """Closed form for a constant-coefficient Gaussian AR(1)."""
    # eps - eps* ~ N(0, 2 scale^2)
    sd = math.sqrt(2.0) * scale
    m = 2 ** (nu / 2) * math.gamma((nu + 1) / 2) / math.sqrt(math.pi)
    return abs(a) ** k * sd * m ** (1.0 / nu)


__all__ = [
    "DependenceProfile",
    "DecayModel",
    "estimate_delta",
    "delta_profile",
    "fit_decay",
    "ar1_gaussian_delta",
]
