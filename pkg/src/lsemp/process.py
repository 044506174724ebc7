"""Locally stationary Bernoulli-shift generators.

A process is described by a :class:`ProcessSpec`. Innovations are indexed by
absolute time ``t``: ``eps_1 .. eps_n`` come from a forward stream and
``eps_0, eps_-1, .., eps_-B`` from a separate past stream, so changing the
burn-in only appends further past and never moves the recent innovations.
Coefficients are evaluated at rescaled time ``u = t/n``, clamped to ``[0, 1]``.
"""

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.signal import lfilter, oaconvolve

from . import rng

FAMILIES = ("iid", "tvar1", "tvma", "tvarch1")
INNOVATIONS = ("gaussian", "student_t", "uniform")
COEF_KINDS = {"constant": 1, "affine": 2, "sinusoidal": 4}

U_GRID = np.linspace(0.0, 1.0, 1024)
BLOCK = 2048
ARCH_FLOOR = 1e-12
# longer MA filters switch from direct summation to FFT convolution
DIRECT_TAPS = 1024


def n_threads():
    """Thread count from ``LSEMP_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("LSEMP_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class CoefFunction:
    """A named coefficient curve ``u -> value`` on ``[0, 1]``.

    ``constant: c``, ``affine: a + b u``,
    ``sinusoidal: a + b sin(2 pi f u + phase)``.
    """

    kind: str = "constant"
    params: tuple = (0.0,)

    def __post_init__(self):
        if self.kind not in COEF_KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        need = COEF_KINDS[self.kind]
        if self.kind == "sinusoidal" and len(params) == 2:
            params = params + (1.0, 0.0)
        if len(params) != need:
            raise ValueError(f"{self.kind} takes {need} parameters, got {len(params)}")
        object.__setattr__(self, "params", params)

    @classmethod
    def parse(cls, text):
        """Parse ``"affine:0.2,0.6"``; a bare number means a constant."""
        text = str(text).strip()
        if ":" not in text:
            return cls("constant", (float(text),))
        kind, _, rest = text.partition(":")
        return cls(kind.strip(), tuple(float(v) for v in rest.split(",") if v.strip()))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(u, p[0])
        if self.kind == "affine":
            return p[0] + p[1] * u
        return p[0] + p[1] * np.sin(2.0 * np.pi * p[2] * u + p[3])

    def is_constant(self):
        return self.kind == "constant" or self.params[1] == 0.0

    def text(self):
        return f"{self.kind}:" + ",".join(repr(p) for p in self.params)


@dataclass(frozen=True)
class Innovation:
    kind: str = "gaussian"
    df: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in INNOVATIONS:
            raise ValueError(f"unknown innovation {self.kind!r}")
        if self.kind == "student_t" and self.df <= 0:
            raise ValueError("student_t innovations need df > 0")
        if self.scale <= 0:
            raise ValueError("innovation scale must be positive")

    def draw(self, gen, size):
        if self.kind == "gaussian":
            z = gen.standard_normal(size)
        elif self.kind == "student_t":
            z = gen.standard_t(self.df, size)
        else:
            z = gen.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
        if self.scale != 1.0:
            z = z * self.scale
        return z

    def has_moment(self, nu):
        return self.kind != "student_t" or self.df > nu

    def check_moment(self, nu):
        if not self.has_moment(nu):
            raise ValueError(
                f"student_t innovations with df={self.df} have no finite moment of order {nu}"
            )

    def second_moment(self):
        if self.kind == "student_t":
            return math.inf if self.df <= 2 else self.scale**2 * self.df / (self.df - 2)
        return self.scale**2

    def abs_moment(self, nu):
        """``E|eps|^nu``."""
        self.check_moment(nu)
        if self.kind == "gaussian":
            m = 2 ** (nu / 2) * math.gamma((nu + 1) / 2) / math.sqrt(math.pi)
        elif self.kind == "uniform":
            m = math.sqrt(3.0) ** nu / (nu + 1)
        else:
            df = self.df
            m = (
                df ** (nu / 2)
                * math.gamma((nu + 1) / 2)
                * math.gamma((df - nu) / 2)
                / (math.sqrt(math.pi) * math.gamma(df / 2))
            )
        return self.scale**nu * m

    def text(self):
        if self.kind == "student_t":
            return f"student_t:{self.df!r}"
        return self.kind


@dataclass(frozen=True)
class ProcessSpec:
    """A locally stationary Bernoulli-shift model.

    ``coef`` is ``a(u)`` for tvar1 and the scale ``c(u)`` of the MA weights
    ``b_j(u) = c(u) w_j`` for tvma, with ``w_j = (j+1)**-ma_rate`` (poly) or
    ``ma_rate**j`` (geom). tvarch1 uses ``arch0`` and ``arch1``:
    ``X_t = sqrt(a0(u) + a1(u) X_{t-1}^2) eps_t``.
    """

    family: str = "iid"
    n: int = 1000
    innovation: Innovation = field(default_factory=Innovation)
    coef: CoefFunction = field(default_factory=CoefFunction)
    ma_decay: str = "poly"
    ma_rate: float = 3.0
    arch0: CoefFunction = field(default_factory=lambda: CoefFunction("constant", (1.0,)))
    arch1: CoefFunction = field(default_factory=lambda: CoefFunction("constant", (0.0,)))

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.family == "tvar1":
            abar = float(np.max(np.abs(self.coef(U_GRID))))
            if abar >= 1.0:
                raise ValueError(f"tvar1 coefficient is not contractive: sup|a(u)| = {abar:.6g}")
        elif self.family == "tvma":
            if self.ma_decay == "poly":
                if self.ma_rate <= 1.0:
                    raise ValueError("tvma poly weights need exponent > 1 for summability")
            elif self.ma_decay == "geom":
                if not 0.0 <= self.ma_rate < 1.0:
                    raise ValueError("tvma geom weights need rate in [0, 1)")
            else:
                raise ValueError(f"unknown MA decay {self.ma_decay!r}")
        elif self.family == "tvarch1":
            a0 = self.arch0(U_GRID)
            a1 = self.arch1(U_GRID)
            if np.min(a0) < ARCH_FLOOR:
                raise ValueError("tvarch1 needs a0(u) bounded away from zero")
            if np.min(a1) < 0:
                raise ValueError("tvarch1 needs a1(u) >= 0")
            if np.max(a1) * self.innovation.second_moment() >= 1.0:
                raise ValueError("tvarch1 needs sup a1(u) E[eps^2] < 1")

    # constructors -----------------------------------------------------
    @classmethod
    def iid(cls, n=1000, innovation=None):
        return cls("iid", n, innovation or Innovation())

    @classmethod
    def tvar1(cls, a, n=1000, innovation=None):
        if not isinstance(a, CoefFunction):
            a = CoefFunction.parse(a)
        return cls("tvar1", n, innovation or Innovation(), coef=a)

    @classmethod
    def tvma(cls, scale=1.0, decay="poly", rate=3.0, n=1000, innovation=None):
        if not isinstance(scale, CoefFunction):
            scale = CoefFunction.parse(scale)
        return cls("tvma", n, innovation or Innovation(), coef=scale, ma_decay=decay, ma_rate=rate)

    @classmethod
    def tvarch1(cls, a0, a1, n=1000, innovation=None):
        a0 = a0 if isinstance(a0, CoefFunction) else CoefFunction.parse(a0)
        a1 = a1 if isinstance(a1, CoefFunction) else CoefFunction.parse(a1)
        return cls("tvarch1", n, innovation or Innovation(), arch0=a0, arch1=a1)

    # derived quantities -------------------------------------------------
    def contraction(self):
        """Sup over the u-grid of the one-step contraction factor."""
        if self.family == "tvar1":
            return float(np.max(np.abs(self.coef(U_GRID))))
        if self.family == "tvarch1":
            return float(np.max(self.arch1(U_GRID)) * self.innovation.second_moment())
        return 0.0

    def strength(self, u):
        """Size of the dependence-driving coefficient at ``u``."""
        if self.family == "tvar1":
            return np.abs(self.coef(u))
        if self.family == "tvarch1":
            return self.arch1(u)
        if self.family == "tvma":
            return np.abs(self.coef(u))
        return np.zeros_like(np.asarray(u, dtype=float))

    def is_time_varying(self):
        if self.family == "tvar1" or self.family == "tvma":
            return not self.coef.is_constant()
        if self.family == "tvarch1":
            return not (self.arch0.is_constant() and self.arch1.is_constant())
        return False

    def ma_weights(self, length):
        j = np.arange(length, dtype=float)
        if self.ma_decay == "poly":
            return (j + 1.0) ** (-self.ma_rate)
        return self.ma_rate**j

    def default_burnin(self):
        if self.family == "iid":
            return 0
        if self.family == "tvma":
            sup_c = max(float(np.max(np.abs(self.coef(U_GRID)))), 1e-300)
            target = 1e-8 / sup_c
            if self.ma_decay == "poly":
                g = self.ma_rate
                # sum_{j>J} (j+1)^-g <= (J+1)^(1-g) / (g-1)
                J = math.ceil((target * (g - 1)) ** (1.0 / (1.0 - g))) - 1
            else:
                rho = self.ma_rate
                if rho == 0.0:
                    return 0
                # sum_{j>J} rho^j = rho^(J+1) / (1-rho)
                J = math.ceil(math.log(target * (1 - rho)) / math.log(rho)) - 1
            return max(J, 0)
        abar = self.contraction()
        if abar <= 0.0:
            return 1000
        return max(1000, math.ceil(math.log(1e-12) / math.log(abar)))

    def truncation_bound(self, burnin):
        """L2 bound on the effect of truncating the infinite past at ``burnin``."""
        m2 = self.innovation.second_moment()
        if self.family == "iid":
            return 0.0
        if self.family == "tvma":
            sup_c = float(np.max(np.abs(self.coef(U_GRID))))
            j = np.arange(burnin + 1, burnin + 200001, dtype=float)
            if self.ma_decay == "poly":
                g = self.ma_rate
                tail = float(np.sum((j + 1) ** -g)) + (burnin + 200002) ** (1 - g) / (g - 1)
            else:
                tail = self.ma_rate ** (burnin + 1) / (1 - self.ma_rate)
            return sup_c * tail * math.sqrt(m2)
        abar = self.contraction()
        if self.family == "tvar1":
            return abar ** (burnin + 1) * math.sqrt(m2 / (1 - abar**2))
        a0max = float(np.max(self.arch0(U_GRID)))
        return math.sqrt(abar ** (burnin + 1) * a0max * m2 / (1 - abar))

    def describe(self):
        parts = [f"family={self.family}", f"n={self.n}", f"innovation={self.innovation.text()}"]
        if self.innovation.scale != 1.0:
            parts.append(f"scale={self.innovation.scale!r}")
        if self.family in ("tvar1", "tvma"):
            parts.append(f"coef={self.coef.text()}")
        if self.family == "tvma":
            parts.append(f"ma={self.ma_decay}:{self.ma_rate!r}")
        if self.family == "tvarch1":
            parts.append(f"a0={self.arch0.text()}")
            parts.append(f"a1={self.arch1.text()}")
        return ";".join(parts)

    def digest(self):
        return hashlib.sha256(self.describe().encode()).hexdigest()[:16]


@dataclass
class PathEnsemble:
    """Replicate paths, one row per replicate, columns are times ``1..n``."""

    values: np.ndarray
    seed: int
    burnin: int
    kind: str = "raw"
    u: float = None
    k: int = None
    coupled: np.ndarray = None
    spec: ProcessSpec = None

    @property
    def reps(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# numerical kernels


@numba.njit(cache=True, nogil=True)
def _ar_evolve(eps, a, x0):
    R, T = eps.shape
    out = np.empty((R, T))
    for r in range(R):
        x = x0[r]
        for t in range(T):
            x = a[t] * x + eps[r, t]
            out[r, t] = x
    return out


@numba.njit(cache=True, nogil=True)
def _arch_evolve(eps, a0, a1, x0):
    R, T = eps.shape
    out = np.empty((R, T))
    for r in range(R):
        x = x0[r]
        for t in range(T):
            x = np.sqrt(a0[t] + a1[t] * x * x) * eps[r, t]
            out[r, t] = x
    return out


@numba.njit(cache=True, nogil=True)
def _frozen_window_dev(eps, X, p0, p1, first, n, W, family):
    # For each time column c in [first, first+n): rerun W steps of the
    # recursion frozen at that column's coefficients, started from the true
    # path value W steps back; return the pathwise deviation.
    R = eps.shape[0]
    out = np.empty((R, n))
    for r in range(R):
        for i in range(n):
            c = first + i
            s = X[r, c - W]
            if family == 1:
                a = p0[c]
                for m in range(c - W + 1, c + 1):
                    s = a * s + eps[r, m]
            else:
                b0 = p0[c]
                b1 = p1[c]
                for m in range(c - W + 1, c + 1):
                    s = np.sqrt(b0 + b1 * s * s) * eps[r, m]
            out[r, i] = X[r, c] - s
    return out


def _u_of_times(times, n):
    return np.clip(np.asarray(times, dtype=float) / n, 0.0, 1.0)


def _innovations(spec, n, burnin, seed, reps, domain, rep0=0, upto=None):
    """Innovation matrix for replicates ``rep0..rep0+reps-1``.

    Columns are times ``-burnin .. upto`` (``upto`` defaults to ``n``).
    """
    upto = n if upto is None else upto
    cols = burnin + 1 + upto
    eps = np.empty((reps, cols))
    for j in range(reps):
        r = rep0 + j
        past = spec.innovation.draw(rng.stream(seed, domain, r, rng.PAST), burnin + 1)
        eps[j, : burnin + 1] = past[::-1]
        if upto > 0:
            eps[j, burnin + 1 :] = spec.innovation.draw(rng.stream(seed, domain, r, rng.FORWARD), upto)
    return eps


def _couple_draws(spec, seed, reps, domain, rep0=0):
    return np.array(
        [
            spec.innovation.draw(rng.stream(seed, domain, rep0 + j, rng.COUPLE), 1)[0]
            for j in range(reps)
        ]
    )


def _evolve(spec, eps, u, burnin):
    """Run the model on an innovation matrix; ``u`` holds one value per column."""
    R = eps.shape[0]
    if spec.family == "iid":
        return eps.copy()
    if spec.family == "tvar1":
        return _ar_evolve(eps, spec.coef(u), np.zeros(R))
    if spec.family == "tvarch1":
        return _arch_evolve(eps, spec.arch0(u), spec.arch1(u), np.zeros(R))
    w = spec.ma_weights(burnin + 1)
    if w.size <= DIRECT_TAPS:
        conv = lfilter(w, [1.0], eps, axis=1)
    else:
        conv = oaconvolve(eps, w[None, :], axes=1)[:, : eps.shape[1]]
    out = spec.coef(u)[None, :] * conv
    out[:, :burnin] = np.nan
    return out


def _blocks(reps):
    return [(s, min(BLOCK, reps - s)) for s in range(0, reps, BLOCK)]


def _map_blocks(fn, reps):
    blocks = _blocks(reps)
    threads = n_threads()
    if threads == 1 or len(blocks) == 1:
        return [fn(s, m) for s, m in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def _resolve(spec, n, burnin):
    n = spec.n if n is None else int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    burnin = spec.default_burnin() if burnin is None else int(burnin)
    if burnin < 0:
        raise ValueError("burnin must be nonnegative")
    return n, burnin


def simulate_path(spec, n=None, seed=0, burnin=None, reps=1, domain=rng.REPLICATE, rep0=0):
    """Simulate ``X_1..X_n`` with coefficients at ``u = i/n``.

    ``rep0`` offsets the replicate streams, so large ensembles can be built
    chunk by chunk.
    """
    n, burnin = _resolve(spec, n, burnin)
    times = np.arange(-burnin, n + 1)
    u = _u_of_times(times, n)

    def block(s, m):
        eps = _innovations(spec, n, burnin, seed, m, domain, rep0=rep0 + s)
        return _evolve(spec, eps, u, burnin)[:, burnin + 1 :]

    values = np.concatenate(_map_blocks(block, reps), axis=0)
    return PathEnsemble(values, seed, burnin, "raw", spec=spec)


def marginal_sd(spec, n=None, burnin=None, u=None):
    """Exact standard deviations of ``X_1..X_n`` for Gaussian linear models.

    Follows the simulated recursion from its zero start, so it matches the
    finite burn-in exactly. ``u`` freezes the coefficients. Returns ``None``
    when the marginals are not Gaussian.
    """
    if spec.innovation.kind != "gaussian" or spec.family == "tvarch1":
        return None
    n, burnin = _resolve(spec, n, burnin)
    s2 = spec.innovation.scale**2
    if spec.family == "iid":
        return np.full(n, math.sqrt(s2))
    times = np.arange(-burnin, n + 1)
    uu = np.full(times.size, float(u)) if u is not None else _u_of_times(times, n)
    coef = spec.coef(uu)
    if spec.family == "tvma":
        w2 = float(np.sum(spec.ma_weights(burnin + 1) ** 2))
        return np.abs(coef[burnin + 1 :]) * math.sqrt(s2 * w2)
    a2 = coef**2
    var = np.empty(times.size)
    v = 0.0
    for t in range(times.size):
        v = a2[t] * v + s2
        var[t] = v
    return np.sqrt(var[burnin + 1 :])


def simulate_stationary(spec, u, n=None, seed=0, burnin=None, reps=1, domain=rng.REPLICATE):
    """Simulate the frozen-coefficient process at rescaled time ``u``.

    Uses the same innovations as :func:`simulate_path` for the same seed.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    n, burnin = _resolve(spec, n, burnin)
    uu = np.full(burnin + 1 + n, float(u))

    def block(s, m):
        eps = _innovations(spec, n, burnin, seed, m, domain, rep0=s)
        return _evolve(spec, eps, uu, burnin)[:, burnin + 1 :]

    values = np.concatenate(_map_blocks(block, reps), axis=0)
    return PathEnsemble(values, seed, burnin, "stationary", u=float(u), spec=spec)


def simulate_coupled_pair(spec, n=None, k=0, seed=0, burnin=None, reps=1, domain=rng.REPLICATE):
    """Paths driven by innovations that differ only in ``eps_{n-k}``.

    For recursive models the second matrix is recomputed from scratch on the
    modified innovations; for moving averages the swapped term is added to the
    base path, which leaves entries before the swap bit-identical.
    """
    n, burnin = _resolve(spec, n, burnin)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > n + burnin:
        raise ValueError(f"lag k={k} exceeds the available past n + burnin = {n + burnin}")
    times = np.arange(-burnin, n + 1)
    u = _u_of_times(times, n)
    col = burnin + n - k

    def block(s, m):
        eps = _innovations(spec, n, burnin, seed, m, domain, rep0=s)
        eps_star = eps.copy()
        eps_star[:, col] = _couple_draws(spec, seed, m, domain, rep0=s)
        base = _evolve(spec, eps, u, burnin)[:, burnin + 1 :]
        if spec.family == "tvma":
            # linear in the innovations: only the swapped term changes
            lag = np.arange(1, n + 1) - (n - k)
            live = (lag >= 0) & (lag <= burnin)
            w = spec.ma_weights(burnin + 1)[np.clip(lag, 0, burnin)]
            gain = np.where(live, spec.coef(u[burnin + 1 :]) * w, 0.0)
            alt = base + (eps_star[:, col] - eps[:, col])[:, None] * gain[None, :]
        else:
            alt = _evolve(spec, eps_star, u, burnin)[:, burnin + 1 :]
        return base, alt

    parts = _map_blocks(block, reps)
    values = np.concatenate([p[0] for p in parts], axis=0)
    coupled = np.concatenate([p[1] for p in parts], axis=0)
    return PathEnsemble(values, seed, burnin, "coupled", k=int(k), coupled=coupled, spec=spec)


def coupled_terminal(spec, k, reps, seed, index=None, n=None, burnin=None, domain=rng.REPLICATE):
    """Return ``(X_i, X_i^*)`` per replicate with ``eps_{i-k}`` swapped.

    ``k`` may be a sequence of lags; then ``X_i^*`` has one row per lag and all
    lags share the same base innovations. The base recursion is run once and
    each coupled branch restarts from the common state at ``i-k-1``.
    """
    n, burnin = _resolve(spec, n, burnin)
    many = np.ndim(k) > 0
    ks = [int(v) for v in np.atleast_1d(k)]
    i = n if index is None else int(index)
    if not 1 <= i <= n:
        raise ValueError("index must lie in 1..n")
    for kk in ks:
        if kk < 0:
            raise ValueError("k must be nonnegative")
        if i - kk < -burnin:
            raise ValueError(f"lag k={kk} exceeds the available past at index {i} (burnin {burnin})")
    times = np.arange(-burnin, i + 1)
    u = _u_of_times(times, n)
    ci = burnin + i

    def block(s, m):
        eps = _innovations(spec, n, burnin, seed, m, domain, rep0=s, upto=i)
        star = _couple_draws(spec, seed, m, domain, rep0=s)
        alts = np.empty((len(ks), m))
        if spec.family == "iid":
            x = eps[:, ci].copy()
            for j, kk in enumerate(ks):
                alts[j] = star if kk == 0 else x
            return x, alts
        if spec.family == "tvma":
            J = burnin
            w = spec.ma_weights(J + 1)
            c = float(spec.coef(u[ci]))
            window = eps[:, ci - J : ci + 1][:, ::-1]
            x = c * (window @ w)
            for j, kk in enumerate(ks):
                alt = window.copy()
                if kk <= J:
                    alt[:, kk] = star
                alts[j] = c * (alt @ w)
            return x, alts
        if spec.family == "tvar1":
            a = spec.coef(u)
            path = _ar_evolve(eps, a, np.zeros(m))
        else:
            a0, a1 = spec.arch0(u), spec.arch1(u)
            path = _arch_evolve(eps, a0, a1, np.zeros(m))
        for j, kk in enumerate(ks):
            cs = ci - kk
            x0 = path[:, cs - 1] if cs > 0 else np.zeros(m)
            tail = eps[:, cs : ci + 1].copy()
            tail[:, 0] = star
            if spec.family == "tvar1":
                alts[j] = _ar_evolve(tail, a[cs : ci + 1], x0)[:, -1]
            else:
                alts[j] = _arch_evolve(tail, a0[cs : ci + 1], a1[cs : ci + 1], x0)[:, -1]
        return path[:, ci], alts

    parts = _map_blocks(block, reps)
    x = np.concatenate([p[0] for p in parts])
    xs = np.concatenate([p[1] for p in parts], axis=1)
    return (x, xs) if many else (x, xs[0])


@dataclass
class LocalStationarityReport:
    ns: list
    deviation: np.ndarray
    se: np.ndarray
    exponent: float
    exponent_se: float
    c_x: float
    moment: float

    def exponent_ci(self, z=1.96):
        return self.exponent - z * self.exponent_se, self.exponent + z * self.exponent_se


def local_stationarity_check(spec, ns=(250, 500, 1000, 2000), s=1.0, reps=10_000, seed=0):
    """Estimate ``max_i ||X_i - X~_i(i/n)||_{2s}`` over a ladder of ``n``.

    The exponent is fitted from ``deviation ~ C_X n**-exponent``. The frozen
    companion is evaluated by rerunning the recursion with the coefficients of
    index ``i`` over a window long enough that the start-up error is below
    ``1e-12`` relative.
    """
    nu = 2.0 * s
    spec.innovation.check_moment(nu)
    ns = [int(v) for v in ns]
    dev = np.zeros(len(ns))
    se = np.zeros(len(ns))
    zero = spec.family in ("iid", "tvma") or not spec.is_time_varying()
    if not zero:
        abar = spec.contraction()
        W = 1 if abar == 0 else math.ceil(math.log(1e-12) / math.log(abar))
        for j, n in enumerate(ns):
            burnin = max(spec.default_burnin(), W)
            times = np.arange(-burnin, n + 1)
            u = _u_of_times(times, n)
            fam = 1 if spec.family == "tvar1" else 2
            p0 = spec.coef(u) if fam == 1 else spec.arch0(u)
            p1 = np.zeros_like(u) if fam == 1 else spec.arch1(u)

            def block(st, m, n=n, burnin=burnin, u=u, p0=p0, p1=p1, fam=fam):
                eps = _innovations(spec, n, burnin, seed, m, rng.REPLICATE, rep0=st)
                X = _evolve(spec, eps, u, burnin)
                d = np.abs(_frozen_window_dev(eps, X, p0, p1, burnin + 1, n, W, fam))
                w = d**nu
                return w.sum(axis=0), (w * w).sum(axis=0)

            parts = _map_blocks(block, reps)
            s1 = np.sum([p[0] for p in parts], axis=0)
            s2 = np.sum([p[1] for p in parts], axis=0)
            mean = s1 / reps
            var = np.maximum(s2 / reps - mean**2, 0.0) / reps
            i_max = int(np.argmax(mean))
            dev[j] = mean[i_max] ** (1.0 / nu)
            # delta method for m -> m^(1/nu)
            se[j] = (1.0 / nu) * mean[i_max] ** (1.0 / nu - 1.0) * math.sqrt(var[i_max])
    if np.all(dev == 0.0):
        return LocalStationarityReport(ns, dev, se, math.nan, math.nan, 0.0, nu)
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(dev)
    xc = x - x.mean()
    sxx = float(np.sum(xc**2))
    slope = float(np.sum(xc * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    var_y = (se / dev) ** 2
    slope_se = math.sqrt(float(np.sum((xc / sxx) ** 2 * var_y)))
    return LocalStationarityReport(ns, dev, se, -slope, slope_se, math.exp(intercept), nu)
