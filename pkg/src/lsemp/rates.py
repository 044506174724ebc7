"""Dependence and rate calculus: Delta(k), beta(q), q*(x), r(delta), V_n, psi,
H(k), m(n, delta, k), bracketing numbers for indicator classes, entropy
integrals and the variance bound for finite classes.

Universal constants that are not pinned down are set to 1 throughout.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dependence import DecayModel, DependenceProfile

# Euler-Maclaurin: explicit terms before the asymptotic tail
EM_TERMS = 64


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class DeltaSequence:
    """A summable nonnegative sequence ``Delta(k)``, ``k >= 1``.

    ``explicit`` stores ``(Delta(1), Delta(2), ...)`` with zeros beyond;
    ``poly`` is ``c k**-rate`` with ``rate > 1``; ``exp`` is ``c rate**k``.
    """

    kind: str = "explicit"
    c: float = 0.0
    rate: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "explicit":
            vals = tuple(float(v) for v in self.values)
            if any(v < 0 or not math.isfinite(v) for v in vals):
                raise ValueError("explicit Delta values must be finite and nonnegative")
            object.__setattr__(self, "values", vals)
        elif self.kind == "poly":
            if self.c < 0:
                raise ValueError("poly Delta needs c >= 0")
            if self.rate <= 1:
                raise ValueError(f"poly Delta with exponent {self.rate} is not summable (need > 1)")
        elif self.kind == "exp":
            if self.c < 0:
                raise ValueError("exp Delta needs c >= 0")
            if not 0 < self.rate < 1:
                raise ValueError(f"exp Delta with rate {self.rate} is not summable (need 0 < rho < 1)")
        else:
            raise ValueError(f"unknown Delta representation {self.kind!r}")

    @classmethod
    def zero(cls):
        return cls("explicit", values=())

    @classmethod
    def poly(cls, c, alpha):
        return cls("poly", float(c), float(alpha))

    @classmethod
    def exp(cls, c, rho):
        return cls("exp", float(c), float(rho))

    @classmethod
    def explicit(cls, values):
        return cls("explicit", values=tuple(values))

    @classmethod
    def parse(cls, text):
        """``poly:c,alpha``, ``exp:c,rho``, ``zero`` or ``explicit:v1,v2,...``."""
        kind, _, rest = str(text).strip().partition(":")
        args = [float(v) for v in rest.split(",") if v.strip()]
        if kind == "zero":
            return cls.zero()
        if kind == "poly":
            return cls.poly(*args)
        if kind == "exp":
            return cls.exp(*args)
        if kind == "explicit":
            return cls.explicit(args)
        raise ValueError(f"cannot parse Delta sequence {text!r}")

    @classmethod
    def from_decay(cls, model, scale=1.0, shift=0):
        """``Delta(k) = scale * delta(k - shift)`` for a fitted decay model."""
        if model.kind == "independent":
            return cls.zero()
        if model.kind == "exp":
            return cls.exp(scale * model.c * model.rate ** (-shift), model.rate)
        if shift:
            raise ValueError("shifted polynomial decay has no poly representation; use explicit")
        return cls.poly(scale * model.c, model.rate)

    @property
    def is_zero(self):
        return self.c == 0.0 if self.kind != "explicit" else not any(self.values)

    @cached_property
    def _suffix(self):
        v = np.asarray(self.values, dtype=float)
        return np.concatenate([np.cumsum(v[::-1])[::-1], [0.0]])

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "poly":
            return self.c * k ** (-self.rate)
        if self.kind == "exp":
            return self.c * self.rate**k
        v = np.asarray(self.values + (0.0,), dtype=float)
        idx = np.clip(k.astype(int) - 1, 0, len(self.values))
        idx = np.where(k.astype(int) > len(self.values), len(self.values), idx)
        return v[idx]

    def beta(self, q):
        """Tail sum ``sum_{j >= q} Delta(j)``; vectorized over ``q``."""
        q = np.asarray(q)
        if np.any(q < 1):
            raise ValueError("beta(q) needs q >= 1")
        if self.kind == "exp":
            return self.c * self.rate ** q.astype(float) / (1.0 - self.rate)
        if self.kind == "explicit":
            idx = np.minimum(q.astype(int) - 1, len(self.values))
            return self._suffix[idx]
        out = self.c * _zeta_tail(self.rate, q.astype(float))
        return out.reshape(q.shape)

    def l1(self):
        return float(self.beta(1))

    def text(self):
        if self.kind == "explicit":
            return "explicit:" + ",".join(repr(v) for v in self.values) if self.values else "zero"
        return f"{self.kind}:{self.c!r},{self.rate!r}"


def _zeta_tail(alpha, q):
    """``sum_{j >= q} j**-alpha`` by explicit terms plus an Euler-Maclaurin tail.

    The tail starts at ``J = q + 64``; the first neglected correction is of
    order ``J**-(alpha + 7)`` which is far below 1e-12 for ``alpha > 1``.
    """
    q = np.ravel(q)
    j = q[:, None] + np.arange(EM_TERMS)[None, :]
    head = np.sum(j ** (-alpha), axis=1)
    J = q + EM_TERMS
    a = alpha
    tail = (
        J ** (1.0 - a) / (a - 1.0)
        + 0.5 * J ** (-a)
        + a * J ** (-a - 1.0) / 12.0
        - a * (a + 1) * (a + 2) * J ** (-a - 3.0) / 720.0
        + a * (a + 1) * (a + 2) * (a + 3) * (a + 4) * J ** (-a - 5.0) / 30240.0
    )
    return head + tail


@dataclass(frozen=True)
class RateParams:
    """Constants of the compatibility condition.

    ``L`` holds the finite weights ``L_0, L_1, ...``. ``p = inf`` is allowed.
    """

    s: float = 1.0
    L: tuple = (1.0,)
    C_R: float = 0.5
    C_X: float = 1.0
    d: int = 1
    d_tilde: int = 1
    p: float = math.inf

    def __post_init__(self):
        L = tuple(float(v) for v in self.L)
        if any(v < 0 or not math.isfinite(v) for v in L):
            raise ValueError("L must be finite and nonnegative")
        object.__setattr__(self, "L", L)
        if not 0 < self.s <= 1:
            raise ValueError("s must lie in (0, 1]")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.C_R < 0 or self.C_X < 0:
            raise ValueError("C_R and C_X must be nonnegative")

    @property
    def L_norm1(self):
        return float(sum(self.L))

    @property
    def moment(self):
        """The moment order ``2 s p / (p - 1)`` at which the dependence measure enters."""
        if math.isinf(self.p):
            return 2.0 * self.s
        return 2.0 * self.s * self.p / (self.p - 1.0)


@dataclass(frozen=True)
class WeightProfile:
    D_n: float = 1.0
    D_inf: float = 1.0
    D_nu_inf: float = 1.0
    nu: float = 2.0

    def __post_init__(self):
        if min(self.D_n, self.D_inf, self.D_nu_inf) < 0:
            raise ValueError("weights must be nonnegative")

    @classmethod
    def from_weights(cls, D, nu=2.0):
        """Weights from a matrix of ``D_{f,n}(i/n)`` values (class x time)."""
        D = np.atleast_2d(np.asarray(D, dtype=float))
        D_n = float(np.max(np.sqrt(np.mean(D**2, axis=1))))
        sup = np.max(np.abs(D), axis=0)
        return cls(
            D_n,
            float(np.sqrt(np.mean(sup**2))),
            float(np.mean(sup**nu) ** (1.0 / nu)),
            nu,
        )


@dataclass(frozen=True)
class BoundParams:
    M: float
    H: float
    n: int
    sigma: float
    C_Delta: float
    universal_c: float = 1.0

    def __post_init__(self):
        for name in ("M", "H", "n", "sigma", "C_Delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# Delta from the dependence measure


def _delta_lookup(source):
    if isinstance(source, DependenceProfile):
        return source.at
    if isinstance(source, DecayModel):
        return lambda j: float(source(j))
    if callable(source):
        return lambda j: float(source(j))
    seq = list(source)
    return lambda j: float(seq[j])


def delta_bound(source, params, k):
    """Tightest admissible ``Delta(k)``:
    ``2 d C_R sum_{j<k} L_j delta(k-j-1)**s``.

    ``source`` is a :class:`DependenceProfile`, a :class:`DecayModel`, a
    callable or a sequence indexed by lag. A profile must carry the moment
    order ``2sp/(p-1)``.
    """
    if k < 1:
        raise ValueError("Delta(k) is defined for k >= 1")
    if isinstance(source, DependenceProfile) and abs(source.nu - params.moment) > 1e-12:
        raise ValueError(
            f"profile has nu={source.nu}, the compatibility condition needs nu={params.moment}"
        )
    look = _delta_lookup(source)
    total = 0.0
    for j in range(min(k, len(params.L))):
        if params.L[j] == 0.0:
            continue
        try:
            dv = look(k - j - 1)
        except (KeyError, IndexError):
            raise ValueError(f"dependence measure missing at lag {k - j - 1}") from None
        total += params.L[j] * dv**params.s
    return 2.0 * params.d * params.C_R * total


def delta_sequence(source, params, K):
    """Explicit ``Delta(1..K)`` from :func:`delta_bound`."""
    return DeltaSequence.explicit([delta_bound(source, params, k) for k in range(1, K + 1)])


def c_delta(params, C_fbar):
    """``2 max(d, d~) |L|_1 C_X**s C_R + C_fbar``."""
    return 2.0 * max(params.d, params.d_tilde) * params.L_norm1 * params.C_X**params.s * params.C_R + C_fbar


# ---------------------------------------------------------------------------
# beta, q*, r


def beta(delta, q):
    """``beta(q) = sum_{j >= q} Delta(j)``."""
    out = delta.beta(q)
    return float(out) if np.ndim(out) == 0 else out


def _first_true(pred):
    """Smallest ``q >= 1`` with ``pred(q)`` for a monotone predicate."""
    if pred(1):
        return 1
    hi = 2
    while not pred(hi):
        hi *= 2
        if hi > 1 << 62:
            raise OverflowError("search for q did not terminate")
    lo = hi // 2  # pred(lo) is False
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def q_star(delta, x):
    """``min{q >= 1 : beta(q) <= q x}``."""
    if not x > 0:
        raise ValueError("q*(x) needs x > 0")
    return _first_true(lambda q: delta.beta(q) <= q * x)


def r_of_delta(delta, d):
    """``r(d) = max{r > 0 : q*(r) r <= d}``.

    ``r -> q*(r) r`` is piecewise linear with downward jumps, so the feasible
    set is located structurally: with ``q0 = min{q : beta(q) <= d}`` the
    supremum is ``min(d/q0, beta(q0-1)/(q0-1))``. In the second case the
    supremum is not attained and a feasible point within ``1e-12`` relative
    below it is returned. Feasibility is re-verified before returning.
    """
    if not d > 0:
        raise ValueError("r(delta) needs delta > 0")
    q0 = _first_true(lambda q: delta.beta(q) <= d)
    if q0 == 1:
        r = d
    else:
        t = float(delta.beta(q0 - 1)) / (q0 - 1)
        r = d / q0
        if r >= t:
            r = t * (1.0 - 1e-12)
            while q_star(delta, r) != q0:
                r = np.nextafter(r, 0.0)
    if q_star(delta, r) * r > d:
        # rounding in d / q0; step down to the nearest feasible float
        while q_star(delta, r) * r > d:
            r = float(np.nextafter(r, 0.0))
    return float(r)


@dataclass
class SubmultResult:
    C_beta: float
    passed: bool
    ladder: list
    reason: str = ""


# polynomial tails settle at ratio <= 0.82 from Q = 100 on, tails with a 1/log
# factor stay >= 0.91
SUBMULT_GROWTH = 0.85


def _submult_constant(b, Q):
    """Max of ``beta(q1 q2) / (beta(q1) beta(q2))`` over ``q1 q2 <= Q``; ``b[q]`` is beta(q)."""
    worst = 0.0
    for q1 in range(1, int(math.isqrt(Q)) + 1):
        q2 = np.arange(q1, Q // q1 + 1)
        num = b[q1 * q2]
        den = b[q1] * b[q2]
        if np.any((den == 0) & (num > 0)):
            return math.inf
        ok = den > 0
        if np.any(ok):
            worst = max(worst, float(np.max(num[ok] / den[ok])))
    return worst


def submult_check(delta, Q=100):
    """Fit ``C_beta`` over ``q1 q2 <= Q`` and test it stays bounded.

    ``C_beta`` is recomputed on five points ``Q**(1/2) .. Q`` spaced evenly in
    ``log Q``. A bounded constant approaches its limit with increments that
    shrink geometrically; the check fails when the last increment is still at
    least ``SUBMULT_GROWTH`` times the one before it.
    """
    if Q < 100:
        raise ValueError("submult_check needs Q >= 100 for a five-point ladder")
    b = np.concatenate([[np.nan], delta.beta(np.arange(1, Q + 1))])
    ladder_q = sorted({int(round(Q ** (0.5 + j / 8))) for j in range(5)})
    ladder = [(q, _submult_constant(b, q)) for q in ladder_q]
    C = ladder[-1][1]
    if not math.isfinite(C):
        return SubmultResult(C, False, ladder, "beta vanishes while beta(q1 q2) > 0")
    d = np.diff([c for _, c in ladder])
    if d[-2] > 1e-12 * C and d[-1] >= SUBMULT_GROWTH * d[-2]:
        return SubmultResult(C, False, ladder, "C_beta keeps growing with Q")
    return SubmultResult(C, True, ladder)


# ---------------------------------------------------------------------------
# V_n, psi, H, m


def v_norm(f2n, delta, D_n=1.0):
    """``V_n(f) = ||f||_{2,n} + sum_{k>=1} min(||f||_{2,n}, D_n Delta(k))``."""
    f = float(f2n)
    if f < 0:
        raise ValueError("||f||_{2,n} must be nonnegative")
    if f == 0.0 or D_n == 0.0 or delta.is_zero:
        return f
    if delta.kind == "explicit":
        vals = D_n * np.asarray(delta.values)
        return f + float(np.sum(np.minimum(f, vals)))
    # monotone: min switches to the Delta branch from K on
    if delta.kind == "poly":
        K = int(math.floor((D_n * delta.c / f) ** (1.0 / delta.rate))) + 1
    else:
        K = int(math.floor(math.log(f / (D_n * delta.c)) / math.log(delta.rate))) + 1
    K = max(K, 1)
    while K > 1 and D_n * float(delta(K - 1)) < f:
        K -= 1
    while D_n * float(delta(K)) >= f:
        K += 1
    return f + (K - 1) * f + D_n * float(delta.beta(K))


def psi(eps):
    """``sqrt(log(1/eps v 1)) * log log(1/eps v e)``."""
    e = np.asarray(eps, dtype=float)
    if np.any(e <= 0):
        raise ValueError("psi needs eps > 0")
    inv = 1.0 / e
    out = np.sqrt(np.log(np.maximum(inv, 1.0))) * np.log(np.log(np.maximum(inv, math.e)))
    return float(out) if out.ndim == 0 else out


def H_of(k):
    """``1 v log k``."""
    if k < 1:
        raise ValueError("H(k) needs k >= 1")
    return max(1.0, math.log(k))


def m_threshold(n, delta_val, k, delta, w):
    """``r(delta/D_n) D_inf sqrt(n) / sqrt(H(k))``."""
    if n < 1 or k < 1 or not delta_val > 0:
        raise ValueError("m(n, delta, k) needs n >= 1, k >= 1, delta > 0")
    if w.D_n == 0:
        raise ValueError("m(n, delta, k) is undefined for D_n = 0")
    return r_of_delta(delta, delta_val / w.D_n) * w.D_inf * math.sqrt(n) / math.sqrt(H_of(k))


# ---------------------------------------------------------------------------
# bracketing and entropy integrals


def indicator_brackets(eps, L_G, x_lo, x_hi):
    """Break points ``-inf, x_1, x_1 + eps^2/L_G, ..., x_N, +inf``."""
    if x_lo > x_hi:
        raise ValueError("need x_lo <= x_hi")
    if not L_G > 0:
        raise ValueError("L_G must be positive")
    if eps >= 1:
        return np.array([-np.inf, np.inf])
    N = 1 + _ceil((x_hi - x_lo) * L_G / eps**2)
    pts = x_lo + np.arange(N) * eps**2 / L_G
    return np.concatenate([[-np.inf], pts, [np.inf]])


def entropy_indicator(eps, L_G, x_lo, x_hi):
    """Number of brackets ``1 + ceil((x_hi - x_lo) L_G / eps^2) + 2``; 1 if eps >= 1."""
    if x_lo > x_hi:
        raise ValueError("need x_lo <= x_hi")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps >= 1:
        return 1
    return 1 + _ceil((x_hi - x_lo) * L_G / eps**2) + 2


def _ceil(x):
    # absorb rounding so that an exact multiple like 5 * 0.4 / 0.1**2 gives 200
    return math.ceil(x * (1.0 - 1e-12))


@dataclass
class IntegralResult:
    value: float
    divergent: bool
    pieces: int
    partial: float = field(default=math.nan)

    def __float__(self):
        return self.value


_GL10 = np.polynomial.legendre.leggauss(10)
_GL20 = np.polynomial.legendre.leggauss(20)


def _gl(g, a, b, rule):
    x, w = rule
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    return h * float(np.dot(w, g(m + h * x)))


def _adaptive(g, a, b, tol, depth=0):
    coarse = _gl(g, a, b, _GL10)
    fine = _gl(g, a, b, _GL20)
    if not math.isfinite(fine):
        return fine
    if abs(fine - coarse) <= tol * max(abs(fine), 1e-300) or depth >= 40:
        return fine
    m = 0.5 * (a + b)
    return _adaptive(g, a, m, tol, depth + 1) + _adaptive(g, m, b, tol, depth + 1)


def entropy_integral(entropy, sigma=1.0, with_psi=False, tol=1e-6):
    """``int_0^sigma [psi(e)] sqrt(H(e)) de`` for a nonincreasing entropy ``H``.

    Substitutes ``e = sigma exp(-t)`` and integrates unit ``t``-pieces
    adaptively until the geometric tail estimate drops below ``tol``
    relative. Integrals whose pieces stop shrinking before ``e`` reaches
    1e-300 are reported divergent together with the partial value.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    t_max = int(math.floor(math.log(sigma / 1e-300)))
    grid = sigma * np.exp(-np.linspace(0.0, t_max, 400))
    with np.errstate(over="ignore", invalid="ignore"):
        hv = np.asarray(entropy(grid), dtype=float) * np.ones_like(grid)
        step = np.diff(hv)
    # grid runs with eps decreasing, so H must not drop along it
    bad = np.isfinite(step) & (step < -1e-12 * np.maximum(np.abs(hv[:-1]), 1.0))
    if np.any(bad):
        raise ValueError("entropy must be nonincreasing in eps")

    def g(t):
        e = sigma * np.exp(-t)
        with np.errstate(over="ignore", invalid="ignore"):
            h = np.maximum(np.asarray(entropy(e), dtype=float) * np.ones_like(e), 0.0)
            val = np.sqrt(h) * e
            if with_psi:
                val = val * psi(e)
        return val

    total = 0.0
    prev = None
    for m in range(t_max):
        piece = _adaptive(g, float(m), float(m + 1), tol * 1e-3)
        if not math.isfinite(piece):
            return IntegralResult(math.inf, True, m + 1, total)
        total += piece
        if prev is not None and m >= 8 and prev > 0:
            ratio = piece / prev
            if piece == 0.0 or (ratio < 1 and piece * ratio / (1 - ratio) <= 1e-3 * tol * abs(total)):
                return IntegralResult(total, False, m + 1, total)
        prev = piece
    return IntegralResult(math.inf, True, t_max, total)


# ---------------------------------------------------------------------------
# variance bound for finite classes


@dataclass
class VarianceBound:
    value: float
    q: int
    alt_value: float
    r_term: float
    beta_term: float
    block_term: float


def variance_bound(bp, delta, w, q=None):
    """Bound on ``E max_f |R_n^2(f) - E R_n^2(f)|`` with the universal constant set to 1.

    Returns the minimum over ``q in 1..n`` (or at the given ``q``) of
    ``D_n r(sigma/D_n) sigma + C_Delta D_inf^2 beta(q) + q M^2 H / n``, plus
    the ``q*``-based alternative ``2 [D_n r(sigma/D_n) sigma + q*(.) M^2 H / n]``.
    """
    c = bp.universal_c
    r_term = w.D_n * r_of_delta(delta, bp.sigma / w.D_n) * bp.sigma if w.D_n > 0 else 0.0
    qs = np.arange(1, bp.n + 1) if q is None else np.array([int(q)])
    if qs[0] < 1 or qs[-1] > bp.n:
        raise ValueError("q must lie in 1..n")
    bt = bp.C_Delta * w.D_inf**2 * np.asarray(delta.beta(qs), dtype=float)
    qt = qs * bp.M**2 * bp.H / bp.n
    total = r_term + bt + qt
    j = int(np.argmin(total))
    mh = bp.M**2 * bp.H / bp.n
    if w.D_inf > 0:
        q_alt = q_star(delta, mh / (w.D_inf**2 * bp.C_Delta))
    else:
        q_alt = 1
    alt = 2.0 * c * (r_term + q_alt * mh)
    return VarianceBound(c * float(total[j]), int(qs[j]), alt, c * r_term, c * float(bt[j]), c * float(qt[j]))


# ---------------------------------------------------------------------------
# closed forms up to constants (used for sandwich checks)


def closed_q_star(delta, x):
    if delta.is_zero:
        return 1.0
    if delta.kind == "poly":
        return max(x ** (-1.0 / delta.rate), 1.0)
    if delta.kind == "exp":
        return max(math.log(1.0 / x), 1.0)
    raise ValueError("closed forms exist for poly and exp decays only")


def closed_r(delta, d):
    if delta.is_zero:
        return d
    if delta.kind == "poly":
        a = delta.rate
        return min(d ** (a / (a - 1.0)), d)
    if delta.kind == "exp":
        return min(d / math.log(1.0 / d), d)
    raise ValueError("closed forms exist for poly and exp decays only")


def closed_v(delta, f):
    if delta.is_zero:
        return f
    if delta.kind == "poly":
        return f * max(f ** (-1.0 / delta.rate), 1.0)
    if delta.kind == "exp":
        return f * max(math.log(1.0 / f), 1.0)
    raise ValueError("closed forms exist for poly and exp decays only")
