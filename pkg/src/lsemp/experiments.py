"""Configuration-driven desk-scale experiments and report emission.

A config is an INI file with sections ``[experiment]``, ``[process]``,
``[grids]``, ``[schedule]`` and ``[tolerances]``; see :data:`CONFIG_KEYS`.
Reports are pure functions of (config, seed, version). Wall-clock timing is
kept on the report object only so the written files stay byte-identical.
"""

import configparser
import csv
import dataclasses
import hashlib
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import __version__, rng
from .dependence import ar1_gaussian_delta
from .estimators import get_kernel, kde, localized_edf_batch, time_weights
from .limit import longrun_cov_indicator, ks_distance, sample_gaussian_limit
from .process import Innovation, ProcessSpec, marginal_sd, n_threads, simulate_path
from .rates import (
    BoundParams,
    DeltaSequence,
    RateParams,
    WeightProfile,
    H_of,
    c_delta,
    closed_q_star,
    closed_r,
    closed_v,
    delta_sequence,
    q_star,
    r_of_delta,
    v_norm,
    variance_bound,
)

EXPERIMENTS = {
    "fcltedf": "FcltEdf",
    "fcltlocaledf": "FcltLocalEdf",
    "kderate": "KdeRate",
    "varianceboundscaling": "VarianceBoundScaling",
    "tablesandwich": "TableSandwich",
}

CONFIG_KEYS = {
    "experiment": {
        "name": "FcltEdf | FcltLocalEdf | KdeRate | VarianceBoundScaling | TableSandwich",
        "seed": "nonnegative integer seed (default 0)",
        "reps": "Monte Carlo replicates M (default 500)",
        "pilot_reps": "pilot paths for centering when no closed form exists (default 50 x reps, minimum 50)",
        "limit_draws": "draws from the Gaussian limit for the KS check (default 20000)",
        "longrun_pathlen": "path length for the long-run covariance (default 1000000)",
        "lagmax": "Bartlett truncation lag (default pathlen^(1/3))",
        "kernel": "rectangular | triangular | epanechnikov (default epanechnikov)",
        "c_fbar": "constant added in C_Delta for the variance bound (default 1)",
        "c_r": "compatibility constant C_R for the variance bound (default 1)",
    },
    "process": {
        "family": "iid | tvar1 | tvma | tvarch1",
        "coef": "coefficient curve, e.g. 0.5, affine:0.2,0.6, sinusoidal:0.3,0.2",
        "innovation": "gaussian | uniform | student_t:df",
        "scale": "innovation scale (default 1)",
        "ma_decay": "poly | geom (tvma)",
        "ma_rate": "MA weight exponent or ratio (tvma)",
        "arch0": "ARCH intercept curve (tvarch1)",
        "arch1": "ARCH slope curve (tvarch1)",
        "burnin": "burn-in length (default from the model's contraction)",
    },
    "grids": {
        "x": "evaluation points: comma list or linspace(lo, hi, count)",
        "v": "rescaled time for localized runs (default 0.5)",
        "x_range": "lo, hi of the x-range for KdeRate and the class grid of VarianceBoundScaling",
        "x_step": "KdeRate x-step as a fraction of h2 (default 1/16)",
        "v_step": "KdeRate v-step as a fraction of h1 (default 1/16)",
        "tail_q": "KdeRate truncation constant Q in c_n = Q n^(1/(2s)) (default 3)",
        "tail_s": "KdeRate moment exponent s in c_n (default 1)",
        "classes": "VarianceBoundScaling class sizes, e.g. 8, 64",
        "decays": "TableSandwich decays separated by ';', e.g. poly:1,2; exp:1,0.5; zero",
        "decades": "TableSandwich argument range as lo, hi exponents (default -6, -2)",
        "points": "TableSandwich points per quantity (default 41)",
    },
    "schedule": {
        "n": "sample sizes, strictly increasing",
        "h": "time bandwidth for FcltLocalEdf: number or c*n^(p)",
        "h1": "KdeRate time bandwidth: number or c*n^(p)",
        "h2": "KdeRate space bandwidth: number or c*n^(p)",
    },
    "tolerances": {
        "var_rel": "relative variance error bound (0.15 FcltEdf, 0.20 FcltLocalEdf)",
        "cov_z": "off-diagonal covariance bound in combined standard errors (3)",
        "ks": "KS distance bound for sup statistics (0.08)",
        "slope_lo": "lower slope bound for KdeRate (0.8)",
        "slope_hi": "upper slope bound for KdeRate (1.2)",
        "violations": "allowed increases of the normalized KDE error (1)",
        "violation_z": "an increase counts when above this many SE (2)",
        "drift": "maximal ratio drift across the ladder (4)",
        "zero": "machine-precision bound for degenerate cases (1e-12)",
        "width": "sandwich corridor width bound (20)",
        "drift_slope": "bound on the log-log drift slope of sandwich ratios (0.1)",
    },
}

DEFAULT_TOL = {
    "FcltEdf": {"var_rel": 0.15, "cov_z": 3.0, "ks": 0.08},
    "FcltLocalEdf": {"var_rel": 0.20, "cov_z": 3.0, "ks": 0.08},
    "KdeRate": {"slope_lo": 0.8, "slope_hi": 1.2, "violations": 1, "violation_z": 2.0},
    "VarianceBoundScaling": {"drift": 4.0, "zero": 1e-12},
    "TableSandwich": {"width": 20.0, "drift_slope": 0.1},
}

DISTRIBUTIONAL = ("FcltEdf", "FcltLocalEdf", "KdeRate")

ASSUMPTIONS = {
    "FcltEdf": [
        "conditional distribution functions of the model are Lipschitz in the conditioning value",
        "the stationary marginal has a bounded density, so indicator classes satisfy the entropy condition",
        "these hypotheses are assumed for the built-in models, not verified",
    ],
    "FcltLocalEdf": [
        "conditional distribution functions are Lipschitz uniformly in rescaled time",
        "marginal tails are controlled uniformly over the array",
        "the kernel is Lipschitz, integrates to one and lives on [-1/2, 1/2]",
        "these hypotheses are assumed for the built-in models, not verified",
    ],
    "KdeRate": [
        "marginal densities are Lipschitz uniformly in rescaled time",
        "bandwidths satisfy log(n) / (n h1 h2) = O(1) along the ladder",
    ],
    "VarianceBoundScaling": [
        "conditional law is Gaussian with known mean, so the predictable quadratic variation is exact",
        "universal constants in the bound are set to 1; only scaling is compared",
    ],
    "TableSandwich": ["closed forms hold up to constants; only constant-factor corridors are tested"],
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config


@dataclass
class ExperimentConfig:
    name: str
    spec: ProcessSpec
    xgrid: np.ndarray
    v: float
    schedule: list
    reps: int
    seed: int
    pilot_reps: int
    tolerances: dict
    options: dict
    burnin: int = None
    text: str = ""

    def spec_for(self, n):
        return dataclasses.replace(self.spec, n=int(n))

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]


_POWER = re.compile(r"^(?:([0-9.eE+-]+)\s*\*\s*)?n\s*\^\s*\(?\s*([-+]?[0-9.eE]+)\s*(?:/\s*([0-9.eE]+))?\s*\)?$")


def bandwidth_rule(text):
    """``"n^(-1/3)"``, ``"0.5*n^(-0.2)"`` or a number, as a function of n."""
    s = str(text).strip()
    try:
        value = float(s)
        return lambda n: value
    except ValueError:
        pass
    m = _POWER.match(s.replace(" ", ""))
    if not m:
        raise ConfigError(f"cannot parse bandwidth rule {text!r}")
    c = float(m.group(1)) if m.group(1) else 1.0
    p = float(m.group(2)) / (float(m.group(3)) if m.group(3) else 1.0)
    return lambda n: c * float(n) ** p


def _floats(text):
    s = str(text).strip()
    m = re.fullmatch(r"linspace\(\s*([^,]+),\s*([^,]+),\s*([^)]+)\)", s)
    if m:
        return np.linspace(float(m.group(1)), float(m.group(2)), int(m.group(3)))
    return np.array([float(v) for v in s.split(",") if v.strip()])


def _innovation(text, scale):
    kind, _, rest = str(text).strip().partition(":")
    if kind == "student_t":
        return Innovation("student_t", float(rest), scale)
    return Innovation(kind, 0.0, scale)


def parse_config(text):
    """Parse config text into an :class:`ExperimentConfig`; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for section in cp.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in CONFIG_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    canon = "".join(
        f"{s}.{k}={cp[s][k].strip()}\n" for s in sorted(cp.sections()) for k in sorted(cp[s])
    )

    def get(section, key, default=None):
        if cp.has_section(section) and key in cp[section]:
            return cp[section][key].strip()
        return default

    raw_name = get("experiment", "name")
    if raw_name is None:
        raise ConfigError("[experiment] name is required")
    name = EXPERIMENTS.get(raw_name.lower())
    if name is None:
        raise ConfigError(f"unknown experiment {raw_name!r}")

    try:
        seed = int(get("experiment", "seed", "0"))
        reps = int(get("experiment", "reps", "500"))
        pilot_reps = int(get("experiment", "pilot_reps", str(50 * reps)))
        scale = float(get("process", "scale", "1"))
        family = get("process", "family", "iid")
        innov = _innovation(get("process", "innovation", "gaussian"), scale)
        ns = [int(float(v)) for v in get("schedule", "n", "1000").split(",") if v.strip()]
        kw = dict(n=ns[0], innovation=innov)
        if family == "iid":
            spec = ProcessSpec.iid(**kw)
        elif family == "tvar1":
            spec = ProcessSpec.tvar1(get("process", "coef", "0.5"), **kw)
        elif family == "tvma":
            spec = ProcessSpec.tvma(
                get("process", "coef", "1"), get("process", "ma_decay", "poly"),
                float(get("process", "ma_rate", "3")), **kw,
            )
        elif family == "tvarch1":
            spec = ProcessSpec.tvarch1(get("process", "arch0", "1"), get("process", "arch1", "0.3"), **kw)
        else:
            raise ConfigError(f"unknown family {family!r}")
        burnin = get("process", "burnin")
        burnin = int(burnin) if burnin is not None else None
        xgrid = _floats(get("grids", "x", "-1, 0, 1"))
        v = float(get("grids", "v", "0.5"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None

    if seed < 0:
        raise ConfigError("seed must be nonnegative")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError(f"schedule n values must be strictly increasing, got {ns}")
    if pilot_reps < 50:
        raise ConfigError(f"pilot_reps={pilot_reps}; pilots need at least 50 replicates")
    if name in DISTRIBUTIONAL and reps < 100:
        raise ConfigError(f"reps={reps}; distributional checks need at least 100 replicates")

    schedule = []
    rules = {k: bandwidth_rule(get("schedule", k)) for k in ("h", "h1", "h2") if get("schedule", k)}
    for n in ns:
        schedule.append({"n": n, **{k: f(n) for k, f in rules.items()}})

    tol = dict(DEFAULT_TOL[name])
    if cp.has_section("tolerances"):
        for k in cp["tolerances"]:
            tol[k] = float(cp["tolerances"][k])

    options = {
        "limit_draws": int(get("experiment", "limit_draws", "20000")),
        "pathlen": int(float(get("experiment", "longrun_pathlen", "1000000"))),
        "lagmax": int(get("experiment", "lagmax")) if get("experiment", "lagmax") else None,
        "kernel": get_kernel(get("experiment", "kernel", "epanechnikov")),
        "c_fbar": float(get("experiment", "c_fbar", "1")),
        "c_r": float(get("experiment", "c_r", "1")),
        "x_range": tuple(_floats(get("grids", "x_range", "-2, 2" if name == "VarianceBoundScaling" else "-4, 4"))),
        "x_step": float(eval_fraction(get("grids", "x_step", "1/16"))),
        "v_step": float(eval_fraction(get("grids", "v_step", "1/16"))),
        "tail_q": float(get("grids", "tail_q", "3")),
        "tail_s": float(get("grids", "tail_s", "1")),
        "classes": [int(c) for c in _floats(get("grids", "classes", "8"))],
        "decays": [d.strip() for d in get("grids", "decays", "poly:1,2; exp:1,0.5; zero").split(";") if d.strip()],
        "decades": tuple(_floats(get("grids", "decades", "-6, -2"))),
        "points": int(get("grids", "points", "41")),
    }
    cfg = ExperimentConfig(name, spec, xgrid, v, schedule, reps, seed, pilot_reps, tol, options, burnin, canon)
    _validate(cfg)
    return cfg


def eval_fraction(text):
    a, _, b = str(text).partition("/")
    return float(a) / float(b) if b else float(a)


def _validate(cfg):
    name = cfg.name
    if name == "FcltEdf" and cfg.spec.is_time_varying():
        raise ConfigError("FcltEdf needs a stationary process (constant coefficients)")
    if name == "FcltLocalEdf":
        if "h" not in cfg.schedule[0]:
            raise ConfigError("FcltLocalEdf needs [schedule] h")
        if not cfg.options["kernel"].is_lipschitz:
            raise ConfigError("FcltLocalEdf needs a Lipschitz kernel")
        for entry in cfg.schedule:
            h = entry["h"]
            if not (h / 2 <= cfg.v <= 1 - h / 2):
                raise ConfigError(f"v={cfg.v} is within h/2 of the boundary for n={entry['n']} (h={h:.4g})")
    if name == "KdeRate":
        if "h1" not in cfg.schedule[0] or "h2" not in cfg.schedule[0]:
            raise ConfigError("KdeRate needs [schedule] h1 and h2")
        if len(cfg.schedule) < 2:
            raise ConfigError("KdeRate needs at least two sample sizes")
    if name == "VarianceBoundScaling":
        spec = cfg.spec
        if spec.family not in ("iid", "tvar1") or spec.innovation.kind != "gaussian":
            raise ConfigError("VarianceBoundScaling supports Gaussian IID and AR(1) models only")
        if spec.is_time_varying():
            raise ConfigError("VarianceBoundScaling needs constant coefficients")
        if len(cfg.schedule) < 2:
            raise ConfigError("VarianceBoundScaling needs at least two sample sizes")
    if name == "TableSandwich":
        for d in cfg.options["decays"]:
            try:
                DeltaSequence.parse(d)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad decay {d!r}: {exc}") from None


def load_config(path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    return parse_config(p.read_text())


# ---------------------------------------------------------------------------
# reports


@dataclass
class CheckRow:
    check: str
    statistic: float
    threshold: object
    passed: bool
    mc_se: float


@dataclass
class ExperimentReport:
    name: str
    rows: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    streams: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    assumptions: list = field(default_factory=list)
    timing: float = 0.0

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def add(self, check, statistic, threshold, passed, mc_se=0.0, samples=None):
        if any(r.check == check for r in self.rows):
            raise RuntimeError(f"duplicate check {check!r}")
        self.rows.append(CheckRow(check, float(statistic), threshold, bool(passed), float(mc_se)))
        if samples is not None:
            self.samples[check] = samples

    def use_stream(self, domain, purpose):
        self.streams.setdefault(domain, []).append(purpose)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _safe(name):
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", name).strip("_")


def write_report(report, outdir):
    """Write ``report.csv``, ``summary.txt`` and ``samples/<check>.csv``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "statistic", "threshold", "passed", "mc_se"])
        for r in report.rows:
            w.writerow([r.check, _fmt(r.statistic), _fmt(r.threshold), "true" if r.passed else "false", _fmt(r.mc_se)])
    lines = [f"experiment: {report.name}"]
    lines += [f"{k}: {v}" for k, v in report.provenance.items()]
    n_fail = sum(not r.passed for r in report.rows)
    lines.append(f"checks: {len(report.rows)} passed: {len(report.rows) - n_fail} failed: {n_fail}")
    lines.append("streams:")
    for dom in sorted(report.streams):
        lines.append(f"  {dom} {rng.DOMAIN_NAMES[dom]}: {', '.join(report.streams[dom])}")
    lines.append(f"  pilot and replicate streams disjoint: {'yes' if rng.PILOT != rng.REPLICATE else 'no'}")
    lines.append("assumptions:")
    lines += [f"  - {a}" for a in report.assumptions]
    if report.notes:
        lines.append("notes:")
        lines += [f"  - {a}" for a in report.notes]
    lines.append("warnings:" + ("" if report.warnings else " none"))
    lines += [f"  - {a}" for a in report.warnings]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    sdir = out / "samples"
    sdir.mkdir(exist_ok=True)
    for check, series in report.samples.items():
        with open(sdir / f"{_safe(check)}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series", "index", "value"])
            for label, arr in series.items():
                for i, v in enumerate(np.ravel(arr)):
                    w.writerow([label, i, repr(float(v))])
    return out


def _new_report(cfg):
    rep = ExperimentReport(cfg.name)
    rep.provenance = {
        "version": __version__,
        "seed": cfg.seed,
        "config_digest": cfg.digest,
        "process": cfg.spec.describe(),
    }
    rep.assumptions = list(ASSUMPTIONS[cfg.name])
    return rep


# ---------------------------------------------------------------------------
# centring


def _pilot_chunks(spec, cfg, n, fn):
    """Average ``fn(paths)`` over ``cfg.pilot_reps`` pilot paths, chunk by chunk."""
    total = None
    done = 0
    chunk = 2048
    while done < cfg.pilot_reps:
        m = min(chunk, cfg.pilot_reps - done)
        paths = simulate_path(spec, n, cfg.seed, cfg.burnin, m, rng.PILOT, rep0=done).values
        part = np.sum(fn(paths), axis=0)
        total = part if total is None else total + part
        done += m
    return total / cfg.pilot_reps


def _edf_rows(paths, grid):
    return np.stack([np.mean(paths <= x, axis=1) for x in grid], axis=1)


def _edf_center(spec, cfg, n, rep):
    sd = marginal_sd(spec, n, cfg.burnin)
    if sd is not None:
        rep.notes.append("centring: exact Gaussian marginals")
        return np.array([np.mean(norm.cdf(x / sd)) for x in cfg.xgrid])
    rep.use_stream(rng.PILOT, f"centring (n={n})")
    rep.notes.append(f"centring: pilot of {cfg.pilot_reps} paths")
    return _pilot_chunks(spec, cfg, n, lambda p: _edf_rows(p, cfg.xgrid))


def _local_center(spec, cfg, n, h, w, rep):
    sd = marginal_sd(spec, n, cfg.burnin)
    if sd is not None:
        rep.notes.append("centring: exact Gaussian marginals")
        return np.array([np.sum(w * norm.cdf(x / sd)) for x in cfg.xgrid])
    rep.use_stream(rng.PILOT, f"centring (n={n})")
    rep.notes.append(f"centring: pilot of {cfg.pilot_reps} paths")
    k = cfg.options["kernel"]
    return _pilot_chunks(spec, cfg, n, lambda p: localized_edf_batch(p, cfg.xgrid, cfg.v, h, k))


# ---------------------------------------------------------------------------
# FCLT checks


def _fclt_checks(rep, cfg, prefix, stat, cov):
    tol = cfg.tolerances
    M = stat.shape[0]
    grid = cfg.xgrid
    target = cov.matrix
    for j, x in enumerate(grid):
        t = target[j, j]
        if not t > 0:
            raise ValueError(f"target variance at x={x:g} is zero; drop the point from the grid")
        emp = float(np.var(stat[:, j], ddof=1))
        rel = abs(emp / t - 1.0)
        se = emp / t * math.sqrt(2.0 / (M - 1) + (cov.se_matrix[j, j] / t) ** 2)
        rep.add(f"{prefix}var[x={x:g}]", rel, tol["var_rel"], rel < tol["var_rel"], se, {"statistic": stat[:, j]})
    for j in range(len(grid)):
        for k in range(j + 1, len(grid)):
            emp = float(np.cov(stat[:, j], stat[:, k])[0, 1])
            se_emp = math.sqrt((target[j, j] * target[k, k] + target[j, k] ** 2) / (M - 1))
            se = math.sqrt(se_emp**2 + cov.se_matrix[j, k] ** 2)
            z = abs(emp - target[j, k]) / se
            rep.add(
                f"{prefix}cov[x={grid[j]:g},y={grid[k]:g}]", z, tol["cov_z"], z <= tol["cov_z"], se,
                {"x": stat[:, j], "y": stat[:, k]},
            )
    limit = sample_gaussian_limit(cov, cfg.options["limit_draws"], cfg.seed)
    sup_mc = np.max(np.abs(stat), axis=1)
    ks = ks_distance(sup_mc, limit.sup_stats)
    scale = math.sqrt(1.0 / M + 1.0 / limit.sup_stats.size)
    rep.add(f"{prefix}ks_sup", ks, tol["ks"], ks < tol["ks"], scale, {"mc": sup_mc, "limit": limit.sup_stats})
    if limit.chol_jitter:
        rep.notes.append(f"{prefix}limit covariance regularized with jitter {limit.chol_jitter:.3g}")


def _prefix(cfg, n):
    return f"n={n}:" if len(cfg.schedule) > 1 else ""


def run_fclt_edf(cfg):
    """sqrt(n)(G_n - G) on the x-grid against the long-run covariance limit."""
    rep = _new_report(cfg)
    rep.use_stream(rng.REPLICATE, "replicate paths")
    rep.use_stream(rng.LONGRUN, "long-run covariance path")
    rep.use_stream(rng.LIMIT, "Gaussian limit draws")
    opts = cfg.options
    for entry in cfg.schedule:
        n = entry["n"]
        spec = cfg.spec_for(n)
        paths = simulate_path(spec, n, cfg.seed, cfg.burnin, cfg.reps).values
        G = _edf_center(spec, cfg, n, rep)
        stat = math.sqrt(n) * (_edf_rows(paths, cfg.xgrid) - G)
        cov = longrun_cov_indicator(spec, 0.5, cfg.xgrid, opts["pathlen"], opts["lagmax"], cfg.seed, burnin=cfg.burnin)
        _fclt_checks(rep, cfg, _prefix(cfg, n), stat, cov)
    return rep


def run_fclt_local_edf(cfg):
    """sqrt(nh)(G_nh(., v) - E G_nh(., v)) against int K^2 times the frozen long-run covariance."""
    rep = _new_report(cfg)
    rep.use_stream(rng.REPLICATE, "replicate paths")
    rep.use_stream(rng.LONGRUN, "long-run covariance path (frozen at v)")
    rep.use_stream(rng.LIMIT, "Gaussian limit draws")
    opts = cfg.options
    k = opts["kernel"]
    for entry in cfg.schedule:
        n, h = entry["n"], entry["h"]
        spec = cfg.spec_for(n)
        w = time_weights(n, cfg.v, h, k)
        paths = simulate_path(spec, n, cfg.seed, cfg.burnin, cfg.reps).values
        center = _local_center(spec, cfg, n, h, w, rep)
        stat = math.sqrt(n * h) * (localized_edf_batch(paths, cfg.xgrid, cfg.v, h, k) - center)
        cov = longrun_cov_indicator(
            spec, cfg.v, cfg.xgrid, opts["pathlen"], opts["lagmax"], cfg.seed, kernel=k, burnin=cfg.burnin
        )
        rep.notes.append(f"n={n}: h={h!r}, time-weight mass {float(np.sum(w))!r}")
        _fclt_checks(rep, cfg, _prefix(cfg, n), stat, cov)
    return rep


# ---------------------------------------------------------------------------
# KDE rate


def kde_grids(n, h1, h2, cfg):
    opts = cfg.options
    lo, hi = opts["x_range"]
    c_n = opts["tail_q"] * n ** (1.0 / (2.0 * opts["tail_s"]))
    lo, hi = max(lo, -2 * c_n), min(hi, 2 * c_n)
    nx = int(math.ceil((hi - lo) / (opts["x_step"] * h2))) + 1
    nv = int(math.ceil((1.0 - h1) / (opts["v_step"] * h1))) + 1
    return np.linspace(lo, hi, nx), np.linspace(h1 / 2, 1 - h1 / 2, nv)


def _smoothed_normal(xgrid, h2, kernel, sd):
    """``int K(t) phi_sd(x + h2 t) dt`` by Gauss-Legendre on both halves of the support."""
    t, wt = np.polynomial.legendre.leggauss(32)
    nodes = np.concatenate([(t - 1) / 4, (t + 1) / 4])
    weights = np.concatenate([wt, wt]) / 4
    kv = kernel(nodes) * weights
    return norm.pdf((xgrid[:, None] + h2 * nodes[None, :]) / sd) @ kv / sd


def _kde_center(spec, cfg, n, h1, h2, xg, vg, rep):
    k = cfg.options["kernel"]
    sd = marginal_sd(spec, n, cfg.burnin)
    if sd is not None:
        rep.notes.append(f"n={n}: centring from exact Gaussian marginals")
        out = np.empty((vg.size, xg.size))
        i = np.arange(1, n + 1) / n
        levels = {}
        for a, v in enumerate(vg):
            tw = k((i - v) / h1) / (n * h1)
            keep = tw != 0
            acc = np.zeros(xg.size)
            for s, wsum in zip(*_group(sd[keep], tw[keep])):
                if s not in levels:
                    levels[s] = _smoothed_normal(xg, h2, k, s)
                acc += wsum * levels[s]
            out[a] = acc
        return out
    rep.use_stream(rng.PILOT, f"centring (n={n})")
    rep.notes.append(f"n={n}: centring from a pilot of {cfg.pilot_reps} paths")
    return _pilot_chunks(spec, cfg, n, lambda p: np.stack([kde(row, xg, vg, h1, h2, k) for row in p]))


def _group(values, weights):
    uniq, inv = np.unique(values, return_inverse=True)
    return uniq, np.bincount(inv, weights=weights)


def _map_threads(fn, items):
    threads = n_threads()
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_kde_rate(cfg):
    """Sup-error of the localized KDE along an n-ladder against the uniform rate."""
    rep = _new_report(cfg)
    rep.use_stream(rng.REPLICATE, "replicate paths")
    tol = cfg.tolerances
    k = cfg.options["kernel"]
    means, ses, rates, norms, side = [], [], [], [], []
    for entry in cfg.schedule:
        n, h1, h2 = entry["n"], entry["h1"], entry["h2"]
        spec = cfg.spec_for(n)
        xg, vg = kde_grids(n, h1, h2, cfg)
        center = _kde_center(spec, cfg, n, h1, h2, xg, vg, rep)
        paths = simulate_path(spec, n, cfg.seed, cfg.burnin, cfg.reps).values
        sups = np.array(_map_threads(lambda row: float(np.max(np.abs(kde(row, xg, vg, h1, h2, k) - center))), paths))
        rate = math.sqrt(math.log(n) / (n * h1 * h2))
        means.append(float(np.mean(sups)))
        ses.append(float(np.std(sups, ddof=1) / math.sqrt(sups.size)))
        rates.append(rate)
        norms.append(means[-1] / rate)
        side.append(math.log(n) / (n * h1 * h2))
        rep.notes.append(f"n={n}: grid {xg.size} x {vg.size}, h1={h1!r}, h2={h2!r}")
        rep.samples[f"sup_error[n={n}]"] = {"sup_error": sups}
    if any(b > a for a, b in zip(side, side[1:])) or max(side) > 1.0:
        rep.warnings.append(
            "log(n)/(n h1 h2) is not bounded and nonincreasing along the ladder: "
            + ", ".join(f"{s:.4g}" for s in side)
        )
    x = np.log(rates)
    y = np.log(means)
    var_y = (np.array(ses) / np.array(means)) ** 2
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    slope_se = float(math.sqrt(np.sum(xc**2 * var_y)) / np.dot(xc, xc))
    rep.add(
        "rate_slope", slope, f"[{tol['slope_lo']!r}, {tol['slope_hi']!r}]",
        tol["slope_lo"] <= slope <= tol["slope_hi"], slope_se,
        {"log_rate": x, "log_mean_sup_error": y},
    )
    nse = np.array(ses) / np.array(rates)
    viol = sum(
        (b - a) > tol["violation_z"] * math.hypot(sa, sb)
        for a, b, sa, sb in zip(norms, norms[1:], nse, nse[1:])
    )
    rep.add(
        "normalized_trend_violations", viol, tol["violations"], viol <= tol["violations"], 0.0,
        {"normalized_sup_error": np.array(norms), "se": nse},
    )
    return rep


# ---------------------------------------------------------------------------
# variance bound scaling


def _class_grid(cfg, size):
    lo, hi = cfg.options["x_range"]
    return np.linspace(lo, hi, size)


def run_variance_bound_scaling(cfg):
    """E max_f |R_n^2(f) - E R_n^2(f)| for indicator classes against the finite-class bound."""
    rep = _new_report(cfg)
    rep.use_stream(rng.REPLICATE, "replicate paths")
    tol = cfg.tolerances
    opts = cfg.options
    spec = cfg.spec
    a = float(spec.coef(0.0)) if spec.family == "tvar1" else 0.0
    sig = spec.innovation.scale
    sd_stat = sig / math.sqrt(1.0 - a * a)
    # compatibility: indicator classes with s = 1/2 and moment order 1
    params = RateParams(s=0.5, L=(abs(a) * norm.pdf(0.0) / sig,), C_R=opts["c_r"], C_X=1.0)
    delta = delta_sequence(lambda k: ar1_gaussian_delta(a, k, params.moment, sig), params, 400)
    C_Delta = c_delta(params, opts["c_fbar"])
    sizes = opts["classes"]
    grids = {m: _class_grid(cfg, m) for m in sizes}
    mc = {m: [] for m in sizes}
    mc_se = {m: [] for m in sizes}
    bounds = {m: [] for m in sizes}
    ns = [e["n"] for e in cfg.schedule]
    for n in ns:
        X = simulate_path(dataclasses.replace(spec, n=n + 1), n + 1, cfg.seed, cfg.burnin, cfg.reps).values
        prev = X[:, :n]
        for m in sizes:
            g = grids[m]
            dev = np.empty((cfg.reps, g.size))
            for j, x in enumerate(g):
                Rn = np.mean(norm.cdf((x - a * prev) / sig), axis=1)
                dev[:, j] = np.abs(Rn - norm.cdf(x / sd_stat))
            worst = dev.max(axis=1)
            mc[m].append(float(np.mean(worst)))
            mc_se[m].append(float(np.std(worst, ddof=1) / math.sqrt(cfg.reps)))
            sigma = math.sqrt(float(np.max(norm.cdf(g / sd_stat))))
            bp = BoundParams(M=1.0, H=H_of(m), n=n, sigma=sigma, C_Delta=C_Delta)
            bounds[m].append(variance_bound(bp, delta, WeightProfile()).value)
    for m in sizes:
        q = np.array(mc[m])
        b = np.array(bounds[m])
        series = {"n": np.array(ns, float), "mc": q, "mc_se": np.array(mc_se[m]), "bound": b}
        if spec.family == "iid" or a == 0.0:
            worst = float(np.max(q))
            rep.add(f"degenerate_zero[F={m}]", worst, tol["zero"], worst <= tol["zero"], 0.0, series)
            continue
        ratio = q / b
        drift = float(ratio.max() / ratio.min())
        rel = np.array(mc_se[m]) / q
        se = drift * math.sqrt(rel[np.argmax(ratio)] ** 2 + rel[np.argmin(ratio)] ** 2)
        series["ratio"] = ratio
        rep.add(f"ratio_drift[F={m}]", drift, tol["drift"], drift < tol["drift"], se, series)
    for small, big in zip(sizes, sizes[1:]):
        diff = np.array(mc[big]) - np.array(mc[small])
        nested = np.all(np.isin(grids[small], grids[big]))
        if not nested:
            rep.warnings.append(f"class grid of size {small} is not contained in the one of size {big}")
        worst = float(np.min(diff))
        # shared grid points may differ by an ulp between the two linspace grids
        rep.add(
            f"superset_monotone[F={small}->{big}]", worst, -tol["zero"], worst >= -tol["zero"], 0.0,
            {"difference": diff},
        )
    return rep


# ---------------------------------------------------------------------------
# table sandwiches


def _sandwich(exact, closed, args):
    ratio = np.asarray(exact) / np.asarray(closed)
    width = float(ratio.max() / ratio.min())
    lx = np.log(args)
    lc = lx - lx.mean()
    slope = float(np.dot(lc, np.log(ratio)) / np.dot(lc, lc))
    return ratio, width, slope


def run_table_sandwich(cfg):
    """Exact q*, r and V_n against their closed forms over the configured decades."""
    rep = _new_report(cfg)
    tol = cfg.tolerances
    lo, hi = cfg.options["decades"]
    args = np.logspace(lo, hi, cfg.options["points"])
    for text in cfg.options["decays"]:
        d = DeltaSequence.parse(text)
        label = d.text() if d.kind != "explicit" else "zero"
        quantities = {
            "q_star": ([q_star(d, x) for x in args], [closed_q_star(d, x) for x in args]),
            "r": ([r_of_delta(d, x) for x in args], [closed_r(d, x) for x in args]),
            "v_norm": ([v_norm(f, d) for f in args], [closed_v(d, f) for f in args]),
        }
        for qty, (exact, closed) in quantities.items():
            ratio, width, slope = _sandwich(exact, closed, args)
            samples = {"argument": args, "exact": np.array(exact, float), "ratio": ratio}
            rep.add(f"{label}:{qty}:width", width, tol["width"], width < tol["width"], 0.0, samples)
            rep.add(f"{label}:{qty}:drift", abs(slope), tol["drift_slope"], abs(slope) < tol["drift_slope"])
    return rep


RUNNERS = {
    "FcltEdf": run_fclt_edf,
    "FcltLocalEdf": run_fclt_local_edf,
    "KdeRate": run_kde_rate,
    "VarianceBoundScaling": run_variance_bound_scaling,
    "TableSandwich": run_table_sandwich,
}


def run_experiment(cfg):
    t0 = time.perf_counter()
    rep = RUNNERS[cfg.name](cfg)
    rep.timing = time.perf_counter() - t0
    return rep
