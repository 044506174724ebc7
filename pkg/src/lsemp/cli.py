"""Command-line entry point: ``lsemp <subcommand> ...``."""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .dependence import delta_profile, fit_decay
from .estimators import edf, kde, localized_edf
from .experiments import CONFIG_KEYS, ConfigError, load_config, run_experiment, write_report
from .limit import longrun_cov_indicator, sample_gaussian_limit
from .process import CoefFunction, Innovation, ProcessSpec, simulate_path, simulate_stationary
from .rates import DeltaSequence, H_of, beta, psi, q_star, r_of_delta, v_norm


def _grid(text):
    return np.array([float(v) for v in text.split(",") if v.strip()])


def _process_args(p):
    g = p.add_argument_group("process")
    g.add_argument("--family", default="tvar1", choices=["iid", "tvar1", "tvma", "tvarch1"])
    g.add_argument("--coef", default="0.5", help="coefficient curve, e.g. affine:0.2,0.6")
    g.add_argument("--innovation", default="gaussian", help="gaussian | uniform | student_t:df")
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--ma-decay", default="poly", choices=["poly", "geom"])
    g.add_argument("--ma-rate", type=float, default=3.0)
    g.add_argument("--arch0", default="1")
    g.add_argument("--arch1", default="0.3")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--burnin", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)


def _spec(a):
    kind, _, df = a.innovation.partition(":")
    innov = Innovation(kind, float(df) if df else 0.0, a.scale)
    if a.family == "iid":
        return ProcessSpec.iid(a.n, innov)
    if a.family == "tvar1":
        return ProcessSpec.tvar1(CoefFunction.parse(a.coef), a.n, innov)
    if a.family == "tvma":
        return ProcessSpec.tvma(CoefFunction.parse(a.coef), a.ma_decay, a.ma_rate, a.n, innov)
    return ProcessSpec.tvarch1(a.arch0, a.arch1, a.n, innov)


def _writer(path):
    fh = open(path, "w", newline="") if path else sys.stdout
    return fh, csv.writer(fh, lineterminator="\n")


def cmd_simulate(a):
    spec = _spec(a)
    if a.stationary is not None:
        ens = simulate_stationary(spec, a.stationary, seed=a.seed, burnin=a.burnin, reps=a.reps)
    else:
        ens = simulate_path(spec, seed=a.seed, burnin=a.burnin, reps=a.reps)
    if a.format == "bin":
        if not a.out:
            raise SystemExit("binary output needs --out")
        io.write_binary(a.out, ens.values)
    elif a.out:
        io.write_csv(a.out, ens.values)
    else:
        io.write_csv(sys.stdout, ens.values)
    return 0


def cmd_depmeasure(a):
    prof = delta_profile(_spec(a), a.kmax, a.nu, a.reps, a.seed, a.burnin)
    fh, w = _writer(a.out)
    w.writerow(["lag", "delta", "se"])
    for k, d, s in zip(prof.lags, prof.delta_hat, prof.se):
        w.writerow([int(k), repr(float(d)), repr(float(s))])
    if a.fit:
        model = fit_decay(prof, a.fit)
        print(f"# fit {model.kind}: c={model.c!r} rate={model.rate!r} residual={model.fit_residual!r}", file=sys.stderr)
    return 0


RATE_OPS = {
    "beta": lambda d, x: float(beta(d, int(x))),
    "qstar": lambda d, x: float(q_star(d, x)),
    "r": lambda d, x: r_of_delta(d, x),
    "vnorm": lambda d, x: v_norm(x, d),
    "psi": lambda d, x: float(psi(x)),
    "H": lambda d, x: H_of(int(x)),
}


def cmd_rates(a):
    d = DeltaSequence.parse(a.decay)
    fh, w = _writer(None)
    w.writerow(["op", "arg", "value"])
    for x in a.args:
        w.writerow([a.op, repr(x), repr(RATE_OPS[a.op](d, x))])
    return 0


def _load_path(a):
    values = io.read_paths(a.path)
    if not 0 <= a.replicate < values.shape[0]:
        raise SystemExit(f"replicate {a.replicate} not in file (has {values.shape[0]})")
    return values[a.replicate]


def cmd_edf(a):
    x = _load_path(a)
    grid = _grid(a.x)
    if a.v is not None:
        res = localized_edf(x, grid, a.v, a.h, a.kernel)
        rows = [[repr(float(g)), repr(a.v), repr(float(v))] for g, v in zip(grid, res.values)]
        head = ["x", "v", "value"]
    else:
        res = edf(x, grid)
        rows = [[repr(float(g)), repr(float(v))] for g, v in zip(grid, res.values)]
        head = ["x", "value"]
    fh, w = _writer(a.out)
    w.writerow(head)
    w.writerows(rows)
    return 0


def cmd_kde(a):
    x = _load_path(a)
    xg, vg = _grid(a.x), _grid(a.v)
    g = kde(x, xg, vg, a.h1, a.h2, a.kernel)
    fh, w = _writer(a.out)
    w.writerow(["x", "v", "value"])
    for i, v in enumerate(vg):
        for j, xv in enumerate(xg):
            w.writerow([repr(float(xv)), repr(float(v)), repr(float(g[i, j]))])
    return 0


def cmd_limit(a):
    grid = _grid(a.x)
    cov = longrun_cov_indicator(_spec(a), a.v, grid, a.pathlen, a.lagmax, a.seed, a.kernel, a.burnin)
    sample = sample_gaussian_limit(cov, a.draws, a.seed)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "covariance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x"] + [repr(float(g)) for g in grid])
        for g, row in zip(grid, cov.matrix):
            w.writerow([repr(float(g))] + [repr(float(v)) for v in row])
    with open(out / "sup.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sup"])
        w.writerows([[repr(float(s))] for s in sample.sup_stats])
    return 0


def cmd_experiment(a):
    try:
        cfg = load_config(a.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {a.config}: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    write_report(report, a.out)
    for r in report.rows:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check} statistic={r.statistic:.6g} threshold={r.threshold}")
    print(f"# {cfg.name} finished in {report.timing:.1f} s", file=sys.stderr)
    return 0 if report.passed else 1


def _config_help():
    lines = ["config keys:"]
    for section, keys in CONFIG_KEYS.items():
        lines.append(f"  [{section}]")
        lines += [f"    {k}: {v}" for k, v in keys.items()]
    lines.append("environment: LSEMP_THREADS sets the worker thread count (default 1)")
    return "\n".join(lines)


def build_parser():
    p = argparse.ArgumentParser(prog="lsemp", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate replicate paths")
    _process_args(s)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--stationary", type=float, default=None, metavar="U", help="freeze coefficients at U")
    s.add_argument("--format", choices=["csv", "bin"], default="csv")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("depmeasure", help="estimate the dependence measure profile")
    _process_args(s)
    s.add_argument("--kmax", type=int, default=8)
    s.add_argument("--nu", type=float, default=2.0)
    s.add_argument("--reps", type=int, default=10_000)
    s.add_argument("--fit", choices=["poly", "exp"], default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_depmeasure)

    s = sub.add_parser("rates", help="evaluate rate-calculus functions")
    s.add_argument("--decay", required=True, help="poly:c,alpha | exp:c,rho | zero | explicit:v1,v2,...")
    s.add_argument("--op", required=True, choices=sorted(RATE_OPS))
    s.add_argument("--args", required=True, type=float, nargs="+")
    s.set_defaults(func=cmd_rates)

    for name, helptext in (("edf", "plain or localized EDF of a stored path"), ("kde", "localized KDE of a stored path")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--path", required=True, help="CSV or binary path file")
        s.add_argument("--replicate", type=int, default=0)
        s.add_argument("--x", required=True, help="comma-separated grid; write --x=-1,0,1 for negative values")
        s.add_argument("--kernel", default="epanechnikov")
        s.add_argument("--out", default=None)
        if name == "edf":
            s.add_argument("--v", type=float, default=None)
            s.add_argument("--h", type=float, default=None)
            s.set_defaults(func=cmd_edf)
        else:
            s.add_argument("--v", required=True, help="comma-separated rescaled times")
            s.add_argument("--h1", type=float, required=True)
            s.add_argument("--h2", type=float, required=True)
            s.set_defaults(func=cmd_kde)

    s = sub.add_parser("limit", help="long-run covariance and Gaussian limit sup statistics")
    _process_args(s)
    s.add_argument("--v", type=float, default=0.5)
    s.add_argument("--x", required=True, help="comma-separated grid; write --x=-1,0,1 for negative values")
    s.add_argument("--pathlen", type=int, default=100_000)
    s.add_argument("--lagmax", type=int, default=None)
    s.add_argument("--kernel", default=None)
    s.add_argument("--draws", type=int, default=10_000)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser(
        "experiment", help="run a configured experiment",
        epilog=_config_help(), formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "h", "unset") is None and getattr(args, "v", None) is not None and args.func is cmd_edf:
        print("error: --v needs --h", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
