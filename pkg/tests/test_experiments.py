import csv
import math
from pathlib import Path

import numpy as np
import pytest

from lsemp import io
from lsemp.cli import main
from lsemp.estimators import localized_edf_batch, time_weights
from lsemp.experiments import (
    ConfigError,
    bandwidth_rule,
    load_config,
    parse_config,
    run_experiment,
    write_report,
)
from lsemp.rates import BoundParams, DeltaSequence, H_of, WeightProfile, r_of_delta, variance_bound

SMALL_FCLT = """
[experiment]
name = FcltEdf
seed = 21
reps = 100
limit_draws = 2000
longrun_pathlen = 50000

[process]
family = tvar1
coef = 0.4

[grids]
x = -0.5, 0.5

[schedule]
n = 300
"""


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_bandwidth_rules():
    assert bandwidth_rule("n^(-1/3)")(1000) == pytest.approx(0.1)
    assert bandwidth_rule("0.5*n^(-0.2)")(32) == pytest.approx(0.25)
    assert bandwidth_rule("0.25")(10**6) == 0.25
    with pytest.raises(ConfigError):
        bandwidth_rule("log(n)")


def test_parse_fills_defaults_and_schedule():
    cfg = parse_config("[experiment]\nname = fcltlocaledf\n[process]\nfamily = tvar1\ncoef = affine:0.2,0.6\n"
                       "[grids]\nx = linspace(-1, 1, 5)\n[schedule]\nn = 1000, 8000\nh = n^(-1/3)\n")
    assert cfg.name == "FcltLocalEdf"
    assert np.allclose(cfg.xgrid, [-1, -0.5, 0, 0.5, 1])
    assert [e["h"] for e in cfg.schedule] == pytest.approx([0.1, 0.05])
    assert cfg.pilot_reps == 50 * cfg.reps
    assert cfg.tolerances["var_rel"] == 0.20


@pytest.mark.parametrize(
    "text, match",
    [
        ("[experiment]\nseed = 1\n", "name is required"),
        ("[experiment]\nname = nope\n", "unknown experiment"),
        ("[experiment]\nname = FcltEdf\n[extra]\na = 1\n", "unknown section"),
        ("[experiment]\nname = FcltEdf\ncolour = red\n", "unknown key"),
        ("[experiment]\nname = FcltEdf\n[schedule]\nn = 200, 100\n", "strictly increasing"),
        ("[experiment]\nname = FcltEdf\npilot_reps = 1\n", "at least 50"),
        ("[experiment]\nname = FcltEdf\nreps = 20\n", "at least 100"),
        ("[experiment]\nname = FcltEdf\n[process]\nfamily = tvar1\ncoef = affine:0.2,0.6\n", "stationary"),
        ("[experiment]\nname = FcltLocalEdf\n[grids]\nv = 0.02\n[schedule]\nh = 0.2\n", "boundary"),
        ("[experiment]\nname = FcltLocalEdf\nkernel = rectangular\n[schedule]\nh = 0.2\n", "Lipschitz"),
        ("[experiment]\nname = KdeRate\n[schedule]\nn = 100, 200\nh1 = 0.2\n", "h1 and h2"),
        ("[experiment]\nname = VarianceBoundScaling\n[process]\nfamily = tvarch1\n[schedule]\nn = 1, 2\n", "AR"),
        ("[experiment]\nname = TableSandwich\n[grids]\ndecays = poly:1,0.5\n", "bad decay"),
        ("[experiment]\nname = FcltEdf\n[process]\nfamily = garch\n", "unknown family"),
        ("not a config", "malformed"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_config_names_the_path(tmp_path):
    missing = tmp_path / "nowhere.cfg"
    with pytest.raises(FileNotFoundError, match="nowhere.cfg"):
        load_config(missing)


def test_reports_are_reproducible_across_threads(tmp_path, monkeypatch):
    cfg = parse_config(SMALL_FCLT)
    monkeypatch.setenv("LSEMP_THREADS", "1")
    write_report(run_experiment(cfg), tmp_path / "a")
    monkeypatch.setenv("LSEMP_THREADS", "4")
    write_report(run_experiment(cfg), tmp_path / "b")
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a.keys() == b.keys() and a == b
    rows = list(csv.DictReader(open(tmp_path / "a" / "report.csv")))
    assert rows and set(rows[0]) == {"check", "statistic", "threshold", "passed", "mc_se"}
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert "assumptions:" in summary and "disjoint: yes" in summary


def test_local_variance_does_not_depend_on_bandwidth():
    # iid: Var(sqrt(nh) sum_i w_i 1{X_i <= 0}) = nh sum_i w_i^2 / 4, close to |K|^2 / 4 for any small h
    n, R = 4000, 4000
    X = np.random.default_rng(3).standard_normal((R, n))
    sds = []
    for h in (0.2, 0.1):
        w = time_weights(n, 0.5, h, "epanechnikov")
        exact = math.sqrt(n * h * np.sum(w**2) / 4)
        assert exact == pytest.approx(math.sqrt(1.2 / 4), rel=0.01)
        stat = math.sqrt(n * h) * localized_edf_batch(X, [0.0], 0.5, h)[:, 0]
        sd = stat.std(ddof=1)
        assert sd == pytest.approx(exact, rel=0.05)
        sds.append(sd)
    assert abs(sds[0] / sds[1] - 1) < 0.10


def test_block_term_scales_with_log_class_size():
    # at a fixed block length the term is q M^2 H / n and log 64 = 2 log 8
    d = DeltaSequence.poly(1, 2)
    terms = [
        variance_bound(BoundParams(M=1.0, H=H_of(m), n=1000, sigma=0.5, C_Delta=1.0), d, WeightProfile(), q=5)
        for m in (8, 64)
    ]
    assert terms[1].block_term / terms[0].block_term == pytest.approx(2.0, rel=1e-14)
    assert terms[1].r_term == terms[0].r_term and terms[1].beta_term == terms[0].beta_term


def test_cli_rates_matches_library(capsys):
    assert main(["rates", "--decay", "poly:1,2", "--op", "r", "--args", "0.001", "0.0001"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "op,arg,value"
    d = DeltaSequence.poly(1, 2)
    assert [float(line.split(",")[2]) for line in out[1:]] == [r_of_delta(d, 1e-3), r_of_delta(d, 1e-4)]


def test_cli_missing_config_exits_2(tmp_path, capsys):
    code = main(["experiment", "--config", str(tmp_path / "gone.cfg"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "gone.cfg" in capsys.readouterr().err


def test_cli_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[experiment]\nname = FcltEdf\npilot_reps = 1\n")
    assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "bad.cfg" in capsys.readouterr().err


def test_cli_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["rates", "--decay", "zero", "--op", "r", "--args", "1", "--bogus"])
    assert exc.value.code == 2


def test_cli_experiment_exit_code_follows_checks(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("[experiment]\nname = TableSandwich\n[grids]\ndecays = poly:1,2\npoints = 9\n")
    assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "ok")]) == 0
    strict = tmp_path / "s.cfg"
    strict.write_text(cfg.read_text() + "[tolerances]\nwidth = 1.0\n")
    assert main(["experiment", "--config", str(strict), "--out", str(tmp_path / "no")]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_simulate_and_edf_roundtrip(tmp_path, capsys):
    path = tmp_path / "p.csv"
    assert main(["simulate", "--family", "iid", "--n", "50", "--reps", "2", "--seed", "3", "--out", str(path)]) == 0
    assert main(["edf", "--path", str(path), "--replicate", "1", "--x", "0"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    values = io.read_paths(path)
    assert float(out[1].split(",")[1]) == pytest.approx(np.mean(values[1] <= 0))


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_iid_fclt_against_closed_form():
    rep = run_experiment(load_config(CONFIGS / "fclt_iid.cfg"))
    assert rep.passed
    stat = rep.samples["var[x=0]"]["statistic"]
    # G(0)(1 - G(0)) = 1/4 for iid data
    assert abs(np.var(stat, ddof=1) / 0.25 - 1) < 0.15


def test_ar_fclt_cross_covariance():
    rep = run_experiment(load_config(CONFIGS / "fclt_ar.cfg"))
    rows = {r.check: r for r in rep.rows}
    row = rows["cov[x=0,y=1]"]
    assert row.passed and row.statistic <= 3
    cov = rep.samples["cov[x=0,y=1]"]
    assert np.cov(cov["x"], cov["y"])[0, 1] > 0


def test_variance_bound_superset_increases():
    cfg = parse_config(
        "[experiment]\nname = VarianceBoundScaling\nseed = 3\nreps = 100\n"
        "[process]\nfamily = tvar1\ncoef = 0.5\n[grids]\nclasses = 8, 64\n[schedule]\nn = 200, 400\n"
    )
    rep = run_experiment(cfg)
    rows = {r.check: r for r in rep.rows}
    mono = rows["superset_monotone[F=8->64]"]
    assert mono.passed and mono.statistic >= 0
    assert not rep.warnings
