import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from sphcalc.cli import main
from sphcalc.space_model import read_csv, write_csv
from sphcalc.spherical_transform import default_rgrid
from sphcalc.suite import (
    CHECKS,
    PLOT_KINDS,
    SuiteConfig,
    SymbolSpec,
    audit_pipeline,
    export_plots,
    run_check,
    run_suite,
    select_checks,
)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def gaussian_csv(tmp_path):
    rg = default_rgrid()
    p = tmp_path / "f.csv"
    write_csv(p, rg.nodes, np.exp(-(rg.nodes**2)))
    return p


def test_registry_covers_seventeen_criteria():
    assert len(CHECKS) == 17
    assert select_checks(["transform"]) == ["roundtrip", "plancherel", "functional_equation", "eigenrelation"]
    with pytest.raises(ValueError):
        select_checks(["nonsense"])


def test_config_roundtrip_and_validation(tmp_path):
    cfg = SuiteConfig(d=2, tolerances={"hunt": 1e-3})
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"d": 2, "tolerances": {"hunt": 1e-3}}))
    loaded = SuiteConfig.load(p)
    assert loaded.d == 2 and loaded.tolerances["hunt"] == 1e-3
    assert loaded.tolerances["roundtrip"] == 1e-6
    assert SuiteConfig.from_dict(cfg.to_dict()).d == 2
    with pytest.raises(ValueError):
        SuiteConfig.from_dict({"dimension": 3})


def test_suite_is_deterministic():
    cfg = SuiteConfig(only=["transform", "negdef"])
    a, b = run_suite(cfg), run_suite(cfg)
    assert [r.value for r in a.results] == [r.value for r in b.results]
    assert a.passed and a.exit_code == 0


def test_fault_injection_fails_transform_checks():
    m = run_suite(SuiteConfig(only=["roundtrip", "plancherel"], plancherel_scale_factor=2.0))
    assert not any(r.passed for r in m.results) and m.exit_code == 1


def test_crashing_check_is_a_failure(monkeypatch):
    import sphcalc.suite as suite

    def boom(cfg):
        raise RuntimeError("boom")

    monkeypatch.setitem(suite.CHECKS, "negdef", ("symbol", boom))
    res = run_check("negdef", SuiteConfig())
    assert not res.passed and "boom" in res.error


def test_manifest_fields(tmp_path, runner):
    out = tmp_path / "m.json"
    sym = tmp_path / "s.json"
    sym.write_text(json.dumps({"d": 3}))
    r = runner.invoke(main, ["suite", "--only", "roundtrip", "--json", str(out), "--symbol", str(sym)])
    assert r.exit_code == 0, r.output
    data = json.loads(out.read_text())
    for key in ("config", "space", "calibration", "symbol_hash", "results", "seed", "environment", "wall_seconds", "passed"):
        assert key in data
    assert len(data["symbol_hash"]) == 64
    assert data["calibration"]["plancherel_scale"] == pytest.approx(2 / np.pi)
    assert "[PASS]" in r.output


def test_suite_list_and_bad_only(runner):
    r = runner.invoke(main, ["suite", "--list"])
    assert r.exit_code == 0 and "commutator" in r.output
    r = runner.invoke(main, ["suite", "--only", "nonsense"])
    assert r.exit_code == 2


def test_transform_roundtrip_cli(tmp_path, runner, gaussian_csv):
    fwd, back = tmp_path / "F.csv", tmp_path / "b.csv"
    assert runner.invoke(main, ["transform", "--input", str(gaussian_csv), "--output", str(fwd)]).exit_code == 0
    assert runner.invoke(main, ["transform", "--inverse", "--input", str(fwd), "--output", str(back)]).exit_code == 0
    x, f = read_csv(gaussian_csv)
    _, g = read_csv(back)
    assert np.max(np.abs(f - g)) < 1e-9


def test_transform_guard_exit_code(tmp_path, runner):
    rg = default_rgrid()
    p = tmp_path / "one.csv"
    write_csv(p, rg.nodes, np.ones(rg.n_points))
    r = runner.invoke(main, ["transform", "--input", str(p), "--output", str(tmp_path / "o.csv")])
    assert r.exit_code == 2 and "error" in r.output


def test_frac_laplacian_methods_agree(tmp_path, runner, gaussian_csv):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert runner.invoke(main, ["frac-laplacian", "--input", str(gaussian_csv), "--output", str(a)]).exit_code == 0
    r = runner.invoke(main, ["frac-laplacian", "--method", "subordination", "--input", str(gaussian_csv), "--output", str(b)])
    assert r.exit_code == 0
    assert np.max(np.abs(read_csv(a)[1] - read_csv(b)[1])) < 1e-3
    r = runner.invoke(main, ["frac-laplacian", "--method", "subordination", "--beta", "0.5", "--input", str(gaussian_csv), "--output", str(b)])
    assert r.exit_code == 2


def test_evolve_cli(tmp_path, runner, gaussian_csv):
    out = tmp_path / "e.csv"
    r = runner.invoke(main, ["evolve", "--psi", "killed:0.5", "--t", "2", "--input", str(gaussian_csv), "--output", str(out)])
    assert r.exit_code == 0, r.output
    assert np.allclose(read_csv(out)[1], np.exp(-1.0) * read_csv(gaussian_csv)[1], atol=1e-10)


def test_symbol_audit_exit_codes(tmp_path, runner):
    good, bad = tmp_path / "good.json", tmp_path / "bad.json"
    good.write_text(json.dumps({"d": 3}))
    bad.write_text(json.dumps({"d": 3, "kappa": 1.0}))
    report = tmp_path / "r.json"
    r = runner.invoke(main, ["symbol-audit", "--symbol", str(good), "--output", str(report)])
    assert r.exit_code == 0, r.output
    assert json.loads(report.read_text())["passed"] is True
    r = runner.invoke(main, ["symbol-audit", "--symbol", str(bad)])
    assert r.exit_code == 1


def test_audit_pipeline_short_circuits():
    rep = audit_pipeline(SymbolSpec(d=3, kappa_factor=0.1))
    assert not rep.passed
    assert rep.diagnostics["failure"]["stage"] == "smallness"
    assert set(rep.skipped) == {"alpha0", "coercivity", "resolvent"}


def test_audit_pipeline_records_flagged_growth():
    # a pure killing exponent has no growth; that is reported, not fatal
    rep = audit_pipeline(SymbolSpec(d=3, psi={"kind": "killed", "c": 0.3}, u=None))
    assert rep.diagnostics["growth"]["flagged"] is True and rep.r_exp == 0.0


def test_psdo_apply_and_solve_cli(tmp_path, runner, gaussian_csv):
    sym = tmp_path / "s.json"
    sym.write_text(json.dumps({"d": 3, "kappa": 3e8}))
    out = tmp_path / "q.csv"
    assert runner.invoke(main, ["psdo-apply", "--symbol", str(sym), "--input", str(gaussian_csv), "--output", str(out)]).exit_code == 0
    out2 = tmp_path / "u.csv"
    r = runner.invoke(main, ["solve", "--symbol", str(sym), "--n-basis", "128", "--input", str(gaussian_csv), "--output", str(out2)])
    assert r.exit_code == 0, r.output
    assert np.all(np.isfinite(read_csv(out2)[1]))
    other = tmp_path / "s2.json"
    other.write_text(json.dumps({"d": 2}))
    assert runner.invoke(main, ["psdo-apply", "--symbol", str(other), "--input", str(gaussian_csv), "--output", str(out)]).exit_code == 2


@pytest.mark.parametrize("kind", ["psi", "heat"])
def test_export_plots_columns(tmp_path, kind):
    p = export_plots(kind, tmp_path / f"{kind}.csv")
    rows = list(csv.reader(open(p)))
    header = rows[0]
    assert len(header) == (7 if kind == "psi" else 4)
    assert all(len(r) == len(header) for r in rows[1:])


def test_export_plots_unknown_kind(tmp_path, runner):
    with pytest.raises(ValueError):
        export_plots("nope", tmp_path / "x.csv")
    r = runner.invoke(main, ["export-plots", "nope", "--output", str(tmp_path / "x.csv")])
    assert r.exit_code == 2
    assert set(PLOT_KINDS) == {"psi", "heat", "solution", "residual"}
