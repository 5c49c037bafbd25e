import json

import pytest
import sympy as sp

import lxf
from laxforge import hierarchy as hy
from laxforge import numerics as nm
from laxforge import quasi as qs
from laxforge.series import ChargeSeries


def test_hierarchy_dnls_kn(capsys):
    assert lxf.run(["hierarchy", "--family", "dnls", "--n", "1", "--beta", "-1/2"]) == lxf.EXIT_OK
    out = capsys.readouterr().out
    assert "q[t] = " in out


def test_hierarchy_json_and_coeffs(capsys):
    assert lxf.run(["hierarchy", "--n", "2", "--alpha", "-1", "--format", "json"]) == lxf.EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["label"] == "NLS n=2"


def test_hierarchy_conjugate(capsys):
    assert lxf.run(["hierarchy", "--n", "2", "--conjugate"]) == lxf.EXIT_OK
    assert "q*" in capsys.readouterr().out


def test_signed_values_are_joined():
    assert lxf._join_signed(["--beta", "-1/4", "--n", "1"]) == ["--beta=-1/4", "--n", "1"]


@pytest.mark.parametrize("argv", [[], ["bogus"], ["hierarchy", "--n", "x"], ["hierarchy", "--alpha", "?"]])
def test_usage_errors(argv):
    assert lxf.run(argv) == lxf.EXIT_USAGE


def test_help_is_success():
    assert lxf.run(["--help"]) == lxf.EXIT_OK


def test_qid_matched(capsys):
    assert lxf.run(["qid", "--order", "2", "--matched", "--depth", "2"]) == lxf.EXIT_OK
    assert "parity-odd" in capsys.readouterr().out


def test_nhd_nls(capsys):
    assert lxf.run(["nhd", "--system", "nls"]) == lxf.EXIT_OK
    out = capsys.readouterr().out
    assert "g1[x]" in out
    assert "closed equation of order 4" in out


def test_nhd_kn_resolve(capsys):
    assert lxf.run(["nhd", "--system", "kn", "--resolve"]) == lxf.EXIT_OK
    assert "u[xt] = " in capsys.readouterr().out


def test_nhd_cll_resolve_fails(capsys):
    assert lxf.run(["nhd", "--system", "cll", "--resolve"]) == lxf.EXIT_FAIL


def test_simulate_writes_outputs(tmp_path, capsys):
    csv = tmp_path / "q.csv"
    snap = tmp_path / "final.bin"
    code = lxf.run(["simulate", "--N", "128", "--tend", "0.1", "--every", "5",
                    "--out", str(csv), "--snapshot", str(snap)])
    assert code == lxf.EXIT_OK
    assert csv.exists() and snap.exists()
    assert "Q1" in capsys.readouterr().out


def test_simulate_dnls_records_dnls_charges(tmp_path):
    csv = tmp_path / "kn.csv"
    code = lxf.run(["simulate", "--system", "kn", "--N", "128", "--tend", "0.05", "--dt", "0.005",
                    "--every", "1", "--out", str(csv)])
    assert code == lxf.EXIT_OK
    series = ChargeSeries.read_csv(str(csv))
    assert "Q0" in series.names
    grid = nm.Grid(128, 40.0)
    mass = qs.to_qr(qs.lax_abelianization(hy.DNLS, 5, beta=sp.Rational(-1, 2)).charge(0))
    expected = nm.compile_density(mass, grid).integral(nm.bright_soliton(grid))
    assert series.charges["Q0"][0] == pytest.approx(expected, rel=1e-9)


def test_simulate_weighted_nls_reports_an_anomaly(tmp_path):
    csv = tmp_path / "eps.csv"
    code = lxf.run(["simulate", "--gaussian", "--eps", "0.06", "--no-dealias", "--N", "256", "--L", "30",
                    "--tend", "0.3", "--every", "1", "--out", str(csv)])
    assert code == lxf.EXIT_OK
    series = ChargeSeries.read_csv(str(csv))
    assert series.max_anomaly("Q3") > 1e-6
    assert series.max_anomaly("Q1") == 0
    assert series.max_residual("Q3") < 1e-2 * series.max_anomaly("Q3")


@pytest.mark.parametrize("grades", [["-2"], ["-1", "-3"], ["-1", "-1"]])
def test_nhd_rejects_grade_gaps(grades, capsys):
    assert lxf.run(["nhd", "--system", "nls", "--grades", *grades]) == lxf.EXIT_USAGE
    assert "without gaps" in capsys.readouterr().out


def test_nhd_depth_follows_the_grades(capsys):
    assert lxf.run(["nhd", "--system", "nls", "--grades", "-2", "-1"]) == lxf.EXIT_OK
    assert "closed equation of order 5" in capsys.readouterr().out


def test_nhd_dnls_grades_are_fixed():
    assert lxf.run(["nhd", "--system", "kn", "--grades", "-1"]) == lxf.EXIT_USAGE
    assert lxf.run(["nhd", "--system", "kn", "--grades", "0", "-1", "-2"]) == lxf.EXIT_OK


def test_simulate_bad_grid():
    assert lxf.run(["simulate", "--N", "100", "--tend", "0.1"]) == lxf.EXIT_FAIL


def test_verify_exit_codes(golden_tmp):
    assert lxf.run(["verify", "--skip-numerics", "--only", "golden: DNLS"]) == lxf.EXIT_OK
    (golden_tmp / "dnls.json").write_text("{}")
    assert lxf.run(["verify", "--skip-numerics", "--only", "golden: DNLS"]) == lxf.EXIT_FAIL
