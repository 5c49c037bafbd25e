import numpy as np

from laxforge import hierarchy as hy
from laxforge import verify as vf
from laxforge.diffpoly import parse_text


def test_proportional():
    a = parse_text("2*q*r[x] - 4*I*q[xx]")
    assert vf.proportional(a, parse_text("q*r[x] - 2*I*q[xx]"))
    assert not vf.proportional(a, parse_text("q*r[x] + 2*I*q[xx]"))
    assert vf.proportional(parse_text("0*q"), parse_text("0*r"))


def test_golden_checks_pass(golden_tmp):
    report = vf.run(seed=7, skip_numerics=True, only=["golden: NLS", "golden: DNLS", "golden: QID"])
    assert [r.name for r in report.results] == [
        "golden: NLS coefficients", "golden: DNLS and reductions", "golden: QID anomalies"]
    assert report.ok, report.failures()


def test_corrupted_golden_fails(golden_tmp):
    path = golden_tmp / "nls_coeffs.json"
    path.write_text(path.read_text().replace('"I*alpha*q"', '"2*I*alpha*q"'))
    report = vf.run(skip_numerics=True, only=["golden: NLS"])
    assert not report.ok
    assert report.failures()[0].detail.startswith("b_1")


def test_missing_golden_is_a_failure(tmp_path, monkeypatch):
    monkeypatch.setenv("LAXFORGE_GOLDEN_DIR", str(tmp_path))
    report = vf.run(skip_numerics=True, only=["golden: abelianization"])
    assert report.failures()[0].status == vf.FAIL


def test_random_eval_is_seeded():
    _, L, M, eom = hy.nls_system(2)
    a = vf.random_eval_curvature(L, M, eom, np.random.default_rng(3), 4)
    b = vf.random_eval_curvature(L, M, eom, np.random.default_rng(3), 4)
    assert a == b
    assert a < 1e-10


def test_report_rows_carry_the_seed():
    report = vf.run(seed=11, skip_numerics=True, only=["recurrences"])
    assert report.rows()[0][:3] == [11, "recurrences", vf.PASS]


def test_random_eval_on_dnls(rng):
    _, L, M, eom = hy.dnls_system(1)
    assert vf.random_eval_curvature(L, M, eom, rng, 4) < 1e-10


def test_deformed_runs_resolve_a_nonzero_anomaly():
    base, weighted, scaled = vf.balance_runs(0.06)
    assert base.series.max_anomaly("Q3") == 0
    assert base.series.max_residual("Q3") < 1e-5
    for run in (weighted, scaled):
        gamma = run.series.max_anomaly("Q3")
        assert gamma > 1e-4, run.label
        assert run.series.max_residual("Q3") < 1e-2 * gamma, run.label
        assert run.series.flow_mismatch("Q3") < 1e-2 * gamma, run.label


def test_balance_check_passes():
    report = vf.run(only=["numerics: balance"])
    assert report.ok, report.failures()
