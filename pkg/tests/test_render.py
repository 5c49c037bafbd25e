import json

import pytest

from laxforge import hierarchy as hy
from laxforge import nhd as nh
from laxforge import quasi as qs
from laxforge import render
from laxforge.diffpoly import I, parse_text


def test_poly_text_conjugate():
    p = parse_text("I*q[xx] + q**2*r")
    assert "q*" in render.poly_text(p, conj=True)
    assert "r" not in render.poly_text(p, conj=True)
    assert render.poly(parse_text("0*q")) == "0"


def test_poly_latex_uses_subscripts():
    out = render.poly_latex(parse_text("q[xx]"))
    assert "xx" in out and "[" not in out


def test_unknown_format():
    with pytest.raises(ValueError):
        render.poly(parse_text("q"), "yaml")


def test_eom_formats():
    eom = hy.nls_eom(2, hy.nls_coeffs(2, alpha=-I))
    assert render.eom(eom).startswith("q[t] = ")
    assert render.eom(eom, render.LATEX).startswith("\\begin{aligned}")
    data = json.loads(render.eom(eom, render.JSON))
    assert data["lhs"] == ["q[t]", "r[t]"]
    assert parse_text(data["rhs"][0]) == eom.q_t


def test_conjugate_display_of_kn():
    kn = hy.dnls_reduce(hy.dnls_eom(1), "-1/2")
    out = render.conjugate_display(kn)
    assert out.startswith("q[t] = ")
    assert "q*" in out


def test_coeff_table_json():
    data = json.loads(render.coeff_table(hy.nls_coeffs(1), render.JSON))
    assert data["family"] == "nls"
    assert [e["m"] for e in data["entries"]] == [0, 1, 2]


def test_anomaly_report_json_shape():
    _, report = qs.qid_deform(hy.nls_coeffs(2), qs.QidSpec.generic(2).matched())
    abel = qs.abelianize(hy.NLS, 2)
    data = json.loads(render.anomaly_report(report, render.JSON, abel, orders=[2]))
    assert len(data) == 1
    entry = data[0]
    assert set(entry) >= {"order", "anomaly_density", "parity", "total_derivative", "charges", "alphas"}
    assert entry["verdict"] == qs.VERDICT_ODD


def test_nhd_text_lists_constraints():
    out = render.nhd(nh.kn_nhd())
    assert "vanishing: m1, m2, a, f1, f2" in out
    assert "t-dependent only: b" in out
