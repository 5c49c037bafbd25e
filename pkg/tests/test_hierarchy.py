import pytest
import sympy as sp

from laxforge import hierarchy as hy
from laxforge.diffpoly import I, JetVar, parse_text, q, r


def test_nls_coefficients_low_orders():
    t = hy.nls_coeffs(3)
    assert t.b(1) == parse_text("I*alpha*q")
    assert t.a(2) == parse_text("(1/2)*alpha*q*r")
    assert t.c(3) == parse_text("-(I/4)*alpha*r[xx] + (I/2)*alpha*q*r**2")
    assert t.a(4) == parse_text("-(1/8)*alpha*(q*r[xx] - q[x]*r[x] + q[xx]*r) + (3/8)*alpha*q**2*r**2")
    assert hy.check_nls_recurrences(t) == []


def test_nls_eom_with_numeric_alpha():
    eom = hy.nls_eom(2, hy.nls_coeffs(2, alpha=-I))
    assert eom.q_t == parse_text("(I/2)*q[xx] - I*q**2*r")
    assert eom.r_t == parse_text("-(I/2)*r[xx] + I*q*r**2")


def test_nls_eom_needs_positive_order():
    with pytest.raises(ValueError):
        hy.nls_eom(0)
    with pytest.raises(ValueError):
        hy.nls_coeffs(-1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_nls_zero_curvature(n):
    _, L, M, eom = hy.nls_system(n)
    assert hy.on_shell_curvature(L, M, eom).is_zero


def test_dnls_coefficients_and_recurrences():
    t = hy.dnls_coeffs(1)
    assert t.b(3) == parse_text("I*q[x] - 2*beta*q**2*r")
    assert t.a(2) == parse_text("-I*q*r")
    assert hy.check_dnls_recurrences(t) == []


@pytest.mark.parametrize("gauge", [hy.TRACELESS, hy.LOWER])
def test_dnls_zero_curvature_both_gauges(gauge):
    _, L, M, eom = hy.dnls_system(1, gauge=gauge)
    assert hy.on_shell_curvature(L, M, eom).is_zero


@pytest.mark.parametrize("beta,label,q_t", [
    ("-1/2", "KN", "I*q[xx] + 2*q*q[x]*r + q**2*r[x]"),
    ("-1/4", "CLL", "I*q[xx] + q*q[x]*r"),
    ("0", "GI", "I*q[xx] - q**2*r[x] + (I/2)*q**3*r**2"),
])
def test_dnls_reductions(beta, label, q_t):
    red = hy.dnls_reduce(hy.dnls_eom(1), sp.Rational(beta))
    assert red.label == label
    assert red.q_t == parse_text(q_t)


def test_reduction_label_falls_back():
    assert hy.reduction_label(sp.Rational(1, 3)) == "DNLS beta=1/3"


def test_dnls_notes_carry_corrections():
    eom = hy.dnls_eom(1)
    assert hy.ERRATUM_R_FACTOR in eom.notes


def test_eom_pair_rejects_time_jets():
    with pytest.raises(ValueError):
        hy.EomPair(q(0, 1), r())


def test_eom_residuals_and_params():
    eom = hy.nls_eom(2)
    res_q, _ = eom.residuals()
    assert JetVar(q, 0, 1) in res_q.jets()
    sub = eom.subs_params({"alpha": -I}, label="NLS")
    assert sub.label == "NLS"
    assert not sub.q_t.params()


def test_build_lax_unknown_family():
    with pytest.raises(ValueError):
        hy.build_lax("kdv", 1)
