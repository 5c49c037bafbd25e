import pytest
import sympy as sp

from laxforge import hierarchy as hy
from laxforge import quasi as qs
from laxforge.diffpoly import (
    ALPHA, I, KAPPA, ODD, ZERO, NotExact, d_t, d_x, integrate_x, parse_text, q, r, variational_derivative,
)


def test_undeformed_constants():
    table = hy.nls_coeffs(4)
    consts = qs.undeformed_constants(table, qs.nls_hamiltonians(4))
    want = [I * ALPHA, -ALPHA / 4, I * ALPHA / 2, -ALPHA / 8]
    for (bt, gt), w in zip(consts, want):
        assert sp.expand(bt - w) == 0
        assert sp.expand(gt - w) == 0


def test_undeformed_spec_has_no_anomaly():
    table = hy.nls_coeffs(4)
    _, report = qs.qid_deform(table, qs.QidSpec.undeformed(4, table))
    assert report.is_zero


def test_generic_anomalies_are_even_at_odd_orders():
    _, report = qs.qid_deform(hy.nls_coeffs(3), qs.QidSpec.generic(3))
    verdicts = qs.classify(report)
    assert verdicts[1][0] == qs.VERDICT_EVEN
    assert verdicts[3][0] == qs.VERDICT_EVEN
    assert report.density(1) == parse_text("(gamma1 - beta1)*q*r")


def test_matched_anomaly_is_odd_total_derivative():
    _, report = qs.qid_deform(hy.nls_coeffs(2), qs.QidSpec.generic(2).matched())
    verdict, exact = qs.classify(report)[2]
    assert verdict == qs.VERDICT_ODD
    assert exact
    assert report.density(1).is_zero


def test_spec_and_table_must_agree():
    with pytest.raises(ValueError):
        qs.qid_deform(hy.nls_coeffs(2), qs.QidSpec.generic(3))


def test_missing_order_raises_keyerror():
    _, report = qs.qid_deform(hy.nls_coeffs(1), qs.QidSpec.generic(1))
    with pytest.raises(KeyError):
        report.density(5)


def test_nls_abelianization_first_grades():
    table = qs.abelianize(hy.NLS, 2)
    assert table.xi(1) == (ZERO, parse_text("-2*R"))
    assert table.charge(0) == parse_text("(I/2)*phi[x]")
    assert table.charge(-1) == parse_text("I*kappa*R**2")
    assert table.alpha(2) == parse_text("kappa*R**2")


def test_charges_render_in_q_r():
    dens = dict(qs.charges(hy.NLS, 2))
    assert dens[-1] == (q() * r()).scale(I)


def test_to_qr_keeps_odd_powers():
    p = parse_text("kappa*R**3*phi[x]")
    assert qs.to_qr(p) == parse_text("q*r*R*phi[x]")
    assert qs.to_qr(parse_text("R[x]**2")) == parse_text("R[x]**2")
    assert KAPPA in parse_text("kappa*R").params()


def test_anomaly_alpha_products_start_with_the_density():
    table = qs.abelianize(hy.NLS, 2)
    X = parse_text("q*r[x] - r*q[x]")
    prods = dict(qs.anomaly_alpha_products(X, table))
    # b^0 = s3/2 doubles the s3 coefficient
    assert prods[0] == X.scale(2)
    assert prods[1].is_zero


def test_lax_abelianization_is_polynomial_in_q_r():
    table = qs.lax_abelianization(hy.NLS, 4)
    assert table.charge(-1) == (q() * r()).scale(I)
    assert table.alpha(0).constant_value() == 1
    assert table.alpha(1).is_zero
    assert table.alpha(2) == parse_text("(1/2)*q*r")
    for _, c in table.charges:
        assert KAPPA not in c.params()


def test_dnls_lax_abelianization_has_a_mass_charge():
    table = qs.lax_abelianization(hy.DNLS, 3, beta=sp.Rational(-1, 2))
    mass = table.charge(0)
    assert {j.field.name for j in mass.jets()} == {"q", "r"}
    assert not mass.params()


def test_scaled_coupling_flow_curvature_is_pure_sigma3():
    flow = qs.qid_flow(2, sp.Rational(3, 2))
    a2 = hy.nls_coeffs(2, alpha=-I).a(2)
    assert flow.anomaly == d_x(a2).scale(sp.Rational(1, 2))
    recs = hy.on_shell_curvature(flow.L, flow.M, flow.eom).records()
    assert [(g, basis) for g, basis, _ in recs] == [(0, "s3")]
    assert recs[0][2] == flow.anomaly


def test_unit_scale_flow_is_the_nls_flow():
    flow = qs.qid_flow(2, 1)
    nls = hy.nls_eom(2, hy.nls_coeffs(2, alpha=-I))
    assert flow.anomaly.is_zero
    assert flow.eom.q_t == nls.q_t
    assert flow.eom.r_t == nls.r_t


def test_charges_balance_against_twice_x_alpha_under_scaled_flow():
    flow = qs.qid_flow(2, sp.Rational(3, 2))
    table = qs.lax_abelianization(hy.NLS, 4)
    rules = flow.eom.rules()
    rows = {j: (Q, G) for j, Q, G in qs.balance_densities(flow.anomaly, table, (1, 2, 3))}
    for j, (Q, G) in rows.items():
        integrate_x(rules.apply(d_t(Q)) - G)
    assert rows[1][1].is_zero
    with pytest.raises(NotExact):
        integrate_x(rows[3][1])


def test_balance_orders_must_lie_inside_the_table():
    with pytest.raises(ValueError):
        qs.balance_densities(ZERO, qs.lax_abelianization(hy.NLS, 2), (3,))


def test_kn_default_hamiltonian_gives_kn_and_no_anomaly():
    rep = qs.kn_qid()
    assert rep.anomaly.density.is_zero
    assert all(p.is_zero for _, _, p in rep.consistency)
    assert rep.eom.q_t == parse_text("I*q[xx] + 2*q*q[x]*r + q**2*r[x]")


def test_kn_deformed_hamiltonian_leaves_odd_anomaly():
    H = qs.kn_default_hamiltonian() + parse_text("(1/3)*q**3*r**3")
    rep = qs.kn_qid(H)
    assert not rep.anomaly.density.is_zero
    assert rep.anomaly.parity == ODD
    assert rep.anomaly.total_derivative


def test_dnls_hamiltonian_is_variational():
    table = hy.dnls_coeffs(1)
    H = qs.dnls_hamiltonian(table, 1)
    assert variational_derivative(H, r) == table.b(3)
    assert variational_derivative(H, q) == table.c(3)


def test_dnls_undeformed_qid_is_integrable():
    rep = qs.dnls_qid(1)
    assert rep.odd_sigma3_zero
    assert rep.anomalies == ()


@pytest.mark.parametrize("n", [1, 2, 3])
def test_nls_flows_are_hamiltonian(n):
    table = hy.nls_coeffs(n + 1)
    hams = qs.nls_hamiltonians(n + 1)
    beta, _ = qs.undeformed_constants(table, hams)[n]
    eom = hy.nls_eom(n, table)
    assert eom.q_t == variational_derivative(hams[n], r).scale(-2 * I * beta)


def test_dnls_hamiltonians_match_single_calls():
    table = hy.dnls_coeffs(2)
    hams = qs.dnls_hamiltonians(2)
    assert hams == (qs.dnls_hamiltonian(table, 1), qs.dnls_hamiltonian(table, 2))


def test_dnls_odd_sigma3_vanishes_for_any_hamiltonian():
    H = parse_text("q[x]*r[x] + q**2*r**2")
    rep = qs.dnls_qid(1, hamiltonians=[H])
    assert rep.odd_sigma3_zero
