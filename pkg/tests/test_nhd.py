import pytest

from laxforge import hierarchy as hy
from laxforge import nhd as nh
from laxforge.diffpoly import I, parse_text, q, r, substitute
from laxforge.loopalg import LoopElement, Rules
from laxforge.verify import proportional


def P(text, ctx=nh.NHD):
    return parse_text(text, ctx)


@pytest.fixture(scope="module")
def nls():
    return nh.nls_nhd(2, 1)


@pytest.fixture(scope="module")
def kn():
    return nh.kn_nhd()


def test_nls_deformed_equations(nls):
    assert nls.deformed_eoms.q_t == P("(I/2)*q[xx] - I*q**2*r - g1")
    assert nls.deformed_eoms.r_t == P("-(I/2)*r[xx] + I*q*r**2 + g2")
    assert nls.vanishing == ()


def test_nls_constraints(nls):
    rels = [c.relation for c in nls.constraints]
    for want in ("a[x] - q*g2 + r*g1", "g1[x] + 2*q*a", "g2[x] - 2*r*a"):
        assert any(proportional(rel, P(want)) for rel in rels), want
    assert nls.constraint(-1, "s+") and nls.constraint(5, "s3").is_zero


def test_nls_deformation_closes(nls):
    assert nh.check_closure(nls)


def test_nls_elimination_order(nls):
    red = nh.reduce_constraints(nls)
    assert red[0].eliminated == "a"
    elim = nh.eliminate_deformers(nls, red)
    assert elim.order == 4
    assert elim.residual_symbols == ()


def test_elimination_vanishes_on_undeformed_flow(nls):
    und = hy.nls_eom(2, hy.nls_coeffs(2, alpha=-I))
    eq = nh.eliminate_deformers(nls).equation
    assert Rules(t_rules={q: und.q_t, r: und.r_t}).apply(eq).is_zero


def test_depth_two_raises_order():
    deep = nh.nls_nhd(2, 2)
    assert {rc.grade for rc in nh.reduce_constraints(deep)} == {-1, -2}
    assert nh.eliminate_deformers(deep).order == 5


def test_kn_vanishing_and_time_only(kn):
    assert kn.vanishing == ("m1", "m2", "a", "f1", "f2")
    assert kn.time_only == ("b",)
    assert kn.context["b"].time_only
    assert nh.check_closure(kn)


def test_kn_resolves_in_potentials(kn):
    pot = nh.kn_resolve(kn)
    assert str(pot.lhs[0]) == "u[xt]"
    assert pot.q_t == P("(I/2)*u[xxx] + u[x]*u[xx]*v[x] + (1/2)*u[x]**2*v[xx] + 4*b*u "
                        "+ 4*I*b*u*v*u[x] + 2*I*K*u[x]", kn.context)
    assert nh.NOTE_LENELLS_FOKAS in pot.notes


def test_cll_keeps_identity_relation_and_does_not_resolve():
    cll = nh.cll_nhd()
    assert cll.vanishing == ("m1", "m2", "a", "f1", "f2")
    assert any(proportional(c.relation, P("q*g2 - r*g1", cll.context)) for c in cll.constraints)
    assert nh.ERRATUM_CLL_RT in cll.notes
    with pytest.raises(nh.NotResolvable):
        nh.kn_resolve(cll)


def test_vanishing_pass_rules():
    zero, tonly = nh.vanishing_pass([nh.m1() * q(), nh.b_(1)], [nh.m1, nh.b_])
    assert zero == {"m1"}
    assert tonly == {"b"}
    # a t-only function multiplying independent monomials must vanish
    zero, tonly = nh.vanishing_pass([nh.b_(1), nh.b_() * q(1) + nh.b_() * r()], [nh.b_])
    assert zero == {"b"}
    assert tonly == set()


def test_undeformed_positive_grades_must_close():
    L = LoopElement.sigma({1: (-I, 0, 0), 0: (0, q(), r())})
    M = LoopElement.sigma({2: (1, 0, 0)})
    with pytest.raises(nh.PositiveGradeResidual):
        nh.split_orders(L, M, nh.nls_deformation(1), eom_grade=0, label="bad")


def test_deformation_depth_validation():
    with pytest.raises(ValueError):
        nh.nls_deformation(0)
    spec = nh.nls_deformation(3)
    assert spec.grades == (-1, -2, -3)
    assert len(spec.symbols()) == 9


def test_third_flow_deformation_reduces_to_the_undeformed_flow():
    res = nh.nls_nhd(3, 1)
    und = hy.nls_eom(3, hy.nls_coeffs(3, alpha=-I))
    assert substitute(res.deformed_eoms.q_t, {nh.g1: 0}) == und.q_t
    assert substitute(res.deformed_eoms.r_t, {nh.g2: 0}) == und.r_t
    assert nh.check_closure(res)


def test_cll_deformation_closes_modulo_the_identity_relation():
    cll = nh.cll_nhd()
    reducers = nh.algebraic_reducers(cll)
    assert reducers
    assert nh.reduce_algebraic(P("q*g2*r[x] - r*g1*r[x]", cll.context), reducers).is_zero
    assert not nh.reduce_algebraic(P("q*g2*r[x]", cll.context), reducers).is_zero
    assert nh.check_closure(cll)


@pytest.mark.parametrize("grades,depth", [([-1], 1), ([-2, -1], 2), ([-1, -2, -3], 3)])
def test_deformation_grades_give_depth(grades, depth):
    assert nh.deformation_depth(grades) == depth


@pytest.mark.parametrize("grades", [[-2], [-1, -3], [-1, -1], [0, -1], []])
def test_deformation_grades_must_be_contiguous(grades):
    with pytest.raises(ValueError):
        nh.deformation_depth(grades)
