import pytest

from laxforge import loopalg as la
from laxforge.diffpoly import I, ZERO, FieldSymbol, d_x, q, r
from laxforge.loopalg import LoopElement, Rules, Slot


def test_sigma_brackets_and_grades():
    h = LoopElement.sigma({1: (1, 0, 0)})
    e = LoopElement.sigma({-1: (0, 1, 0)})
    f = LoopElement.sigma({2: (0, 0, 1)})
    assert la.commutator(h, e).slot(0).e == ZERO + 2
    assert la.commutator(h, f).slot(3).f == ZERO - 2
    assert la.commutator(e, f).slot(1).h == ZERO + 1
    assert la.commutator(h, h).is_zero


def test_kernel_basis_round_trip():
    s = Slot(q(), r(), q() * r())
    assert Slot.from_kernel(*s.kernel()) == s


def test_window_drops_grades():
    X = LoopElement.sigma({2: (1, 0, 0), 0: (0, q(), r()), -3: (0, 1, 1)}, window=(-1, 1))
    assert X.grades() == [0]


def test_nls_curvature_vanishes_on_shell():
    L = LoopElement.sigma({1: (-I, 0, 0), 0: (0, q(), r())})
    M = LoopElement.sigma({
        2: (-I, 0, 0),
        1: (0, q(), r()),
        0: ((q() * r()).scale(-I / 2), q(1).scale(I / 2), r(1).scale(-I / 2)),
    })
    F = la.curvature(L, M)
    assert F.grades() == [0]
    rules = Rules(t_rules={q: q(0, 1) - F.slot(0).e, r: r(0, 1) - F.slot(0).f})
    assert rules.t_rules[q] == q(2).scale(I / 2) - (q() * q() * r()).scale(I)
    assert rules.apply_element(F).is_zero


def test_rules_recursive_x_rule():
    a = FieldSymbol("a")
    out = Rules(x_rules={a: q()}).apply(d_x(a(), 3) + a())
    assert out == q(2) + a()


def test_rules_detect_cycles():
    a = FieldSymbol("a")
    loop = Rules(values={a: a() + q()}, max_depth=5)
    with pytest.raises(RuntimeError):
        loop.apply(a())


def test_gauge_needs_enough_components():
    L = LoopElement.sigma({1: (-I, 0, 0), 0: (0, q(), r())})
    g = la.GaugeGenerator().extended(0, 1)
    with pytest.raises(la.WindowTooNarrow):
        la.gauge_conjugate(L, g, (-2, 1))


def test_adjoint_of_b_with_zero_gauge():
    g = la.GaugeGenerator().extended(0, 0).extended(0, 0)
    X = la.adjoint(la.b(0), g, (-2, 0))
    assert la.killing_project(X, 0) == ZERO + 1
    assert la.killing_project(X, 2).is_zero
