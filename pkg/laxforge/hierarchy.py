"""NLS and DNLS hierarchies from their Lax recurrences."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Tuple, Union

import sympy as sp

from laxforge.diffpoly import (
    ALPHA, BETA, I, ZERO, DiffPoly, JetVar, d_x, integrate_x, q, r,
)
from laxforge.loopalg import LoopElement, Rules, curvature

logger = logging.getLogger("laxforge.hierarchy")

NLS, DNLS = "nls", "dnls"
TRACELESS, LOWER = "traceless", "lower"

_HALF = sp.Rational(1, 2)

REDUCTIONS: Dict[sp.Rational, str] = {
    sp.Rational(-1, 2): "KN",
    sp.Rational(-1, 4): "CLL",
    sp.Integer(0): "GI",
}

ERRATUM_R_FACTOR = "r_t carries 2(1+2beta) r a_{2n+2}, the same factor 2 as the q_t equation"
ERRATUM_STRAY_BETA = "the r_t term i(1+2beta) qr c_{2n+1} has no extra factor beta"


@dataclass(frozen=True)
class Coeffs:
    a: DiffPoly = ZERO
    b: DiffPoly = ZERO
    c: DiffPoly = ZERO


@dataclass(frozen=True)
class CoeffTable:
    family: str
    n: int
    entries: Tuple[Coeffs, ...]
    params: Tuple[Tuple[str, sp.Expr], ...] = ()

    def __getitem__(self, m: int) -> Coeffs:
        return self.entries[m]

    def __len__(self) -> int:
        return len(self.entries)

    def param(self, name: str) -> sp.Expr:
        return dict(self.params)[name]

    def a(self, m: int) -> DiffPoly:
        return self.entries[m].a

    def b(self, m: int) -> DiffPoly:
        return self.entries[m].b

    def c(self, m: int) -> DiffPoly:
        return self.entries[m].c


_QT, _RT = JetVar(q, 0, 1), JetVar(r, 0, 1)


@dataclass(frozen=True)
class EomPair:
    """lhs[0] = q_t, lhs[1] = r_t, unless another pair of jets is named."""
    q_t: DiffPoly
    r_t: DiffPoly
    label: str = ""
    lhs: Tuple[JetVar, JetVar] = (_QT, _RT)
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.q_t.has_t_jets() or self.r_t.has_t_jets():
            raise ValueError(f"{self.label}: right-hand sides may not contain t-derivatives")

    def rules(self) -> Rules:
        if any(j.dx or j.dt != 1 for j in self.lhs):
            raise ValueError("only first-order time derivatives define rewrite rules")
        return Rules(t_rules={self.lhs[0].field: self.q_t, self.lhs[1].field: self.r_t})

    def residuals(self) -> Tuple[DiffPoly, DiffPoly]:
        """lhs - rhs for both equations."""
        return (DiffPoly.var(self.lhs[0]) - self.q_t, DiffPoly.var(self.lhs[1]) - self.r_t)

    def subs_params(self, values: Mapping, label: Optional[str] = None) -> "EomPair":
        return replace(self, q_t=self.q_t.subs_params(values), r_t=self.r_t.subs_params(values),
                       label=label if label is not None else self.label)


def _scalar(x, default: sp.Expr) -> sp.Expr:
    return default if x is None else sp.nsimplify(sp.sympify(x), rational=True)


# ------------------------------------------------------------------------ NLS

def nls_coeffs(n: int, alpha=None) -> CoeffTable:
    """a_m, b_m, c_m for m = 0..n+1 from a_0 = alpha, b_0 = c_0 = 0."""
    if n < 0:
        raise ValueError("n must be non-negative")
    alpha = _scalar(alpha, ALPHA)
    entries: List[Coeffs] = [Coeffs(DiffPoly.const(alpha), ZERO, ZERO)]
    for m in range(n + 1):
        prev = entries[-1]
        b_next = (d_x(prev.b) + (q() * prev.a).scale(2)).scale(I / 2)
        c_next = (d_x(prev.c) - (r() * prev.a).scale(2)).scale(-I / 2)
        a_next = integrate_x(q() * c_next - r() * b_next)
        entries.append(Coeffs(a_next, b_next, c_next))
        logger.debug("nls coefficient %d: %d/%d/%d terms", m + 1, len(a_next), len(b_next), len(c_next))
    return CoeffTable(NLS, n, tuple(entries), (("alpha", alpha),))


def nls_eom(n: int, table: Optional[CoeffTable] = None) -> EomPair:
    """q_t = -2i b_{n+1}, r_t = 2i c_{n+1}."""
    if n < 1:
        raise ValueError("n must be at least 1")
    table = table if table is not None and table.n >= n else nls_coeffs(n)
    return EomPair(table.b(n + 1).scale(-2 * I), table.c(n + 1).scale(2 * I), f"NLS n={n}")


def check_nls_recurrences(table: CoeffTable) -> List[str]:
    """Names of violated recurrence identities (empty when consistent)."""
    bad = []
    for m in range(len(table) - 1):
        a, b, c = table[m].a, table[m].b, table[m].c
        if d_x(a) != q() * c - r() * b:
            bad.append(f"a_{m},x")
        if d_x(b) != table.b(m + 1).scale(-2 * I) - (q() * a).scale(2):
            bad.append(f"b_{m},x")
        if d_x(c) != table.c(m + 1).scale(2 * I) + (r() * a).scale(2):
            bad.append(f"c_{m},x")
    return bad


# ----------------------------------------------------------------------- DNLS

def _s(beta) -> DiffPoly:
    return (q() * r()).scale(_HALF * (1 + 2 * beta))


def dnls_coeffs(n: int, beta=None) -> CoeffTable:
    """Coefficients 0..2n+2 from a_0 = -2i, b_0 = c_0 = 0; odd a and even b, c vanish."""
    if n < 1:
        raise ValueError("n must be at least 1")
    beta = _scalar(beta, BETA)
    s = _s(beta)
    top = 2 * n + 2
    a: Dict[int, DiffPoly] = {0: DiffPoly.const(-2 * I)}
    b: Dict[int, DiffPoly] = {0: ZERO, 1: (q() * a[0]).scale(I)}
    c: Dict[int, DiffPoly] = {0: ZERO, 1: (r() * a[0]).scale(I)}
    for m in range(0, top):
        dens = (r() * s * b[m] - q() * s * c[m]) - (q() * d_x(c[m]) + r() * d_x(b[m])).scale(I / 2)
        a[m + 1] = integrate_x(dens)
        if m + 2 <= top:
            b[m + 2] = (d_x(b[m]) + (s * b[m]).scale(2 * I) + (q() * a[m + 1]).scale(2)).scale(I / 2)
            c[m + 2] = (d_x(c[m]) - (s * c[m]).scale(2 * I) - (r() * a[m + 1]).scale(2)).scale(-I / 2)
        logger.debug("dnls coefficient %d computed", m + 1)
    entries = tuple(Coeffs(a[m], b[m], c[m]) for m in range(top + 1))
    return CoeffTable(DNLS, n, entries, (("beta", beta),))


def check_dnls_recurrences(table: CoeffTable) -> List[str]:
    beta = table.param("beta")
    s = _s(beta)
    bad = []
    top = len(table) - 1
    for m in range(top + 1):
        if m % 2 == 1 and table.a(m):
            bad.append(f"a_{m} != 0")
        if m % 2 == 0 and (table.b(m) or table.c(m)):
            bad.append(f"b_{m}, c_{m} != 0")
    for m in range(top):
        if d_x(table.a(m)) != q() * table.c(m + 1) - r() * table.b(m + 1):
            bad.append(f"a_{m},x")
        if m + 2 <= top:
            if d_x(table.b(m)) != (table.b(m + 2).scale(-2 * I) - (s * table.b(m)).scale(2 * I)
                                   - (q() * table.a(m + 1)).scale(2)):
                bad.append(f"b_{m},x")
            if d_x(table.c(m)) != (table.c(m + 2).scale(2 * I) + (s * table.c(m)).scale(2 * I)
                                   + (r() * table.a(m + 1)).scale(2)):
                bad.append(f"c_{m},x")
        derived = (r() * s * table.b(m) - q() * s * table.c(m)) - (
            q() * d_x(table.c(m)) + r() * d_x(table.b(m))).scale(I / 2)
        if d_x(table.a(m + 1)) != derived:
            bad.append(f"a_{m + 1},x derived")
    return bad


def dnls_eom(n: int, table: Optional[CoeffTable] = None, beta=None) -> EomPair:
    if table is None or table.n != n:
        table = dnls_coeffs(n, beta)
    k = 1 + 2 * table.param("beta")
    bq, cr, a = table.b(2 * n + 1), table.c(2 * n + 1), table.a(2 * n + 2)
    qr = q() * r()
    q_t = d_x(bq) + (qr * bq).scale(I * k) + (q() * a).scale(2 * k)
    r_t = d_x(cr) - (qr * cr).scale(I * k) - (r() * a).scale(2 * k)
    notes = (ERRATUM_R_FACTOR, ERRATUM_STRAY_BETA) if n == 1 else ()
    return EomPair(q_t, r_t, f"DNLS n={n}", notes=notes)


def reduction_label(beta_value) -> str:
    return REDUCTIONS.get(sp.nsimplify(sp.sympify(beta_value), rational=True), f"DNLS beta={beta_value}")


def dnls_reduce(eom: EomPair, beta_value) -> EomPair:
    value = sp.nsimplify(sp.sympify(beta_value), rational=True)
    return eom.subs_params({"beta": value}, label=reduction_label(value))


# ----------------------------------------------------------------------- Lax

def build_lax(family: str, n: int, coeffs: Optional[CoeffTable] = None,
              gauge: str = TRACELESS) -> Tuple[LoopElement, LoopElement]:
    """(L, M) for the NLS pair or the DNLS pair (traceless or gl(2) lower gauge)."""
    if family == NLS:
        table = coeffs if coeffs is not None else nls_coeffs(n)
        L = LoopElement.sigma({1: (-I, 0, 0), 0: (0, q(), r())})
        M = LoopElement.sigma({n - m: (table.a(m), table.b(m), table.c(m)) for m in range(n + 1)})
        return L, M
    if family != DNLS:
        raise ValueError(f"unknown family {family!r}")
    table = coeffs if coeffs is not None else dnls_coeffs(n)
    beta = table.param("beta")
    k = 1 + 2 * beta
    s = _s(beta)
    lower = gauge == LOWER
    if gauge not in (TRACELESS, LOWER):
        raise ValueError(f"unknown gauge {gauge!r}")
    L = LoopElement.sigma({2: (-I, 0, 0), 1: (0, q(), r()),
                           0: (s.scale(-I), 0, 0, s.scale(I) if lower else 0)})
    top = 2 * n + 2
    M = LoopElement.sigma({top - m: (table.a(m), table.b(m), table.c(m)) for m in range(top)})
    a_top = table.a(top).scale(k)
    M = M + LoopElement.sigma({0: (a_top, 0, 0, -a_top if lower else 0)})
    return L, M


def on_shell_curvature(L: LoopElement, M: LoopElement, eom: EomPair) -> LoopElement:
    """Curvature with the equations of motion imposed as rewrite rules."""
    return eom.rules().apply_element(curvature(L, M))


def nls_system(n: int):
    table = nls_coeffs(n)
    L, M = build_lax(NLS, n, table)
    return table, L, M, nls_eom(n, table)


def dnls_system(n: int, beta=None, gauge: str = TRACELESS):
    table = dnls_coeffs(n, beta)
    L, M = build_lax(DNLS, n, table, gauge)
    eom = dnls_eom(n, table)
    if beta is not None:
        eom = replace(eom, label=reduction_label(beta) if n == 1 else eom.label)
    return table, L, M, eom


def kn_lax() -> Tuple[LoopElement, LoopElement]:
    return build_lax(DNLS, 1, dnls_coeffs(1, sp.Rational(-1, 2)))


def cll_lax() -> Tuple[LoopElement, LoopElement]:
    return build_lax(DNLS, 1, dnls_coeffs(1, sp.Rational(-1, 4)), gauge=LOWER)
