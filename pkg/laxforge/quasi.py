"""Quasi-integrable deformations: Hamiltonian-driven coefficients, anomaly
densities, parity verdicts and the abelianizing gauge rotation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import sympy as sp

from laxforge import hierarchy as hy
from laxforge.diffpoly import (
    EVEN, I, KAPPA, ODD, ZERO, DiffPoly, JetVar, NotExact, d_x,
    homotopy_density, integrate_x, param, parity, phi, q, r, R, variational_derivative,
)
from laxforge.loopalg import (
    GaugeGenerator, LoopElement, adjoint, b, curvature, gauge_conjugate, killing_project, polar_rotate,
)

logger = logging.getLogger("laxforge.quasi")

VERDICT_ZERO = "zero"
VERDICT_ODD = "parity-odd (quasi-integrable)"
VERDICT_EVEN = "parity-even"
VERDICT_MIXED = "mixed"

KN = "kn"
_HALF = sp.Rational(1, 2)


class UnderdeterminedSystem(RuntimeError):
    """A gauge grade has no unique solution."""


class NotVariational(ValueError):
    """Coefficient pair is not the variational gradient of any density."""


# -------------------------------------------------------------- Hamiltonians

def nls_hamiltonians(count: int = 4) -> Tuple[DiffPoly, ...]:
    """Densities H_1..H_count of the NLS hierarchy."""
    if count > 4:
        raise ValueError("only four built-in densities; supply higher ones explicitly")
    qp, rp = q(), r()
    built = (
        qp * rp,
        rp * q(1) - qp * r(1),
        (q(1) * r(1) + qp * qp * rp * rp).scale(_HALF),
        qp * r(3) - (qp * qp * rp * r(1)).scale(3),
    )
    return built[:count]


def _ratio(p: DiffPoly, base: DiffPoly) -> sp.Expr:
    """Scalar c with p == c * base."""
    if base.is_zero:
        if p.is_zero:
            return sp.Integer(0)
        raise ValueError("cannot express a non-zero polynomial through zero")
    mono, c0 = base.terms()[0]
    c = sp.expand(p.coefficient(mono) / c0)
    if base.scale(c) != p:
        raise ValueError(f"{p} is not a constant multiple of {base}")
    return c


def undeformed_constants(table: hy.CoeffTable, hams: Sequence[DiffPoly]) -> Tuple[Tuple[sp.Expr, sp.Expr], ...]:
    """(beta_m, gamma_m) with b_m = beta_m dH_m/dr and c_m = gamma_m dH_m/dq."""
    out = []
    for m, H in enumerate(hams, start=1):
        out.append((_ratio(table.b(m), variational_derivative(H, r)),
                    _ratio(table.c(m), variational_derivative(H, q))))
    return tuple(out)


@dataclass(frozen=True)
class QidSpec:
    family: str
    n: int
    hamiltonians: Tuple[DiffPoly, ...]
    betas: Tuple[sp.Expr, ...]
    gammas: Tuple[sp.Expr, ...]

    @classmethod
    def undeformed(cls, n: int, table: Optional[hy.CoeffTable] = None) -> "QidSpec":
        table = table if table is not None else hy.nls_coeffs(n)
        hams = nls_hamiltonians(n)
        consts = undeformed_constants(table, hams)
        return cls(hy.NLS, n, hams, tuple(c[0] for c in consts), tuple(c[1] for c in consts))

    @classmethod
    def generic(cls, n: int) -> "QidSpec":
        """Independent symbolic couplings beta_m, gamma_m."""
        return cls(hy.NLS, n, nls_hamiltonians(n),
                   tuple(param(f"beta{m}") for m in range(1, n + 1)),
                   tuple(param(f"gamma{m}") for m in range(1, n + 1)))

    def matched(self) -> "QidSpec":
        """Copy with gamma_m set equal to beta_m."""
        return QidSpec(self.family, self.n, self.hamiltonians, self.betas, self.betas)


@dataclass(frozen=True)
class AnomalyEntry:
    order: int
    density: DiffPoly
    grade: int
    parity: str
    total_derivative: bool


@dataclass(frozen=True)
class AnomalyReport:
    family: str
    n: int
    entries: Tuple[AnomalyEntry, ...]

    def density(self, order: int) -> DiffPoly:
        for e in self.entries:
            if e.order == order:
                return e.density
        raise KeyError(order)

    @property
    def is_zero(self) -> bool:
        return all(e.density.is_zero for e in self.entries)


def _is_total_derivative(p: DiffPoly) -> bool:
    if p.is_zero:
        return True
    try:
        integrate_x(p)
        return True
    except NotExact:
        return False


def anomaly_entry(order: int, density: DiffPoly, grade: int) -> AnomalyEntry:
    return AnomalyEntry(order, density, grade, parity(density), _is_total_derivative(density))


def qid_deform(table: hy.CoeffTable, spec: QidSpec) -> Tuple[Tuple[hy.EomPair, ...], AnomalyReport]:
    """Deformed b_m = beta_m dH_m/dr, c_m = gamma_m dH_m/dq with a_m kept; anomaly
    X_m = q c_m - r b_m - a_m,x sits on s3 at grade n - m."""
    if len(spec.hamiltonians) < spec.n or table.n < spec.n:
        raise ValueError("QID spec and coefficient table do not cover the same orders")
    eoms, entries = [], []
    for m in range(1, spec.n + 1):
        H = spec.hamiltonians[m - 1]
        bm = variational_derivative(H, r).scale(spec.betas[m - 1])
        cm = variational_derivative(H, q).scale(spec.gammas[m - 1])
        am = table.a(m)
        X = q() * cm - r() * bm - d_x(am)
        eoms.append(hy.EomPair(d_x(bm) + (q() * am).scale(2), d_x(cm) - (r() * am).scale(2), f"QID NLS m={m}"))
        entries.append(anomaly_entry(m, X, spec.n - m))
        logger.debug("anomaly order %d: %s", m, X)
    return tuple(eoms), AnomalyReport(spec.family, spec.n, tuple(entries))


def classify_density(p: DiffPoly) -> str:
    if p.is_zero:
        return VERDICT_ZERO
    par = parity(p)
    if par == ODD:
        return VERDICT_ODD
    if par == EVEN:
        return VERDICT_EVEN
    return VERDICT_MIXED


def classify(report: AnomalyReport) -> Dict[int, Tuple[str, bool]]:
    """order -> (verdict, total-derivative flag)."""
    return {e.order: (classify_density(e.density), e.total_derivative) for e in report.entries}


# ------------------------------------------------------------ abelianization

def rotated_lax(family: str = hy.NLS) -> LoopElement:
    """Spatial connection after the diagonal rotation exp((i/2) phi b^0), in the
    (phi, R) basis with R = sqrt(qr/kappa)."""
    L = LoopElement.kernel({1: (-I, 0, 0)}) + LoopElement.sigma({0: (0, q().scale(_HALF), r())})
    rotated = polar_rotate(L, phi().scale(I / 2), {q: R().scale(I * KAPPA), r: R().scale(-I)}, q, r)
    if family == hy.NLS:
        return rotated
    if family == KN:
        # the KN spatial connection is lambda times the NLS one
        return rotated.shift(1)
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class AbelianizationTable:
    family: str
    top: int
    generator: GaugeGenerator
    charges: Tuple[Tuple[int, DiffPoly], ...]
    alphas: Tuple[Tuple[int, DiffPoly], ...]

    def xi(self, j: int) -> Tuple[DiffPoly, DiffPoly]:
        return self.generator.xi(j)

    def charge(self, grade: int) -> DiffPoly:
        return dict(self.charges)[grade]

    def alpha(self, j: int) -> DiffPoly:
        return dict(self.alphas)[j]

    @property
    def depth(self) -> int:
        return self.generator.depth


def abelianize_connection(Lt: LoopElement, depth: int, family: str = hy.NLS) -> AbelianizationTable:
    """Solve grade by grade for the gauge generator that removes every F1/F2
    component of the connection Lt down to grade top - depth."""
    top = Lt.top
    lead = Lt.kernel_at(top)[0]
    if not lead.is_constant() or lead.is_zero:
        raise UnderdeterminedSystem("leading b-coefficient is not a non-zero constant")
    inv = 1 / lead.constant_value()
    g = GaugeGenerator()
    for j in range(1, depth + 1):
        window = (top - j, top)
        trial = g.extended(ZERO, ZERO)
        _, k1, k2 = gauge_conjugate(Lt, trial, window).kernel_at(top - j)
        g = g.extended(k2.scale(inv), k1.scale(inv))
        _, c1, c2 = gauge_conjugate(Lt, g, window).kernel_at(top - j)
        if c1 or c2:
            raise UnderdeterminedSystem(f"grade {top - j} keeps F-components {c1}, {c2}")
        logger.debug("%s gauge grade -%d: xi1=%s xi2=%s", family, j, *g.xi(j))
    Lbar = gauge_conjugate(Lt, g, (top - depth, top))
    charges = tuple((gr, Lbar.kernel_at(gr)[0]) for gr in range(top, top - depth - 1, -1))
    alphas = tuple((j, killing_project(adjoint(b(0), g, (-j, 0)), j)) for j in range(depth + 1))
    return AbelianizationTable(family, top, g, charges, alphas)


def abelianize(family: str = hy.NLS, depth: int = 4) -> AbelianizationTable:
    """Abelianization of the phase-rotated connection in the (phi, R) basis."""
    return abelianize_connection(rotated_lax(family), depth, family)


def lax_abelianization(family: str = hy.NLS, depth: int = 4, beta=None) -> AbelianizationTable:
    """Abelianization of the hierarchy's own spatial connection, polynomial in q, r.

    These are the densities the numerical balance measures: the grade-(-j)
    charge of this table obeys d/dt int Q = int 2 X alpha_j whenever the
    on-shell curvature is X s3 at grade 0."""
    if family == hy.NLS:
        L = LoopElement.sigma({1: (-I, 0, 0), 0: (0, q(), r())})
    elif family == hy.DNLS:
        L, _ = hy.build_lax(hy.DNLS, 1, hy.dnls_coeffs(1, beta))
    else:
        raise ValueError(f"unknown family {family!r}")
    return abelianize_connection(L, depth, family)


def to_qr(p: DiffPoly) -> DiffPoly:
    """Rendering rule R^(2k) -> (qr)^k kappa^(-k) on undifferentiated R factors."""
    Rj = JetVar(R)
    out = ZERO
    for mono, c in p.items():
        factors: Dict[JetVar, int] = {}
        coeff = c
        for jet, e in mono:
            if jet == Rj and e >= 2:
                k = e // 2
                coeff = coeff * KAPPA ** (-k)
                for f in (JetVar(q), JetVar(r)):
                    factors[f] = factors.get(f, 0) + k
                if e % 2:
                    factors[Rj] = 1
            else:
                factors[jet] = factors.get(jet, 0) + e
        out = out + DiffPoly.monomial(factors, coeff)
    return out


def charges(family: str = hy.NLS, depth: int = 4, table: Optional[AbelianizationTable] = None
            ) -> Tuple[Tuple[int, DiffPoly], ...]:
    """Charge densities per grade, rendered in q, r where possible."""
    table = table if table is not None else abelianize(family, depth)
    return tuple((gr, to_qr(c)) for gr, c in table.charges)


def anomaly_alpha_products(X: DiffPoly, table: AbelianizationTable) -> Tuple[Tuple[int, DiffPoly], ...]:
    """Densities 2 X alpha_j whose integrals are the anomalies Gamma^j.

    X is the s3 coefficient of the curvature; b^0 = s3/2 makes its b-coefficient 2X."""
    return tuple((j, X.scale(2) * to_qr(a)) for j, a in table.alphas)


def balance_densities(X: DiffPoly, table: AbelianizationTable, orders: Sequence[int]
                      ) -> Tuple[Tuple[int, DiffPoly, DiffPoly], ...]:
    """(j, Q_j, Gamma_j) with d/dt int Q_j = int Gamma_j; Q_j is the charge at grade -j."""
    gammas = dict(anomaly_alpha_products(X, table))
    charges = dict(table.charges)
    out = []
    for j in orders:
        if -j not in charges or j not in gammas:
            raise ValueError(f"order {j} lies outside the abelianization depth {table.depth}")
        out.append((j, to_qr(charges[-j]), gammas[j]))
    return tuple(out)


@dataclass(frozen=True)
class QidFlow:
    """Order-n flow whose top couplings are scaled by `scale`; on shell the
    curvature is exactly anomaly * s3 at grade 0."""
    n: int
    scale: sp.Expr
    eom: hy.EomPair
    L: LoopElement
    M: LoopElement
    anomaly: DiffPoly


def qid_flow(n: int = 2, scale=1, alpha=-I) -> QidFlow:
    """beta_n, gamma_n scaled from their undeformed values, lower orders of M scaled alike,
    with (1 - scale) a_n s3 added at grade 0 so that no off-diagonal curvature remains."""
    table = hy.nls_coeffs(n, alpha=alpha)
    base = QidSpec.undeformed(n, table)
    s = sp.nsimplify(sp.sympify(scale), rational=True)
    betas = base.betas[:-1] + (base.betas[-1] * s,)
    gammas = base.gammas[:-1] + (base.gammas[-1] * s,)
    eoms, report = qid_deform(table, QidSpec(hy.NLS, n, base.hamiltonians, betas, gammas))
    L, M0 = hy.build_lax(hy.NLS, n, table)
    M = M0.scale(s) + LoopElement.sigma({0: (table.a(n).scale(1 - s), 0, 0)})
    eom = hy.EomPair(eoms[n - 1].q_t, eoms[n - 1].r_t, f"QID NLS n={n} scale={s}")
    X = report.density(n)
    logger.debug("scaled flow n=%d: X=%s", n, X)
    return QidFlow(n, s, eom, L, M, X)


# --------------------------------------------------------------------- KN QID

def kn_default_hamiltonian() -> DiffPoly:
    return (q(1) * r() - r(1) * q()).scale(I / 2) + (q() * q() * r() * r()).scale(_HALF)


@dataclass(frozen=True)
class KnQidReport:
    hamiltonian: DiffPoly
    eom: hy.EomPair
    anomaly: AnomalyEntry
    consistency: Tuple[Tuple[int, str, DiffPoly], ...]
    components: Tuple[Tuple[int, str, DiffPoly], ...]


def kn_qid(hamiltonian: Optional[DiffPoly] = None) -> KnQidReport:
    """KN pair with b_3 = dH/dr, c_3 = dH/dq, a_2 = -(i/2) d/dq(dH/dr)."""
    H = hamiltonian if hamiltonian is not None else kn_default_hamiltonian()
    dr = variational_derivative(H, r)
    dq = variational_derivative(H, q)
    a2 = variational_derivative(dr, q).scale(-I / 2)
    L = LoopElement.sigma({2: (-I, 0, 0), 1: (0, q(), r())})
    M = LoopElement.sigma({4: (-2 * I, 0, 0), 3: (0, q().scale(2), r().scale(2)), 2: (a2, 0, 0), 1: (0, dr, dq)})
    eom = hy.EomPair(d_x(dr), d_x(dq), "QID KN")
    F = eom.rules().apply_element(curvature(L, M))
    comps = tuple(F.records())
    X = F.slot(2).h
    consistency = tuple(rec for rec in comps if rec[0] != 2)
    return KnQidReport(H, eom, anomaly_entry(1, X, 2), consistency, comps)


# ------------------------------------------------------------------- DNLS QID

def dnls_hamiltonian(table: hy.CoeffTable, j: int) -> DiffPoly:
    """Density H_j with dH_j/dr = b_{2j+1} and dH_j/dq = c_{2j+1}."""
    bj, cj = table.b(2 * j + 1), table.c(2 * j + 1)
    H = homotopy_density(cj, bj)
    if variational_derivative(H, r) != bj or variational_derivative(H, q) != cj:
        raise NotVariational(f"(c_{2 * j + 1}, b_{2 * j + 1}) is not a variational gradient")
    return H


def dnls_hamiltonians(n: int = 1, beta=None, table: Optional[hy.CoeffTable] = None) -> Tuple[DiffPoly, ...]:
    table = table if table is not None else hy.dnls_coeffs(n, beta)
    return tuple(dnls_hamiltonian(table, j) for j in range(1, n + 1))


@dataclass(frozen=True)
class DnlsQidReport:
    n: int
    eom: hy.EomPair
    anomalies: Tuple[AnomalyEntry, ...]
    components: Tuple[Tuple[int, str, DiffPoly], ...]
    odd_sigma3_zero: bool


def dnls_qid(n: int = 1, hamiltonians: Optional[Sequence[DiffPoly]] = None,
             betas: Optional[Sequence] = None, gammas: Optional[Sequence] = None,
             table: Optional[hy.CoeffTable] = None) -> DnlsQidReport:
    """Deform b_{2j+1} = beta_j dH_j/dr, c_{2j+1} = gamma_j dH_j/dq for j = 1..n and
    collect the curvature grade by grade with the deformed equations imposed."""
    table = table if table is not None else hy.dnls_coeffs(n)
    hams = list(hamiltonians) if hamiltonians is not None else list(dnls_hamiltonians(n, table=table))
    betas = list(betas) if betas is not None else [1] * n
    gammas = list(gammas) if gammas is not None else [1] * n
    entries = list(table.entries)
    for j in range(1, n + 1):
        H = hams[j - 1]
        k = 2 * j + 1
        entries[k] = hy.Coeffs(entries[k].a,
                               variational_derivative(H, r).scale(betas[j - 1]),
                               variational_derivative(H, q).scale(gammas[j - 1]))
    deformed = hy.CoeffTable(table.family, table.n, tuple(entries), table.params)
    L, M = hy.build_lax(hy.DNLS, n, deformed)
    F = curvature(L, M)
    qt, rt = JetVar(q, 0, 1), JetVar(r, 0, 1)
    up, down = F.slot(1).e, F.slot(1).f
    # grade-1 entries are q_t - (...) and r_t - (...)
    eom = hy.EomPair(DiffPoly.var(qt) - up, DiffPoly.var(rt) - down, f"QID DNLS n={n}")
    G = eom.rules().apply_element(F)
    comps = tuple(G.records())
    odd_zero = all(G.slot(g).h.is_zero for g in G.grades() if g % 2)
    if not odd_zero:
        logger.warning("odd-grade s3 components survive in the deformed DNLS curvature")
    anomalies = tuple(anomaly_entry(g, G.slot(g).h, g) for g in G.grades() if g % 2 == 0 and G.slot(g).h)
    return DnlsQidReport(n, eom, anomalies, comps, odd_zero)
