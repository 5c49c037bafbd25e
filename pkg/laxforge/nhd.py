"""Non-holonomic deformations of the temporal Lax component.

The deformation sum_k lambda^k G^(k) is added to M; the zero-curvature
residual splits into deformed equations of motion (at the dynamical grade) and
differential constraints on the deforming functions (all other grades).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import sympy as sp

from laxforge import hierarchy as hy
from laxforge.diffpoly import (
    EVEN, I, STANDARD, ZERO, Context, DiffPoly, FieldSymbol, JetVar, Monomial, NotExact,
    d_x, integrate_x, monic, partial, primitive, q, r, substitute, u, v,
)
from laxforge.loopalg import LoopElement, Rules, curvature

logger = logging.getLogger("laxforge.nhd")

_HALF = sp.Rational(1, 2)


class PositiveGradeResidual(RuntimeError):
    """The undeformed pair leaves a residual above the dynamical grade."""


class NotReducible(ValueError):
    """Eliminating a diagonal function would require dividing by a field."""


class NotResolvable(ValueError):
    """The constraints cannot be integrated in potentials."""


# deforming functions
a_ = FieldSymbol("a")
g1 = FieldSymbol("g1")
g2 = FieldSymbol("g2")
b_ = FieldSymbol("b")
f1 = FieldSymbol("f1")
f2 = FieldSymbol("f2")
w = FieldSymbol("w")
m1 = FieldSymbol("m1")
m2 = FieldSymbol("m2")
K = FieldSymbol("K", EVEN, time_only=True)

NHD = STANDARD.extended(a_, g1, g2, b_, f1, f2, w, m1, m2, K)

ERRATUM_CLL_RT = "r_t is read as -i r_xx + r r_x q + 2 g2 - 2i r w (sign pattern of the q_t equation)"
ERRATUM_CLL_W = ("the grade-0 s3 relation is w_x - (q g2 - r g1)/2 = 0 and the identity part gives "
                 "q g2 - r g1 = 0; the printed i w_x = q g2 - r g1 does not follow")
NOTE_LENELLS_FOKAS = "the potential system generalizes the coupled Lenells-Fokas equations"


@dataclass(frozen=True)
class DeformationSpec:
    """G = prefactor * sum over grades of (diag s3 + upper s+ + lower s-)."""
    components: Tuple[Tuple[int, Optional[FieldSymbol], Optional[FieldSymbol], Optional[FieldSymbol]], ...]
    prefactor: sp.Expr = I / 2

    @property
    def grades(self) -> Tuple[int, ...]:
        return tuple(c[0] for c in self.components)

    def symbols(self) -> List[FieldSymbol]:
        return [s for c in self.components for s in c[1:] if s is not None]

    def at(self, grade: int) -> Tuple[Optional[FieldSymbol], Optional[FieldSymbol], Optional[FieldSymbol]]:
        for c in self.components:
            if c[0] == grade:
                return c[1], c[2], c[3]
        return None, None, None

    def element(self) -> LoopElement:
        def val(s):
            return s() if s is not None else ZERO
        return LoopElement.sigma({g: (val(d), val(e), val(f)) for g, d, e, f in self.components}).scale(self.prefactor)


def nls_deformation(depth: int = 1) -> DeformationSpec:
    """(i/2) sum_{k=1..depth} lambda^-k G^(k) with G^(1) = (a, g1, g2), G^(2) = (b, f1, f2)."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    names = {1: (a_, g1, g2), 2: (b_, f1, f2)}
    comps = []
    for k in range(1, depth + 1):
        syms = names.get(k) or (FieldSymbol(f"d{k}"), FieldSymbol(f"u{k}"), FieldSymbol(f"l{k}"))
        comps.append((-k,) + syms)
    return DeformationSpec(tuple(comps), I / 2)


def deformation_depth(grades: Sequence[int]) -> int:
    """Depth d of the grade set {-1, ..., -d}; any other set is rejected."""
    want = list(range(-1, -len(grades) - 1, -1))
    if not grades or sorted(grades, reverse=True) != want:
        raise ValueError(f"deformation grades must be -1 down to -d without gaps or repeats, "
                         f"got {' '.join(str(g) for g in grades)}")
    return len(grades)


def dnls_deformation() -> DeformationSpec:
    """i (G0 + lambda^-1 G1 + lambda^-2 G2) with G0 = (w, m1, m2), G1 = (a, g1, g2), G2 = (b, f1, f2)."""
    return DeformationSpec(((0, w, m1, m2), (-1, a_, g1, g2), (-2, b_, f1, f2)), I)


@dataclass(frozen=True)
class Constraint:
    grade: int
    basis: str
    relation: DiffPoly


@dataclass(frozen=True)
class NhdResult:
    label: str
    spec: DeformationSpec
    L: LoopElement
    M: LoopElement
    eom_grade: int
    deformed_eoms: hy.EomPair
    eom_relations: Tuple[DiffPoly, DiffPoly]
    constraints: Tuple[Constraint, ...]
    vanishing: Tuple[str, ...] = ()
    time_only: Tuple[str, ...] = ()
    notes: Tuple[str, ...] = ()
    context: Context = NHD

    def constraint(self, grade: int, basis: str) -> DiffPoly:
        for c in self.constraints:
            if c.grade == grade and c.basis == basis:
                return c.relation
        return ZERO

    def facts(self) -> Dict[FieldSymbol, DiffPoly]:
        """Values implied by the vanishing pass."""
        out: Dict[FieldSymbol, DiffPoly] = {}
        for s in self.spec.symbols():
            if s.name in self.vanishing:
                out[s] = ZERO
            elif s.name in self.time_only:
                out[s] = self.context[s.name]()
        return out

    def deformers(self) -> Set[str]:
        return {s.name for s in self.spec.symbols()} | {K.name}


# ------------------------------------------------------------ normalization

def _is_numeric(p: DiffPoly) -> bool:
    return p.is_constant() and not p.params()


def normalize_relation(p: DiffPoly, deformers: Set[str]) -> DiffPoly:
    """Scale a relation to be monic in its highest lone deformer jet."""
    if p.is_zero:
        return p
    lone = []
    for mono, c in p.items():
        if len(mono) == 1 and mono[0][1] == 1 and mono[0][0].field.name in deformers and not c.free_symbols:
            lone.append((mono[0][0].order, mono[0][0].key, mono))
    if lone:
        lone.sort()
        return monic(p, lead=lone[-1][2])
    return monic(primitive(p))


# ----------------------------------------------------------- vanishing pass

def _deformer_factors(mono, deformers: Set[str]):
    return [(j, e) for j, e in mono if j.field.name in deformers]


def _single_term_facts(rel: DiffPoly, deformers: Set[str]) -> Tuple[Set[str], Set[str]]:
    """(vanishing, time-only) facts from a one-term relation."""
    zero, tonly = set(), set()
    if len(rel) != 1:
        return zero, tonly
    (mono, c), = rel.items()
    if c.free_symbols:
        return zero, tonly
    dfs = _deformer_factors(mono, deformers)
    if len(dfs) != 1:
        return zero, tonly
    jet, e = dfs[0]
    if jet.dx == 0 and jet.dt == 0:
        zero.add(jet.field.name)
    elif jet.dx == 1 and jet.dt == 0 and e == 1 and not jet.field.time_only:
        tonly.add(jet.field.name)
    return zero, tonly


def _independence_facts(rel: DiffPoly, deformers: Set[str]) -> Set[str]:
    """When every deformer in rel depends on t only, each basic-field monomial's
    coefficient vanishes on its own."""
    zero = set()
    jets = [j for j in rel.jets() if j.field.name in deformers]
    if not jets or not all(j.field.time_only for j in jets):
        return zero
    groups: Dict[tuple, List[tuple]] = {}
    for mono, c in rel.items():
        basic = tuple((j, e) for j, e in mono if j.field.name not in deformers)
        groups.setdefault(basic, []).append((mono, c))
    for basic, members in groups.items():
        if len(members) != 1:
            continue
        dfs = _deformer_factors(members[0][0], deformers)
        if len(dfs) == 1 and dfs[0][0].dx == 0 and dfs[0][0].dt == 0:
            zero.add(dfs[0][0].field.name)
    return zero


class _Facts:
    def __init__(self, symbols: Sequence[FieldSymbol]):
        self.symbols = {s.name: s for s in symbols}
        self.zero: Set[str] = set()
        self.time: Set[str] = set()

    def copy(self) -> "_Facts":
        out = _Facts(list(self.symbols.values()))
        out.zero, out.time = set(self.zero), set(self.time)
        return out

    def time_symbol(self, name: str) -> FieldSymbol:
        s = self.symbols[name]
        return FieldSymbol(s.name, s.parity, time_only=True)

    def values(self) -> Dict[FieldSymbol, DiffPoly]:
        out: Dict[FieldSymbol, DiffPoly] = {}
        for name, s in self.symbols.items():
            if name in self.zero:
                out[s] = ZERO
            elif name in self.time:
                out[s] = self.time_symbol(name)()
        # time-only replacements may themselves vanish
        for name in self.zero & self.time:
            out[self.time_symbol(name)] = ZERO
        return out

    def apply(self, p: DiffPoly) -> DiffPoly:
        vals = self.values()
        return substitute(p, vals) if vals else p


def _saturate(rels: List[DiffPoly], facts: _Facts, deformers: Set[str], with_time: bool) -> bool:
    """Apply single-term and independence rules to a fixpoint; True if anything new."""
    found = False
    while True:
        new_zero, new_time = set(), set()
        for rel in rels:
            rel = facts.apply(rel)
            if rel.is_zero:
                continue
            z, t = _single_term_facts(rel, deformers)
            new_zero |= z
            if with_time:
                new_time |= t
            new_zero |= _independence_facts(rel, deformers)
        new_zero -= facts.zero
        new_time -= facts.time | facts.zero
        if not new_zero and not new_time:
            return found
        facts.zero |= new_zero
        facts.time |= new_time
        found = True


def _candidates(rels: List[DiffPoly], facts: _Facts, deformers: Set[str]) -> Dict[FieldSymbol, DiffPoly]:
    """Undifferentiated deformers solvable from a relation with a constant coefficient."""
    out: Dict[FieldSymbol, DiffPoly] = {}
    for rel in rels:
        rel = facts.apply(rel)
        for mono, c in rel.items():
            if len(mono) != 1 or mono[0][1] != 1 or c.free_symbols:
                continue
            jet = mono[0][0]
            if jet.order or jet.field.name not in deformers or jet.field.time_only:
                continue
            if jet.field.name in facts.zero or jet.field.name in facts.time:
                continue
            if sum(1 for j in rel.jets() if j.field == jet.field) != 1 or jet.field in out:
                continue
            out[jet.field] = (rel - DiffPoly({mono: c})) / (-c)
    # drop chains between candidates
    return {f: rhs for f, rhs in out.items() if not any(j.field in out for j in rhs.jets())}


def vanishing_pass(rels: List[DiffPoly], symbols: Sequence[FieldSymbol]) -> Tuple[Set[str], Set[str]]:
    """Deforming functions forced to vanish, and those forced to depend on t only."""
    deformers = {s.name for s in symbols}
    facts = _Facts(symbols)
    while True:
        if _saturate(rels, facts, deformers, with_time=False):
            continue
        cands = _candidates(rels, facts, deformers)
        if cands:
            trial = facts.copy()
            trial_rels = [substitute(trial.apply(rel), cands) for rel in rels]
            if _saturate(trial_rels, trial, deformers, with_time=True):
                learned = trial.zero - facts.zero
                if learned:
                    logger.debug("tentative substitution of %s forces %s to vanish",
                                 sorted(f.name for f in cands), sorted(learned))
                    facts.zero |= learned
                    continue
        if _saturate(rels, facts, deformers, with_time=True):
            continue
        break
    return facts.zero, facts.time - facts.zero


# ------------------------------------------------------------- split orders

_BASES = (("s3", "h"), ("s+", "e"), ("s-", "f"), ("1", "one"))


def _solve_linear(p: DiffPoly, jet: JetVar) -> DiffPoly:
    c = partial(p, jet)
    if not _is_numeric(c):
        raise ValueError(f"{jet} does not enter linearly with a constant coefficient")
    return (p - DiffPoly.var(jet).scale(c.constant_value())) / (-c.constant_value())


def split_orders(L: LoopElement, M: LoopElement, spec: DeformationSpec, *, eom_grade: int,
                 label: str, notes: Sequence[str] = (), vanish: bool = True) -> NhdResult:
    F = curvature(L, M + spec.element())
    qt, rt = JetVar(q, 0, 1), JetVar(r, 0, 1)
    up_raw, down_raw = F.slot(eom_grade).e, F.slot(eom_grade).f
    eom = hy.EomPair(_solve_linear(up_raw, qt), _solve_linear(down_raw, rt), label, notes=tuple(notes))
    G = eom.rules().apply_element(F)
    symbols = spec.symbols()
    deformers = {s.name for s in symbols}

    killer = Rules(values={s: ZERO for s in symbols})
    for g in G.grades():
        if g <= eom_grade:
            continue
        for _, attr in _BASES:
            if killer.apply(getattr(G.slot(g), attr)):
                raise PositiveGradeResidual(f"{label}: grade {g} does not close without deformation")

    raw: List[Constraint] = []
    for g in G.grades():
        s = G.slot(g)
        for basis, attr in _BASES:
            p = getattr(s, attr)
            if p.is_zero or (g == eom_grade and basis in ("s+", "s-")):
                continue
            raw.append(Constraint(g, basis, p))

    zero, tonly = (vanishing_pass([c.relation for c in raw], symbols) if vanish else (set(), set()))
    facts = _Facts(symbols)
    facts.zero, facts.time = set(zero), set(tonly)
    ctx = NHD.replaced(*(facts.time_symbol(n) for n in sorted(tonly)))

    constraints = []
    for c in raw:
        rel = facts.apply(c.relation)
        if rel.is_zero:
            continue
        constraints.append(Constraint(c.grade, c.basis, normalize_relation(rel, deformers)))
    eom = hy.EomPair(facts.apply(eom.q_t), facts.apply(eom.r_t), label, notes=tuple(notes))
    order = [s.name for s in symbols]
    logger.info("%s: %d constraints, vanishing %s, time-only %s", label, len(constraints),
                sorted(zero, key=order.index), sorted(tonly))
    return NhdResult(
        label, spec, L, M, eom_grade, eom,
        (facts.apply(up_raw), facts.apply(down_raw)),
        tuple(constraints),
        tuple(sorted(zero, key=order.index)),
        tuple(sorted(tonly, key=order.index)),
        tuple(notes),
        ctx,
    )


# --------------------------------------------------------------- systems

def nls_nhd(n: int = 2, depth: int = 1) -> NhdResult:
    """NLS (n=2) or coupled-KdV-type NLS (n=3) with (i/2) sum lambda^-k G^(k)."""
    table = hy.nls_coeffs(n, alpha=-I)
    L, M = hy.build_lax(hy.NLS, n, table)
    return split_orders(L, M, nls_deformation(depth), eom_grade=0, label=f"NHD NLS n={n} depth={depth}")


def kn_nhd() -> NhdResult:
    L, M = hy.kn_lax()
    return split_orders(L, M.scale(_HALF), dnls_deformation(), eom_grade=1, label="NHD KN")


def cll_nhd() -> NhdResult:
    L, M = hy.cll_lax()
    return split_orders(L, M, dnls_deformation(), eom_grade=1, label="NHD CLL",
                        notes=(ERRATUM_CLL_RT, ERRATUM_CLL_W))


# ------------------------------------------------------------- x-rules

def _x_rule(rel: DiffPoly, deformers: Set[str]) -> Optional[Tuple[FieldSymbol, DiffPoly]]:
    """(D, D_x) when rel is linear in a lone D_x with constant coefficient."""
    best = None
    for mono, c in rel.items():
        if len(mono) != 1 or mono[0][1] != 1 or c.free_symbols:
            continue
        jet = mono[0][0]
        if jet.field.name not in deformers or jet.dx != 1 or jet.dt:
            continue
        others = [j for j in rel.jets() if j.field == jet.field and j != jet]
        if any(j.dx >= 1 for j in others):
            continue
        best = jet
        break
    if best is None:
        return None
    return best.field, _solve_linear(rel, best)


def constraint_rules(result: NhdResult) -> Rules:
    x_rules: Dict[FieldSymbol, DiffPoly] = {}
    for c in result.constraints:
        rule = _x_rule(c.relation, result.deformers())
        if rule is not None and rule[0] not in x_rules:
            x_rules[rule[0]] = rule[1]
    return Rules(x_rules=x_rules)


_Reducer = Tuple[Monomial, sp.Expr, DiffPoly]


def _lead(p: DiffPoly, deformers: Set[str]) -> Tuple[Monomial, sp.Expr]:
    """Term carrying the highest-order deformer jet."""
    def rank(item):
        mono, _ = item
        top = max((j for j, _ in mono if j.field.name in deformers), key=lambda j: (j.dx, j.field.name))
        return top.dx, top.field.name, [j.key for j, _ in mono]
    return max(p.items(), key=rank)


def algebraic_reducers(result: NhdResult) -> List[_Reducer]:
    """(lead monomial, lead coefficient, relation) for every constraint with no derivatives
    of the deforming functions and one deformer factor per term, and for its x-derivative."""
    deformers = result.deformers()
    out: List[_Reducer] = []
    for c in result.constraints:
        rel = c.relation
        jets = [j for j in rel.jets() if j.field.name in deformers]
        if not jets or any(j.dx or j.dt for j in jets):
            continue
        if any(sum(e for j, e in mono if j.field.name in deformers) != 1 for mono, _ in rel.items()):
            continue
        for p in (rel, d_x(rel)):
            out.append(_lead(p, deformers) + (p,))
    return out


def _quotient(mono: Monomial, lead: Monomial) -> Optional[Dict[JetVar, int]]:
    left = dict(mono)
    for jet, e in lead:
        if left.get(jet, 0) < e:
            return None
        left[jet] -= e
    return {j: e for j, e in left.items() if e}


def reduce_algebraic(p: DiffPoly, reducers: Sequence[_Reducer], limit: int = 64) -> DiffPoly:
    """Remainder of p after cancelling every term divisible by a reducer's lead monomial."""
    for _ in range(limit):
        step = None
        for mono, c in p.items():
            for lead, lc, rel in reducers:
                quot = _quotient(mono, lead)
                if quot is not None:
                    step = rel * DiffPoly.monomial(quot, c / lc)
                    break
            if step is not None:
                break
        if step is None:
            return p
        p = p - step
    logger.warning("algebraic reduction stopped after %d steps", limit)
    return p


def closure_residual(result: NhdResult) -> LoopElement:
    """Curvature with the deformed equations, the constraint x-rules and the
    non-differential constraints imposed."""
    facts = result.facts()
    F = curvature(result.L, result.M + result.spec.element())
    if facts:
        F = F.map(lambda p: substitute(p, facts))
    F = constraint_rules(result).apply_element(result.deformed_eoms.rules().apply_element(F))
    reducers = algebraic_reducers(result)
    if reducers:
        F = F.map(lambda p: reduce_algebraic(p, reducers))
    return F


def check_closure(result: NhdResult) -> bool:
    return closure_residual(result).is_zero


# ------------------------------------------------------------- reduction

@dataclass(frozen=True)
class ReducedConstraint:
    grade: int
    eliminated: str
    relation: DiffPoly


def reduce_constraints(result: NhdResult) -> Tuple[ReducedConstraint, ...]:
    """Eliminate each diagonal function D: differentiate the s+ relation,
    rewrite D_x by the s3 relation, and cross-multiply with the s- relation."""
    deformers = result.deformers()
    out = []
    for grade, diag, _, _ in result.spec.components:
        if diag is None or diag.name in result.vanishing or diag.name in result.time_only:
            continue
        rho = None
        s3 = result.constraint(grade, "s3")
        rule = _x_rule(s3, {diag.name}) if s3 else None
        if rule is not None:
            rho = rule[1]
        e1, e2 = result.constraint(grade, "s+"), result.constraint(grade, "s-")
        Dj = JetVar(diag)
        if rho is None or not e1 or not e2 or Dj not in e1.jets() or Dj not in e2.jets():
            logger.debug("%s: nothing to eliminate at grade %d", result.label, grade)
            continue
        e1p = Rules(x_rules={diag: rho}).apply(d_x(e1))
        c1, c2 = partial(e1p, Dj), partial(e2, Dj)
        if any(j.field == diag for j in c1.jets() | c2.jets()):
            raise NotReducible(f"{diag.name} enters non-linearly at grade {grade}")
        rel = c1 * e2 - c2 * e1p
        if any(j.field == diag for j in rel.jets()):
            raise NotReducible(f"{diag.name} survives elimination at grade {grade}")
        out.append(ReducedConstraint(grade, diag.name, normalize_relation(primitive(rel), deformers)))
    if not out:
        raise NotReducible(f"{result.label}: no diagonal function can be eliminated without division")
    return tuple(out)


@dataclass(frozen=True)
class EliminatedEquation:
    equation: DiffPoly
    order: int
    residual_symbols: Tuple[str, ...]


def eliminate_deformers(result: NhdResult, reduced: Optional[Sequence[ReducedConstraint]] = None) -> EliminatedEquation:
    """Close the deepest reduced constraint in q, r: off-diagonal functions are
    solved level by level, the first level from the deformed equations."""
    reduced = reduced if reduced is not None else reduce_constraints(result)
    deepest = min(reduced, key=lambda rc: rc.grade)
    deformers = result.deformers()
    values: Dict[FieldSymbol, DiffPoly] = {}
    x_rules: Dict[FieldSymbol, DiffPoly] = {}
    comps = sorted(result.spec.components, key=lambda c: -c[0])
    for idx, (grade, diag, up, down) in enumerate(comps):
        if up is None or up.name in result.vanishing:
            continue
        if idx == 0 or grade == result.eom_grade - 1:
            src_up, src_down = result.eom_relations
        else:
            above = comps[idx - 1][0]
            src_up, src_down = result.constraint(above, "s+"), result.constraint(above, "s-")
        values[up] = _solve_linear(src_up, JetVar(up))
        values[down] = _solve_linear(src_down, JetVar(down))
        if diag is not None and diag.name not in result.vanishing:
            rule = _x_rule(result.constraint(grade, "s3"), {diag.name})
            if rule is not None:
                x_rules[diag] = rule[1]
    eq = Rules(x_rules=x_rules, values=values).apply(deepest.relation)
    eq = primitive(eq)
    basic = {q, r}
    residual = tuple(sorted({j.field.name for j in eq.jets() if j.field.name in deformers}))
    return EliminatedEquation(eq, eq.max_order(basic), residual)


# ------------------------------------------------------------- resolution

def kn_resolve(result: NhdResult) -> hy.EomPair:
    """Integrate the constraints in potentials q = u_x, r = v_x with t-dependent
    integration functions; the diagonal function picks up K(t)."""
    pot = {q: u(1), r: v(1)}
    deformers = result.deformers()
    diagonals = {d.name for _, d, _, _ in result.spec.components if d is not None}
    pending = [substitute(c.relation, pot) for c in result.constraints]
    solved: Dict[FieldSymbol, DiffPoly] = {}
    progress = True
    while pending and progress:
        progress = False
        for rel in list(pending):
            rel_s = substitute(rel, solved) if solved else rel
            if rel_s.is_zero:
                pending.remove(rel)
                progress = True
                continue
            rule = _x_rule(rel_s, {n for n in deformers if n not in {s.name for s in solved}})
            if rule is None:
                continue
            D, rhs = rule
            if any(j.field.name in deformers and not j.field.time_only for j in rhs.jets()):
                continue
            try:
                val = integrate_x(rhs)
            except NotExact:
                raise NotResolvable(f"{D.name}_x = {rhs} has no polynomial antiderivative") from None
            if D.name in diagonals:
                val = val + K()
            solved[D] = val
            pending.remove(rel)
            progress = True
    if pending:
        left = [str(substitute(p, solved)) for p in pending]
        raise NotResolvable("constraints couple the deforming functions to q r non-linearly: " + "; ".join(left))
    rhs_u = substitute(substitute(result.deformed_eoms.q_t, pot), solved)
    rhs_v = substitute(substitute(result.deformed_eoms.r_t, pot), solved)
    logger.info("%s resolved in potentials: %s", result.label, ", ".join(f"{k.name}={v}" for k, v in solved.items()))
    return hy.EomPair(rhs_u, rhs_v, f"{result.label} potentials",
                      lhs=(JetVar(u, 1, 1), JetVar(v, 1, 1)), notes=(NOTE_LENELLS_FOKAS,))
