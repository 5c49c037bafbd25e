"""sl(2) loop algebra over differential polynomials.

Elements are stored per lambda-grade in the sigma basis (s3, s+, s-) plus an
identity part used by the gl(2) gauge of the DNLS pair. The kernel basis

    b^j  = lambda^j s3 / 2
    F1^j = (lambda^j / 2) ((kappa/2) s+ - s-)
    F2^j = (lambda^j / 2) ((kappa/2) s+ + s-)

obeys [b^j, F1^k] = F2^{j+k}, [b^j, F2^k] = F1^{j+k}, [F1^j, F2^k] = (kappa/2) b^{j+k}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Tuple

import sympy as sp

from laxforge.diffpoly import (
    KAPPA, ZERO, DiffPoly, FieldSymbol, JetVar, d_t, d_x, map_jets, _coerce,
)

logger = logging.getLogger("laxforge.loopalg")

Window = Tuple[Optional[int], Optional[int]]

_HALF = sp.Rational(1, 2)


class WindowTooNarrow(ValueError):
    """The gauge generator is too shallow for the requested grades."""


def _dp(x) -> DiffPoly:
    p = _coerce(x)
    if p is NotImplemented:
        raise TypeError(f"cannot use {x!r} as a coefficient")
    return p


@dataclass(frozen=True)
class Slot:
    """Coefficients of s3, s+, s- and the identity at one grade."""
    h: DiffPoly = ZERO
    e: DiffPoly = ZERO
    f: DiffPoly = ZERO
    one: DiffPoly = ZERO

    @property
    def is_zero(self) -> bool:
        return self.h.is_zero and self.e.is_zero and self.f.is_zero and self.one.is_zero

    def __add__(self, o: "Slot") -> "Slot":
        return Slot(self.h + o.h, self.e + o.e, self.f + o.f, self.one + o.one)

    def __neg__(self) -> "Slot":
        return Slot(-self.h, -self.e, -self.f, -self.one)

    def map(self, fn: Callable[[DiffPoly], DiffPoly]) -> "Slot":
        return Slot(fn(self.h), fn(self.e), fn(self.f), fn(self.one))

    def bracket(self, o: "Slot") -> "Slot":
        A, B, C = self.h, self.e, self.f
        A2, B2, C2 = o.h, o.e, o.f
        return Slot(
            B * C2 - C * B2,
            (A * B2 - B * A2).scale(2),
            (C * A2 - A * C2).scale(2),
        )

    def kernel(self) -> Tuple[DiffPoly, DiffPoly, DiffPoly]:
        """(cb, c1, c2) in the b, F1, F2 basis."""
        two_b_over_k = self.e.scale(2 / KAPPA)
        return (self.h.scale(2), two_b_over_k - self.f, two_b_over_k + self.f)

    @classmethod
    def from_kernel(cls, cb, c1, c2, one=ZERO) -> "Slot":
        cb, c1, c2 = _dp(cb), _dp(c1), _dp(c2)
        return cls(cb.scale(_HALF), (c1 + c2).scale(KAPPA / 4), (c2 - c1).scale(_HALF), _dp(one))


class LoopElement:
    __slots__ = ("_slots", "window")

    def __init__(self, slots: Optional[Mapping[int, Slot]] = None, window: Optional[Window] = None):
        lo, hi = window if window is not None else (None, None)
        self._slots: Dict[int, Slot] = {
            g: s for g, s in (slots or {}).items()
            if not s.is_zero and (lo is None or g >= lo) and (hi is None or g <= hi)
        }
        self.window = window

    # construction
    @classmethod
    def sigma(cls, grades: Mapping[int, tuple], window: Optional[Window] = None) -> "LoopElement":
        """From {grade: (h, e, f[, one])} in the sigma basis."""
        return cls({g: Slot(*(_dp(c) for c in comps)) for g, comps in grades.items()}, window)

    @classmethod
    def kernel(cls, grades: Mapping[int, tuple], window: Optional[Window] = None) -> "LoopElement":
        """From {grade: (cb, c1, c2)} in the b, F1, F2 basis."""
        return cls({g: Slot.from_kernel(*comps) for g, comps in grades.items()}, window)

    # inspection
    def grades(self) -> List[int]:
        return sorted(self._slots, reverse=True)

    @property
    def top(self) -> int:
        return max(self._slots) if self._slots else 0

    @property
    def bottom(self) -> int:
        return min(self._slots) if self._slots else 0

    @property
    def is_zero(self) -> bool:
        return not self._slots

    def slot(self, g: int) -> Slot:
        return self._slots.get(g, Slot())

    def kernel_at(self, g: int) -> Tuple[DiffPoly, DiffPoly, DiffPoly]:
        return self.slot(g).kernel()

    def items(self) -> Iterator[Tuple[int, Slot]]:
        for g in self.grades():
            yield g, self._slots[g]

    def records(self, kernel: bool = False) -> List[Tuple[int, str, DiffPoly]]:
        """Non-zero (grade, basis, coefficient) triples, highest grade first."""
        out = []
        for g, s in self.items():
            if kernel:
                comps = zip(("b", "F1", "F2", "1"), s.kernel() + (s.one,))
            else:
                comps = zip(("s3", "s+", "s-", "1"), (s.h, s.e, s.f, s.one))
            out.extend((g, name, c) for name, c in comps if not c.is_zero)
        return out

    # arithmetic
    def _merge(self, other: "LoopElement", sign: int) -> "LoopElement":
        out = dict(self._slots)
        for g, s in other._slots.items():
            s = s if sign > 0 else -s
            out[g] = out[g] + s if g in out else s
        return LoopElement(out, _meet(self.window, other.window))

    def __add__(self, other: "LoopElement") -> "LoopElement":
        return self._merge(other, 1)

    def __sub__(self, other: "LoopElement") -> "LoopElement":
        return self._merge(other, -1)

    def __neg__(self) -> "LoopElement":
        return LoopElement({g: -s for g, s in self._slots.items()}, self.window)

    def map(self, fn: Callable[[DiffPoly], DiffPoly]) -> "LoopElement":
        return LoopElement({g: s.map(fn) for g, s in self._slots.items()}, self.window)

    def scale(self, c) -> "LoopElement":
        c = _dp(c)
        return self.map(lambda p: p * c)

    def shift(self, k: int) -> "LoopElement":
        """Multiply by lambda^k."""
        return LoopElement({g + k: s for g, s in self._slots.items()})

    def restrict(self, lo: Optional[int] = None, hi: Optional[int] = None) -> "LoopElement":
        return LoopElement(self._slots, (lo, hi))

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoopElement):
            return NotImplemented
        return self._slots == other._slots

    def __hash__(self) -> int:
        return hash(frozenset(self._slots.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{g}:{b}={c}" for g, b, c in self.records())
        return f"LoopElement({inner})"


def _meet(a: Optional[Window], b: Optional[Window]) -> Optional[Window]:
    if a is None:
        return b
    if b is None:
        return a
    lo = max((x for x in (a[0], b[0]) if x is not None), default=None)
    hi = min((x for x in (a[1], b[1]) if x is not None), default=None)
    return (lo, hi)


def b(j: int, c=1) -> LoopElement:
    return LoopElement.kernel({j: (c, 0, 0)})


def F1(j: int, c=1) -> LoopElement:
    return LoopElement.kernel({j: (0, c, 0)})


def F2(j: int, c=1) -> LoopElement:
    return LoopElement.kernel({j: (0, 0, c)})


def commutator(X: LoopElement, Y: LoopElement, window: Optional[Window] = None) -> LoopElement:
    w = _meet(_meet(X.window, Y.window), window)
    lo, hi = w if w is not None else (None, None)
    acc: Dict[int, Slot] = {}
    for g1, s1 in X.items():
        for g2, s2 in Y.items():
            g = g1 + g2
            if (lo is not None and g < lo) or (hi is not None and g > hi):
                continue
            s = s1.bracket(s2)
            acc[g] = acc[g] + s if g in acc else s
    return LoopElement(acc, w)


def element_dx(X: LoopElement) -> LoopElement:
    return X.map(d_x)


def element_dt(X: LoopElement) -> LoopElement:
    return X.map(d_t)


def curvature(L: LoopElement, M: LoopElement, window: Optional[Window] = None) -> LoopElement:
    """L_t - M_x + [L, M]."""
    out = element_dt(L) - element_dx(M) + commutator(L, M, window)
    return out.restrict(*window) if window is not None else out


# ------------------------------------------------------------------- gauge

@dataclass(frozen=True)
class GaugeGenerator:
    """(xi1, xi2) pairs for grades -1, -2, ..., -J."""
    components: Tuple[Tuple[DiffPoly, DiffPoly], ...] = ()

    @property
    def depth(self) -> int:
        return len(self.components)

    def xi(self, j: int) -> Tuple[DiffPoly, DiffPoly]:
        return self.components[j - 1]

    def extended(self, xi1, xi2) -> "GaugeGenerator":
        return GaugeGenerator(self.components + ((_dp(xi1), _dp(xi2)),))

    def with_component(self, j: int, xi1, xi2) -> "GaugeGenerator":
        comps = list(self.components)
        comps[j - 1] = (_dp(xi1), _dp(xi2))
        return GaugeGenerator(tuple(comps))

    def element(self) -> LoopElement:
        return LoopElement.kernel({-j: (0, x1, x2) for j, (x1, x2) in enumerate(self.components, start=1)})


def adjoint(X: LoopElement, g: GaugeGenerator, window: Window) -> LoopElement:
    """exp(ad_F) X inside the window."""
    lo, hi = window
    if lo is None:
        raise ValueError("window must be bounded below")
    if g.depth < X.top - lo:
        raise WindowTooNarrow(f"need {X.top - lo} gauge components, have {g.depth}")
    F = g.element()
    term = X.restrict(lo, None)
    out = term
    k = 0
    while True:
        k += 1
        term = commutator(F, term).restrict(lo, None).scale(sp.Rational(1, k))
        if term.is_zero:
            break
        out = out + term
    return out.restrict(lo, hi)


def gauge_conjugate(X: LoopElement, g: GaugeGenerator, window: Window) -> LoopElement:
    """e^F X e^-F + (d_x e^F) e^-F inside the window."""
    lo, hi = window
    if lo is None:
        raise ValueError("window must be bounded below")
    need = max(X.top - lo, -lo)
    if g.depth < need:
        raise WindowTooNarrow(f"need {need} gauge components, have {g.depth}")
    out = adjoint(X, g, window)
    F = g.element()
    # sum_k ad_F^k(F_x) / (k+1)!
    term = element_dx(F).restrict(lo, None)
    k = 0
    while not term.is_zero:
        out = out + term
        k += 1
        term = commutator(F, term).restrict(lo, None).scale(sp.Rational(1, k + 1))
    return out.restrict(lo, hi)


def killing_project(X: LoopElement, n: int) -> DiffPoly:
    """2 Tr(X b^n): the b-coefficient of X at grade -n."""
    if X.window is not None:
        lo, hi = X.window
        if (lo is not None and -n < lo) or (hi is not None and -n > hi):
            raise ValueError(f"grade {-n} outside the window {X.window}")
    return X.kernel_at(-n)[0]


def polar_rotate(L: LoopElement, theta: DiffPoly, images: Mapping[FieldSymbol, DiffPoly],
                 up: FieldSymbol, down: FieldSymbol) -> LoopElement:
    """Diagonal gauge rotation exp(theta b^0) of a connection whose s+ entries are
    linear in `up` and s- entries linear in `down`; the rotated fields are given
    by `images` (e.g. q -> i kappa R, r -> -i R)."""
    def rotate(p: DiffPoly, fieldsym: FieldSymbol) -> DiffPoly:
        for j in p.jets():
            if j.field == fieldsym and (j.dx or j.dt):
                raise ValueError(f"entry depends on the derivative {j}")
        if any(sum(e for j, e in m if j.field == fieldsym) != 1 for m, _ in p.items()):
            raise ValueError(f"entry is not linear in {fieldsym}")
        img = images[fieldsym]
        return map_jets(p, lambda j: img if j.field == fieldsym else None)

    slots = {g: Slot(s.h, rotate(s.e, up), rotate(s.f, down), s.one) for g, s in L.items()}
    return LoopElement(slots) + b(0, d_x(theta))


# ------------------------------------------------------------------- rules

class Rules:
    """Rewrite rules for jets.

    values  : field -> expression (replaces every jet of the field)
    t_rules : field -> f_t (a jet with dt >= 1 becomes d_x^dx d_t^(dt-1) of it)
    x_rules : field -> f_x (a jet with dx >= 1 becomes d_x^(dx-1) d_t^dt of it)
    Images are rewritten recursively until no rule applies.
    """

    def __init__(self, t_rules: Optional[Mapping[FieldSymbol, DiffPoly]] = None,
                 x_rules: Optional[Mapping[FieldSymbol, DiffPoly]] = None,
                 values: Optional[Mapping[FieldSymbol, DiffPoly]] = None,
                 max_depth: int = 64):
        self.t_rules = {k: _dp(v) for k, v in (t_rules or {}).items()}
        self.x_rules = {k: _dp(v) for k, v in (x_rules or {}).items()}
        self.values = {k: _dp(v) for k, v in (values or {}).items()}
        self.max_depth = max_depth
        self._memo: Dict[JetVar, Optional[DiffPoly]] = {}

    def merged(self, other: "Rules") -> "Rules":
        return Rules({**self.t_rules, **other.t_rules}, {**self.x_rules, **other.x_rules},
                     {**self.values, **other.values}, max(self.max_depth, other.max_depth))

    def _step(self, jet: JetVar) -> Optional[DiffPoly]:
        f = jet.field
        if f in self.values:
            return d_t(d_x(self.values[f], jet.dx), jet.dt)
        if f in self.t_rules and jet.dt >= 1:
            return d_t(d_x(self.t_rules[f], jet.dx), jet.dt - 1)
        if f in self.x_rules and jet.dx >= 1:
            return d_t(d_x(self.x_rules[f], jet.dx - 1), jet.dt)
        return None

    def _full(self, jet: JetVar, depth: int = 0) -> Optional[DiffPoly]:
        if jet in self._memo:
            return self._memo[jet]
        img = self._step(jet)
        if img is not None:
            if depth > self.max_depth:
                raise RuntimeError(f"rewrite rules do not terminate at {jet}")
            img = map_jets(img, lambda j: self._full(j, depth + 1))
        self._memo[jet] = img
        return img

    def apply(self, p: DiffPoly) -> DiffPoly:
        return map_jets(p, self._full)

    def apply_element(self, X: LoopElement) -> LoopElement:
        return X.map(self.apply)
