"""Exact differential polynomials in field jets.

A DiffPoly maps monomials (sorted tuples of (JetVar, exponent)) to expanded
sympy coefficients: Gaussian rationals times monomials in named parameters.
Two commuting total derivations d_x and d_t act by the Leibniz rule.
"""
from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import sympy as sp

logger = logging.getLogger("laxforge.diffpoly")

EVEN, ODD, MIXED = "even", "odd", "mixed"


class NotExact(ValueError):
    """No differential-polynomial antiderivative exists."""


class MissingAssignment(KeyError):
    """A jet or parameter has no value in an evaluation sample."""


class TimeJetError(ValueError):
    """An operation restricted to x-jets met a t-derivative."""


# ---------------------------------------------------------------- parameters

_PARAMS: Dict[str, sp.Symbol] = {}


def param(name: str) -> sp.Symbol:
    """Symbolic parameter by name. kappa is positive so sqrt(kappa)**2 == kappa."""
    s = _PARAMS.get(name)
    if s is None:
        s = sp.Symbol(name, positive=True) if name == "kappa" else sp.Symbol(name)
        _PARAMS[name] = s
    return s


I = sp.I
ALPHA = param("alpha")
BETA = param("beta")
KAPPA = param("kappa")


# -------------------------------------------------------------------- fields

def _flip(parity: str, n: int) -> str:
    if n % 2 == 0:
        return parity
    return ODD if parity == EVEN else EVEN


@dataclass(frozen=True)
class FieldSymbol:
    name: str
    parity: str = EVEN
    time_only: bool = False

    def __post_init__(self):
        if self.parity not in (EVEN, ODD):
            raise ValueError(f"parity must be even or odd, got {self.parity!r}")

    def __call__(self, dx: int = 0, dt: int = 0) -> "DiffPoly":
        return DiffPoly.var(JetVar(self, dx, dt))

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class JetVar:
    field: FieldSymbol
    dx: int = 0
    dt: int = 0

    def __post_init__(self):
        if self.dx < 0 or self.dt < 0:
            raise ValueError("derivative orders must be non-negative")
        if self.field.time_only and self.dx:
            raise ValueError(f"{self.field.name} is time-only and has no x-jets")

    @property
    def key(self) -> Tuple[str, int, int]:
        return (self.field.name, self.dt, self.dx)

    @property
    def parity(self) -> str:
        return _flip(self.field.parity, self.dx + self.dt)

    @property
    def order(self) -> int:
        return self.dx + self.dt

    def derive(self, wrt: str) -> Optional["JetVar"]:
        if wrt == "x":
            if self.field.time_only:
                return None
            return JetVar(self.field, self.dx + 1, self.dt)
        return JetVar(self.field, self.dx, self.dt + 1)

    def __str__(self) -> str:
        if not (self.dx or self.dt):
            return self.field.name
        return f"{self.field.name}[{'x' * self.dx}{'t' * self.dt}]"


class Context:
    """Registry of field symbols; names are unique within a context."""

    def __init__(self, fields: Iterable[FieldSymbol] = ()):
        self._fields: Dict[str, FieldSymbol] = {}
        for f in fields:
            self.add(f)

    def add(self, f: FieldSymbol) -> FieldSymbol:
        old = self._fields.get(f.name)
        if old is not None and old != f:
            raise ValueError(f"field {f.name!r} already declared as {old}")
        self._fields[f.name] = f
        return f

    def field(self, name: str, parity: str = EVEN, time_only: bool = False) -> FieldSymbol:
        return self.add(FieldSymbol(name, parity, time_only))

    def extended(self, *fields: FieldSymbol) -> "Context":
        ctx = Context(self._fields.values())
        for f in fields:
            ctx.add(f)
        return ctx

    def replaced(self, *fields: FieldSymbol) -> "Context":
        """Copy where the given symbols override same-named ones."""
        ctx = Context(f for f in self._fields.values() if f.name not in {g.name for g in fields})
        for f in fields:
            ctx.add(f)
        return ctx

    def __contains__(self, name: str) -> bool:
        return name in self._fields

    def __getitem__(self, name: str) -> FieldSymbol:
        return self._fields[name]

    def __iter__(self) -> Iterator[FieldSymbol]:
        return iter(self._fields.values())


STANDARD = Context()
q = STANDARD.field("q")
r = STANDARD.field("r")
phi = STANDARD.field("phi", ODD)
R = STANDARD.field("R")
u = STANDARD.field("u")
v = STANDARD.field("v")


# ----------------------------------------------------------------- monomials

Monomial = Tuple[Tuple[JetVar, int], ...]
ONE: Monomial = ()


def _mono(factors: Mapping[JetVar, int]) -> Monomial:
    return tuple(sorted(((j, e) for j, e in factors.items() if e), key=lambda t: t[0].key))


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d: Dict[JetVar, int] = dict(a)
    for j, e in b:
        d[j] = d.get(j, 0) + e
    return _mono(d)


def _mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def _mono_order(m: Monomial):
    return (_mono_degree(m), tuple((j.key, e) for j, e in m))


def _clean(acc: Mapping[Monomial, sp.Expr]) -> Dict[Monomial, sp.Expr]:
    out = {}
    for m, c in acc.items():
        c = sp.expand(c)
        if c != 0:
            out[m] = c
    return out


# ------------------------------------------------------------------ DiffPoly

Scalar = Union[int, Fraction, sp.Expr]


class DiffPoly:
    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Mapping[Monomial, sp.Expr]] = None):
        # terms are trusted to be normalized; use normalize() for raw input
        self._terms: Dict[Monomial, sp.Expr] = dict(terms) if terms else {}
        self._hash = None

    # construction
    @classmethod
    def const(cls, c: Scalar) -> "DiffPoly":
        c = sp.expand(sp.sympify(c))
        return cls({ONE: c}) if c != 0 else cls()

    @classmethod
    def var(cls, jet: JetVar, exp: int = 1) -> "DiffPoly":
        return cls({((jet, exp),): sp.Integer(1)})

    @classmethod
    def monomial(cls, factors: Mapping[JetVar, int], coeff: Scalar = 1) -> "DiffPoly":
        c = sp.expand(sp.sympify(coeff))
        return cls({_mono(factors): c}) if c != 0 else cls()

    # inspection
    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def terms(self) -> List[Tuple[Monomial, sp.Expr]]:
        return sorted(self._terms.items(), key=lambda t: _mono_order(t[0]))

    def items(self):
        return self._terms.items()

    def coefficient(self, mono: Monomial = ONE) -> sp.Expr:
        return self._terms.get(mono, sp.Integer(0))

    def jets(self) -> set:
        return {j for m in self._terms for j, _ in m}

    def fields(self) -> set:
        return {j.field for j in self.jets()}

    def params(self) -> set:
        out = set()
        for c in self._terms.values():
            out |= c.free_symbols
        return out

    def is_constant(self) -> bool:
        return all(m == ONE for m in self._terms)

    def constant_value(self) -> sp.Expr:
        if not self.is_constant():
            raise ValueError("polynomial is not a constant")
        return self.coefficient(ONE)

    def degree(self) -> int:
        return max((_mono_degree(m) for m in self._terms), default=0)

    def max_order(self, fields: Optional[Iterable[FieldSymbol]] = None) -> int:
        fs = set(fields) if fields is not None else None
        return max((j.order for j in self.jets() if fs is None or j.field in fs), default=0)

    def has_t_jets(self) -> bool:
        return any(j.dt for j in self.jets())

    # arithmetic
    def __add__(self, other) -> "DiffPoly":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self._terms)
        for m, c in other._terms.items():
            old = out.get(m)
            if old is None:
                out[m] = c
                continue
            s = sp.expand(old + c)
            if s == 0:
                del out[m]
            else:
                out[m] = s
        return DiffPoly(out)

    __radd__ = __add__

    def __neg__(self) -> "DiffPoly":
        return DiffPoly({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "DiffPoly":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "DiffPoly":
        return (-self) + other

    def __mul__(self, other) -> "DiffPoly":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_constant() and other._terms:
            return self.scale(other.coefficient(ONE))
        if self.is_constant() and self._terms:
            return other.scale(self.coefficient(ONE))
        acc: Dict[Monomial, sp.Expr] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return DiffPoly(_clean(acc))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "DiffPoly":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        out = DiffPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def scale(self, c: Scalar) -> "DiffPoly":
        c = sp.sympify(c)
        if c == 0:
            return DiffPoly()
        return DiffPoly(_clean({m: v * c for m, v in self._terms.items()}))

    def __truediv__(self, c: Scalar) -> "DiffPoly":
        return self.scale(_reciprocal(sp.sympify(c)))

    def subs_params(self, values: Mapping[Union[str, sp.Symbol], Scalar]) -> "DiffPoly":
        rep = {(param(k) if isinstance(k, str) else k): sp.sympify(v) for k, v in values.items()}
        return DiffPoly(_clean({m: c.xreplace(rep) for m, c in self._terms.items()}))

    # comparison
    def __eq__(self, other) -> bool:
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"DiffPoly({to_text(self)!r})"

    def __str__(self) -> str:
        return to_text(self)

    # evaluation
    def evaluate(self, sample: Mapping[JetVar, object], params: Optional[Mapping] = None):
        """Evaluate with scalars or numpy arrays as jet values."""
        subs = {(param(k) if isinstance(k, str) else k): v for k, v in (params or {}).items()}
        total = 0
        for mono, c in self._terms.items():
            val = _coeff_value(c, subs)
            for jet, e in mono:
                try:
                    x = sample[jet]
                except KeyError:
                    raise MissingAssignment(str(jet)) from None
                val = val * (x ** e if e != 1 else x)
            total = total + val
        return total


ZERO = DiffPoly()


def _coerce(x) -> DiffPoly:
    if isinstance(x, DiffPoly):
        return x
    if isinstance(x, (int, Fraction, sp.Basic)) and not isinstance(x, bool):
        if isinstance(x, Fraction):
            x = sp.Rational(x.numerator, x.denominator)
        return DiffPoly.const(x)
    return NotImplemented


def _reciprocal(c: sp.Expr) -> sp.Expr:
    if c == 0:
        raise ZeroDivisionError("division by zero coefficient")
    if c.free_symbols:
        return sp.expand(1 / c)
    re_, im_ = sp.re(c), sp.im(c)
    return sp.expand((re_ - I * im_) / (re_ ** 2 + im_ ** 2))


def _coeff_value(c: sp.Expr, subs: Mapping[sp.Symbol, object]) -> complex:
    missing = c.free_symbols - set(subs)
    if missing:
        raise MissingAssignment(", ".join(sorted(str(s) for s in missing)))
    if not c.free_symbols:
        return complex(c)
    return complex(c.xreplace({s: sp.sympify(v) for s, v in subs.items() if s in c.free_symbols}))


def normalize(raw: Iterable[Tuple[Scalar, Mapping[JetVar, int]]]) -> DiffPoly:
    """Canonical DiffPoly from (coefficient, {jet: exponent}) pairs."""
    acc: Dict[Monomial, sp.Expr] = {}
    for coeff, factors in raw:
        m = _mono(factors)
        acc[m] = acc.get(m, 0) + sp.sympify(coeff)
    return DiffPoly(_clean(acc))


def const(c: Scalar) -> DiffPoly:
    return DiffPoly.const(c)


# -------------------------------------------------------------- derivations

def _derive(p: DiffPoly, wrt: str) -> DiffPoly:
    acc: Dict[Monomial, sp.Expr] = {}
    for mono, c in p.items():
        for i, (jet, e) in enumerate(mono):
            dj = jet.derive(wrt)
            if dj is None:
                continue
            rest = list(mono)
            if e == 1:
                del rest[i]
            else:
                rest[i] = (jet, e - 1)
            m = _mono_mul(tuple(rest), ((dj, 1),))
            acc[m] = acc.get(m, 0) + c * e
    return DiffPoly(_clean(acc))


def d_x(p: DiffPoly, k: int = 1) -> DiffPoly:
    p = _coerce(p)
    for _ in range(k):
        if p.is_zero:
            break
        p = _derive(p, "x")
    return p


def d_t(p: DiffPoly, k: int = 1) -> DiffPoly:
    p = _coerce(p)
    for _ in range(k):
        if p.is_zero:
            break
        p = _derive(p, "t")
    return p


def partial(p: DiffPoly, jet: JetVar) -> DiffPoly:
    """Ordinary partial derivative with respect to one jet variable."""
    acc: Dict[Monomial, sp.Expr] = {}
    for mono, c in p.items():
        for i, (j, e) in enumerate(mono):
            if j != jet:
                continue
            rest = list(mono)
            if e == 1:
                del rest[i]
            else:
                rest[i] = (j, e - 1)
            m = tuple(rest)
            acc[m] = acc.get(m, 0) + c * e
    return DiffPoly(_clean(acc))


def map_jets(p: DiffPoly, fn: Callable[[JetVar], Optional[DiffPoly]]) -> DiffPoly:
    """Replace every jet j by fn(j); None keeps j."""
    cache: Dict[JetVar, DiffPoly] = {}
    out = ZERO
    for mono, c in p.items():
        term = DiffPoly.const(c)
        keep: Dict[JetVar, int] = {}
        for jet, e in mono:
            if jet not in cache:
                img = fn(jet)
                cache[jet] = img if img is None else _coerce(img)
            img = cache[jet]
            if img is None:
                keep[jet] = e
            else:
                term = term * img ** e
        if keep:
            term = term * DiffPoly.monomial(keep)
        out = out + term
    return out


def substitute(p: DiffPoly, mapping: Mapping[Union[FieldSymbol, JetVar], object]) -> DiffPoly:
    """Replace jets or whole fields. A field key replaces every jet of that field
    by the matching total derivative of its image."""
    images = {k: _coerce(v) for k, v in mapping.items()}

    def fn(jet: JetVar) -> Optional[DiffPoly]:
        if jet in images:
            return images[jet]
        img = images.get(jet.field)
        if img is None:
            return None
        return d_t(d_x(img, jet.dx), jet.dt)

    return map_jets(p, fn)


# ------------------------------------------------------- calculus of variations

def variational_derivative(density: DiffPoly, f: FieldSymbol) -> DiffPoly:
    """Euler operator sum_k (-d_x)^k d/d f_(k)."""
    for jet in density.jets():
        if jet.dt:
            raise TimeJetError(f"density contains the t-jet {jet}")
    out = ZERO
    for k in sorted({j.dx for j in density.jets() if j.field == f}):
        term = partial(density, JetVar(f, k))
        for _ in range(k):
            term = -d_x(term)
        out = out + term
    return out


def homotopy_density(dq: DiffPoly, dr: DiffPoly, fq: FieldSymbol = q, fr: FieldSymbol = r) -> DiffPoly:
    """Candidate density H with dH/dq = dq, dH/dr = dr (homotopy operator,
    terms weighted by inverse field degree). Callers must verify the result."""
    acc = fq() * dq + fr() * dr
    out: Dict[Monomial, sp.Expr] = {}
    for mono, c in acc.items():
        deg = sum(e for j, e in mono if j.field in (fq, fr))
        if deg == 0:
            continue
        out[mono] = c / deg
    return DiffPoly(_clean(out))


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


def integrate_x(p: DiffPoly) -> DiffPoly:
    """Antiderivative in x with zero integration constant.

    Terms are grouped by the multiset of (field, dt) slots and their total
    x-order w; each group is solved as a linear system over the monomials of
    x-order w-1 carrying the same slots."""
    if p.is_zero:
        return ZERO
    groups: Dict[tuple, Dict[Monomial, sp.Expr]] = {}
    for mono, c in p.items():
        slots, scalar, w = [], [], 0
        for jet, e in mono:
            if jet.field.time_only:
                scalar.append((jet, e))
            else:
                slots.extend([(jet.field, jet.dt)] * e)
                w += jet.dx * e
        if not slots or w == 0:
            raise NotExact(f"term {to_text(DiffPoly({mono: c}))} has no x-antiderivative")
        slots.sort(key=lambda s: (s[0].name, s[1]))
        key = (tuple(slots), tuple(scalar), w)
        groups.setdefault(key, {})[mono] = c

    result = ZERO
    for (slots, scalar, w), target in groups.items():
        result = result + _integrate_group(slots, scalar, w, DiffPoly(target))
    if d_x(result) != p:
        raise NotExact(f"{to_text(p)} is not an exact x-derivative")
    return result


def _integrate_group(slots, scalar, w, target: DiffPoly) -> DiffPoly:
    cands = set()
    for comp in _compositions(w - 1, len(slots)):
        factors: Dict[JetVar, int] = dict(scalar)
        for (f, dt), dx in zip(slots, comp):
            j = JetVar(f, dx, dt)
            factors[j] = factors.get(j, 0) + 1
        cands.add(_mono(factors))
    cands = sorted(cands, key=_mono_order)
    derivs = [d_x(DiffPoly({m: sp.Integer(1)})) for m in cands]
    rows = sorted({m for d in derivs for m, _ in d.items()} | {m for m, _ in target.items()}, key=_mono_order)
    A = sp.Matrix(len(rows), len(cands), lambda i, k: derivs[k].coefficient(rows[i]))
    b = sp.Matrix(len(rows), 1, lambda i, _: target.coefficient(rows[i]))
    try:
        sol, free = A.gauss_jordan_solve(b)
    except ValueError:
        raise NotExact(f"{to_text(target)} is not an exact x-derivative") from None
    if free.shape[0]:
        sol = sol.xreplace({t: 0 for t in free})
    acc = {m: sol[k] for k, m in enumerate(cands)}
    return DiffPoly(_clean(acc))


# ----------------------------------------------------------------- parity

def parity(p: DiffPoly) -> str:
    seen = set()
    for mono, _ in p.items():
        odd = sum((1 if j.parity == ODD else 0) * e for j, e in mono) % 2
        seen.add(ODD if odd else EVEN)
    if not seen:
        return EVEN
    return seen.pop() if len(seen) == 1 else MIXED


def eval(p: DiffPoly, sample: Mapping[JetVar, complex], params: Optional[Mapping] = None) -> complex:
    """Floating-point value of p at one jet sample."""
    return complex(p.evaluate(sample, params))


# ----------------------------------------------------------- normalization

def _rational_parts(c: sp.Expr) -> List[Fraction]:
    out = []
    for part in (sp.re(c), sp.im(c)):
        part = sp.Rational(part)
        if part != 0:
            out.append(Fraction(int(part.p), int(part.q)))
    return out


def content(p: DiffPoly) -> sp.Expr:
    """Positive rational gcd of all numeric coefficient parts (1 if symbolic)."""
    if p.is_zero or p.params():
        return sp.Integer(1)
    parts = [f for _, c in p.items() for f in _rational_parts(c)]
    num = reduce(gcd, (abs(f.numerator) for f in parts))
    den = reduce(lambda a, b: a * b // gcd(a, b), (f.denominator for f in parts))
    return sp.Rational(num, den)


def primitive(p: DiffPoly) -> DiffPoly:
    return p / content(p)


def monic(p: DiffPoly, lead: Optional[Monomial] = None) -> DiffPoly:
    """Scale so the leading (or given) monomial has coefficient 1."""
    if p.is_zero:
        return p
    c = p.coefficient(lead) if lead is not None else p.terms()[-1][1]
    if c == 0:
        raise ValueError("monomial not present")
    if c.free_symbols:
        return p
    return p / c


# -------------------------------------------------------------------- text

def _num_text(c: sp.Expr) -> str:
    if c.is_Integer:
        return str(c)
    if c.is_Rational:
        return f"({c.p}/{c.q})"
    return f"({sp.sstr(c)})"


def _coeff_text(c: sp.Expr) -> Tuple[str, bool]:
    """Text of a coefficient and whether it is exactly 1 (for eliding)."""
    if c == 1:
        return "", True
    if c == -1:
        return "-", True
    if c.is_Add:
        return f"({sp.sstr(c)})", False
    num, sym = c.as_independent(*c.free_symbols, as_Add=False) if c.free_symbols else (c, sp.Integer(1))
    neg = False
    if num.could_extract_minus_sign():
        neg, num = True, -num
    head = "" if num == 1 else _num_text(num)
    tail = "" if sym == 1 else sp.sstr(sym)
    body = "*".join(s for s in (head, tail) if s)
    return ("-" if neg else "") + body, False


def _factor_text(jet: JetVar, e: int) -> str:
    return str(jet) if e == 1 else f"{jet}**{e}"


def to_text(p: DiffPoly) -> str:
    if p.is_zero:
        return "0"
    parts = []
    for mono, c in p.terms():
        fac = "*".join(_factor_text(j, e) for j, e in mono)
        if not mono:
            ct = _coeff_text(c)[0]
            s = "1" if ct == "" else ("-1" if ct == "-" else ct)
        else:
            ct, _ = _coeff_text(c)
            if ct in ("", "-"):
                s = ct + fac
            else:
                s = ct + "*" + fac
        parts.append(s)
    out = parts[0]
    for s in parts[1:]:
        out += " - " + s[1:] if s.startswith("-") else " + " + s
    return out


_TOKEN = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)(\[([xt]+)\])?")
_IDENT = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)\b")
_SYMPY_NAMES = {"I", "sqrt", "Rational"}


def parse_text(text: str, ctx: Context = STANDARD) -> DiffPoly:
    """Inverse of to_text; accepts any sympy-readable expression over jets and parameters."""
    jets: Dict[str, JetVar] = {}

    def repl(m: "re.Match") -> str:
        name, ds = m.group(1), m.group(3)
        if name in ctx:
            jet = JetVar(ctx[name], ds.count("x") if ds else 0, ds.count("t") if ds else 0)
            ph = f"__j{len(jets)}"
            for k, j in jets.items():
                if j == jet:
                    return k
            jets[ph] = jet
            return ph
        if ds:
            raise ValueError(f"unknown field {name!r} in {text!r}")
        return name

    body = _TOKEN.sub(repl, text)
    local: Dict[str, sp.Basic] = {k: sp.Symbol(k) for k in jets}
    for name in set(_IDENT.findall(body)) - set(jets) - _SYMPY_NAMES:
        local[name] = param(name)
    expr = sp.expand(sp.sympify(body, locals=local))
    gens = [local[k] for k in jets]
    if not gens:
        return DiffPoly.const(expr)
    raw = []
    for monom, coeff in sp.Poly(expr, *gens).terms():
        raw.append((coeff, {jets[k]: e for k, e in zip(jets, monom) if e}))
    return normalize(raw)


# -------------------------------------------------------------------- json

def to_json(p: DiffPoly) -> List[dict]:
    out = []
    for mono, c in p.terms():
        pieces: Dict[tuple, sp.Expr] = {}
        for t in sp.Add.make_args(c):
            num, sym = t.as_independent(*t.free_symbols, as_Add=False) if t.free_symbols else (t, sp.Integer(1))
            powers = tuple(sorted((str(s), e) for s, e in sym.as_powers_dict().items() if sym != 1))
            pieces[powers] = pieces.get(powers, 0) + num
        for powers, num in sorted(pieces.items()):
            out.append({
                "coeff": sp.sstr(sp.expand(num)),
                "params": {k: (int(e) if sp.sympify(e).is_Integer else str(e)) for k, e in powers},
                "jets": [[j.field.name, j.dx, j.dt, e] for j, e in mono],
            })
    return out


def from_json(entries: Sequence[Mapping], ctx: Context = STANDARD) -> DiffPoly:
    raw = []
    for ent in entries:
        c = sp.sympify(ent["coeff"])
        for name, e in ent.get("params", {}).items():
            c = c * param(name) ** sp.Rational(e)
        factors = {JetVar(ctx[n], dx, dt): e for n, dx, dt, e in ent.get("jets", [])}
        raw.append((c, factors))
    return normalize(raw)
