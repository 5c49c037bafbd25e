"""Text, LaTeX and JSON renderings of polynomials, systems and reports."""
from __future__ import annotations

import json
from typing import Callable, Dict, List, Optional, Sequence

import sympy as sp
from tabulate import tabulate

from laxforge import diffpoly as dp
from laxforge.diffpoly import DiffPoly, JetVar
from laxforge.hierarchy import CoeffTable, EomPair

TEXT, LATEX, JSON = "text", "latex", "json"
FORMATS = (TEXT, LATEX, JSON)


def _check(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")


# ------------------------------------------------------------------- polys

def _latex_name(jet: JetVar, conj: bool = False) -> str:
    base = {"phi": r"\varphi"}.get(jet.field.name, jet.field.name)
    if conj and jet.field.name == "r":
        base = "q^{*}"
    sub = "x" * jet.dx + "t" * jet.dt
    if not sub:
        return base
    return f"{{{base}}}_{{{sub}}}"


def _sympy_expr(p: DiffPoly, namer: Callable[[JetVar], str]) -> sp.Expr:
    expr = sp.Integer(0)
    for mono, c in p.terms():
        term = c
        for jet, e in mono:
            term = term * sp.Symbol(namer(jet)) ** e
        expr = expr + term
    return expr


def poly_latex(p: DiffPoly, conj: bool = False) -> str:
    if p.is_zero:
        return "0"
    return sp.latex(_sympy_expr(p, lambda j: _latex_name(j, conj)))


def poly_text(p: DiffPoly, conj: bool = False) -> str:
    text = dp.to_text(p)
    if not conj:
        return text
    # r and its jets print as conjugated q
    return dp._TOKEN.sub(lambda m: ("q*" + (m.group(2) or "")) if m.group(1) == "r" else m.group(0), text)


def poly(p: DiffPoly, fmt: str = TEXT) -> str:
    _check(fmt)
    if fmt == LATEX:
        return poly_latex(p)
    if fmt == JSON:
        return json.dumps(dp.to_json(p), sort_keys=True)
    return poly_text(p)


# ---------------------------------------------------------------- systems

def _lhs_text(jet: JetVar) -> str:
    return str(jet)


def eom_dict(eom: EomPair) -> Dict[str, object]:
    return {
        "label": eom.label,
        "lhs": [str(j) for j in eom.lhs],
        "rhs": [dp.to_text(eom.q_t), dp.to_text(eom.r_t)],
        "terms": [dp.to_json(eom.q_t), dp.to_json(eom.r_t)],
        "notes": list(eom.notes),
    }


def eom(eom: EomPair, fmt: str = TEXT) -> str:
    _check(fmt)
    if fmt == JSON:
        return json.dumps(eom_dict(eom), sort_keys=True, indent=2)
    if fmt == LATEX:
        lines = [f"{_latex_name(j)} &= {poly_latex(p)}" for j, p in zip(eom.lhs, (eom.q_t, eom.r_t))]
        return "\\begin{aligned}\n" + " \\\\\n".join(lines) + "\n\\end{aligned}"
    out = [f"{_lhs_text(j)} = {dp.to_text(p)}" for j, p in zip(eom.lhs, (eom.q_t, eom.r_t))]
    out += [f"  note: {n}" for n in eom.notes]
    return "\n".join(out)


def conjugate_display(system: EomPair, fmt: str = TEXT) -> str:
    """Single-equation display under r = q*: r-jets print as conjugated q-jets."""
    _check(fmt)
    lhs = system.lhs[0]
    if fmt == LATEX:
        return f"{_latex_name(lhs)} = {poly_latex(system.q_t, conj=True)}"
    if fmt == JSON:
        return json.dumps({"label": system.label, "lhs": str(lhs),
                           "rhs": poly_text(system.q_t, conj=True)}, sort_keys=True)
    return f"{lhs} = {poly_text(system.q_t, conj=True)}"


def coeff_rows(table: CoeffTable) -> List[List[str]]:
    return [[m, dp.to_text(c.a), dp.to_text(c.b), dp.to_text(c.c)] for m, c in enumerate(table.entries)]


def coeff_table(table: CoeffTable, fmt: str = TEXT) -> str:
    _check(fmt)
    if fmt == JSON:
        return json.dumps({"family": table.family, "n": table.n,
                           "params": {k: str(v) for k, v in table.params},
                           "entries": [{"m": m, "a": a, "b": b, "c": c} for m, a, b, c in coeff_rows(table)]},
                          sort_keys=True, indent=2)
    if fmt == LATEX:
        rows = [f"a_{{{m}}} &= {poly_latex(c.a)}, & b_{{{m}}} &= {poly_latex(c.b)}, & c_{{{m}}} &= {poly_latex(c.c)}"
                for m, c in enumerate(table.entries)]
        return "\\begin{aligned}\n" + " \\\\\n".join(rows) + "\n\\end{aligned}"
    return tabulate(coeff_rows(table), headers=["m", "a_m", "b_m", "c_m"])


# ---------------------------------------------------------------- reports

def anomaly_dict(entry, abel=None) -> Dict[str, object]:
    """JSON shape {order, anomaly_density, parity, total_derivative, charges, alphas}."""
    from laxforge import quasi
    out: Dict[str, object] = {
        "order": entry.order,
        "grade": entry.grade,
        "anomaly_density": dp.to_text(entry.density),
        "parity": entry.parity,
        "total_derivative": entry.total_derivative,
        "verdict": quasi.classify_density(entry.density),
    }
    if abel is not None:
        out["charges"] = [{"grade": g, "density": dp.to_text(c)} for g, c in quasi.charges(table=abel)]
        out["alphas"] = [{"j": j, "alpha": dp.to_text(quasi.to_qr(a))} for j, a in abel.alphas]
        out["anomaly_integrands"] = [{"j": j, "density": dp.to_text(x)}
                                     for j, x in quasi.anomaly_alpha_products(entry.density, abel)]
    return out


def anomaly_report(report, fmt: str = TEXT, abel=None, orders: Optional[Sequence[int]] = None) -> str:
    _check(fmt)
    entries = [e for e in report.entries if orders is None or e.order in orders]
    if fmt == JSON:
        return json.dumps([anomaly_dict(e, abel) for e in entries], sort_keys=True, indent=2)
    if fmt == LATEX:
        return "\n".join(f"\\mathcal{{X}}_{{{e.order}}} = {poly_latex(e.density)}" for e in entries)
    from laxforge import quasi
    rows = [[e.order, dp.to_text(e.density), e.parity, "yes" if e.total_derivative else "no",
             quasi.classify_density(e.density)] for e in entries]
    out = tabulate(rows, headers=["order", "anomaly", "parity", "d/dx", "verdict"])
    if abel is not None:
        out += "\n\n" + abelianization(abel, TEXT)
    return out


def abelianization(table, fmt: str = TEXT) -> str:
    from laxforge import quasi
    _check(fmt)
    xis = [(j, *table.xi(j)) for j in range(1, table.depth + 1)]
    if fmt == JSON:
        return json.dumps({
            "family": table.family,
            "xi": [{"j": -j, "xi1": dp.to_text(a), "xi2": dp.to_text(b)} for j, a, b in xis],
            "charges": [{"grade": g, "density": dp.to_text(c)} for g, c in quasi.charges(table=table)],
            "alphas": [{"j": -j, "alpha": dp.to_text(quasi.to_qr(a))} for j, a in table.alphas],
        }, sort_keys=True, indent=2)
    if fmt == LATEX:
        lines = [f"\\xi^{{(-{j})}} &= ({poly_latex(a)},\\ {poly_latex(b)})" for j, a, b in xis]
        lines += [f"\\mathcal{{L}}^{{({g})}} &= {poly_latex(c)}" for g, c in quasi.charges(table=table)]
        lines += [f"\\alpha_0^{{(-{j})}} &= {poly_latex(quasi.to_qr(a))}" for j, a in table.alphas]
        return "\\begin{aligned}\n" + " \\\\\n".join(lines) + "\n\\end{aligned}"
    parts = [
        tabulate([[-j, dp.to_text(a), dp.to_text(b)] for j, a, b in xis], headers=["grade", "xi_1", "xi_2"]),
        tabulate([[g, dp.to_text(c)] for g, c in quasi.charges(table=table)], headers=["grade", "charge density"]),
        tabulate([[-j, dp.to_text(quasi.to_qr(a))] for j, a in table.alphas], headers=["j", "alpha_0"]),
    ]
    return "\n\n".join(parts)


def nhd_dict(result) -> Dict[str, object]:
    return {
        "label": result.label,
        "eom": eom_dict(result.deformed_eoms),
        "constraints": [{"grade": c.grade, "basis": c.basis, "relation": dp.to_text(c.relation)}
                        for c in result.constraints],
        "vanishing": list(result.vanishing),
        "time_only": list(result.time_only),
        "notes": list(result.notes),
    }


def nhd(result, fmt: str = TEXT, extra: Optional[Dict[str, DiffPoly]] = None) -> str:
    _check(fmt)
    extra = extra or {}
    if fmt == JSON:
        d = nhd_dict(result)
        d["derived"] = {k: dp.to_text(v) for k, v in extra.items()}
        return json.dumps(d, sort_keys=True, indent=2)
    if fmt == LATEX:
        lines = [eom(result.deformed_eoms, LATEX)]
        lines += [f"{poly_latex(c.relation)} = 0" for c in result.constraints]
        lines += [f"{k}: {poly_latex(v)} = 0" for k, v in extra.items()]
        return "\n".join(lines)
    out = [result.label, eom(result.deformed_eoms, TEXT), "constraints:"]
    out += [f"  [{c.grade:+d} {c.basis}] {dp.to_text(c.relation)} = 0" for c in result.constraints]
    if result.vanishing:
        out.append("vanishing: " + ", ".join(result.vanishing))
    if result.time_only:
        out.append("t-dependent only: " + ", ".join(result.time_only))
    out += [f"{k}: {dp.to_text(v)} = 0" for k, v in extra.items()]
    out += [f"note: {n}" for n in result.notes]
    return "\n".join(out)
