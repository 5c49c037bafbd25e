#!/usr/bin/env python
"""lxf: NLS/DNLS Lax hierarchies, quasi-integrable and non-holonomic deformations."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

import sympy as sp
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from tabulate import tabulate

from laxforge import config
from laxforge import diffpoly as dp
from laxforge import hierarchy as hy
from laxforge import nhd as nh
from laxforge import numerics as nm
from laxforge import quasi as qs
from laxforge import render
from laxforge import verify as vf
from laxforge.series import write_snapshot

load_dotenv()

logging.basicConfig(
    level=getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO),
    format="%(levelname)s %(asctime)s %(name)s: %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger("laxforge.cli")

console = Console()

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# flags whose values may start with '-' (e.g. --beta -1/2)
_SIGNED = ("--beta", "--alpha", "--eps")


class VerificationFailed(RuntimeError):
    pass


class UsageError(ValueError):
    pass


def _join_signed(argv: Sequence[str]) -> List[str]:
    out, it = [], iter(argv)
    for a in it:
        if a in _SIGNED:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def _fraction(s: str):
    try:
        return sp.nsimplify(sp.sympify(s), rational=True)
    except (sp.SympifyError, TypeError) as e:
        raise argparse.ArgumentTypeError(f"not a number: {s}") from e


def _emit(text: str) -> None:
    console.print(text, markup=False, highlight=False, soft_wrap=True)


# -------------------------------------------------------------- commands

def cmd_hierarchy(args) -> int:
    if args.family == hy.NLS:
        table = hy.nls_coeffs(args.n, args.alpha)
        eom = hy.nls_eom(args.n, table)
    else:
        table = hy.dnls_coeffs(args.n, args.beta)
        eom = hy.dnls_eom(args.n, table)
        if args.beta is not None:
            eom = hy.dnls_reduce(eom, args.beta) if args.n == 1 else eom
    if args.coeffs:
        _emit(render.coeff_table(table, args.format))
    if args.conjugate:
        _emit(render.conjugate_display(eom, args.format))
    else:
        _emit(render.eom(eom, args.format))
    return EXIT_OK


def cmd_qid(args) -> int:
    if args.family == hy.NLS:
        n = max(args.n, args.order)
        table = hy.nls_coeffs(n)
        spec = qs.QidSpec.generic(n)
        if args.matched:
            spec = spec.matched()
        _, report = qs.qid_deform(table, spec)
        abel = qs.abelianize(hy.NLS, args.depth)
        _emit(render.anomaly_report(report, args.format, abel, orders=[args.order]))
    elif args.family == qs.KN:
        rep = qs.kn_qid()
        abel = qs.abelianize(qs.KN, args.depth)
        _emit(render.eom(rep.eom, args.format))
        _emit(render.anomaly_report(qs.AnomalyReport(qs.KN, 1, (rep.anomaly,)), args.format, abel))
    else:
        rep = qs.dnls_qid(args.n)
        _emit(render.eom(rep.eom, args.format))
        _emit(render.anomaly_report(qs.AnomalyReport(hy.DNLS, args.n, rep.anomalies), args.format))
        _emit(f"odd-grade s3 components vanish: {'yes' if rep.odd_sigma3_zero else 'no'}")
    return EXIT_OK


_DNLS_GRADES = (0, -1, -2)


def cmd_nhd(args) -> int:
    if args.system in ("nls", "kdv"):
        try:
            depth = nh.deformation_depth(args.grades if args.grades is not None else [-1])
        except ValueError as e:
            raise UsageError(str(e)) from e
        res = nh.nls_nhd(2 if args.system == "nls" else 3, depth)
    else:
        if args.grades is not None and sorted(args.grades, reverse=True) != list(_DNLS_GRADES):
            raise UsageError(f"the {args.system} deformation always spans grades 0 -1 -2")
        res = nh.kn_nhd() if args.system == "kn" else nh.cll_nhd()
    extra = {}
    if args.system in ("nls", "kdv"):
        red = nh.reduce_constraints(res)
        for rc in red:
            extra[f"eliminating {rc.eliminated} (grade {rc.grade})"] = rc.relation
        elim = nh.eliminate_deformers(res, red)
        extra[f"closed equation of order {elim.order}"] = elim.equation
    _emit(render.nhd(res, args.format, extra))
    if args.resolve:
        _emit(render.eom(nh.kn_resolve(res), args.format))
    return EXIT_OK


_SYSTEMS = {"nls": None, "kn": sp.Rational(-1, 2), "cll": sp.Rational(-1, 4), "gi": sp.Integer(0)}


def _system(name: str) -> hy.EomPair:
    if name == "nls":
        return hy.nls_eom(2, hy.nls_coeffs(2, alpha=-dp.I))
    return hy.dnls_reduce(hy.dnls_eom(1), _SYSTEMS[name])


def _balance(system: str, epsilon: float):
    """(densities, anomaly densities or None, aux profiles) for the charges of `system`."""
    if system == "nls":
        table = qs.lax_abelianization(hy.NLS, 4)
        X, aux = dp.ZERO, None
        if epsilon:
            a2 = hy.nls_coeffs(2, alpha=-dp.I).a(2)
            X, aux = nm.ANOMALY(), {nm.ANOMALY.name: nm.potential_anomaly(a2, epsilon)}
        rows = qs.balance_densities(X, table, (1, 2, 3))
    else:
        table = qs.lax_abelianization(hy.DNLS, 5, beta=_SYSTEMS[system])
        rows, aux = qs.balance_densities(dp.ZERO, table, (0, 1, 2, 3)), None
    dens = {f"Q{j}": Q for j, Q, _ in rows if Q}
    anomalies = {f"Q{j}": G for j, Q, G in rows if Q}
    if system != "nls" and epsilon:
        logger.warning("no anomaly density for the weighted %s flow; recording charges only", system)
        anomalies = None
    return dens, anomalies, aux


def cmd_simulate(args) -> int:
    grid = nm.Grid(args.N, args.L)
    if args.gaussian:
        init = nm.gaussian_pulse(grid, args.amplitude, 1.0)
    elif args.two_soliton:
        init = nm.two_soliton(grid, (args.amplitude, args.velocity, -args.L / 6),
                              (args.amplitude, -args.velocity, args.L / 6))
    else:
        init = nm.bright_soliton(grid, args.amplitude, args.velocity)
    cfg = nm.SimConfig(dt=args.dt, t_end=args.tend, integrator=args.integrator, epsilon=float(args.eps),
                       snapshot_every=args.every, dealias=not args.no_dealias, progress=True)
    eom = _system(args.system)
    dens, anomalies, aux = _balance(args.system, cfg.epsilon)
    traj = nm.evolve(eom, init, grid, cfg)
    series = nm.measure(traj, dens, anomalies=anomalies, aux=aux)
    if args.out:
        series.write_csv(args.out)
    if args.snapshot:
        fin = traj.final
        write_snapshot(args.snapshot, grid.N, grid.length, fin.t, fin.q, fin.r)
    _emit(series.summary())
    return EXIT_OK


def cmd_verify(args) -> int:
    report = vf.run(seed=args.seed, skip_numerics=args.skip_numerics, only=args.only, samples=args.samples)
    _emit(tabulate(report.rows(), headers=["seed", "check", "status", "detail"]))
    if not report.ok:
        raise VerificationFailed(f"{len(report.failures())} of {len(report.results)} checks failed")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lxf", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)
    fmt = dict(choices=render.FORMATS, default=render.TEXT)

    h = sub.add_parser("hierarchy", help="coefficients and equations of motion")
    h.add_argument("--family", choices=(hy.NLS, hy.DNLS), default=hy.NLS)
    h.add_argument("--n", type=int, default=2)
    h.add_argument("--alpha", type=_fraction, default=None)
    h.add_argument("--beta", type=_fraction, default=None)
    h.add_argument("--coeffs", action="store_true", help="print the coefficient table too")
    h.add_argument("--conjugate", action="store_true", help="single equation under r = q*")
    h.add_argument("--format", **fmt)
    h.set_defaults(func=cmd_hierarchy)

    q = sub.add_parser("qid", help="quasi-integrable deformations and anomalies")
    q.add_argument("--family", choices=(hy.NLS, qs.KN, hy.DNLS), default=hy.NLS)
    q.add_argument("--order", type=int, default=2)
    q.add_argument("--n", type=int, default=1)
    q.add_argument("--depth", type=int, default=4)
    q.add_argument("--matched", action="store_true", help="set gamma_m = beta_m")
    q.add_argument("--format", **fmt)
    q.set_defaults(func=cmd_qid)

    d = sub.add_parser("nhd", help="non-holonomic deformations")
    d.add_argument("--system", choices=("nls", "kdv", "kn", "cll"), default="nls")
    d.add_argument("--grades", type=int, nargs="+", default=None, help="deformation grades -1 .. -d (default -1)")
    d.add_argument("--resolve", action="store_true", help="integrate the constraints in potentials")
    d.add_argument("--format", **fmt)
    d.set_defaults(func=cmd_nhd)

    s = sub.add_parser("simulate", help="pseudospectral run with charge monitoring")
    s.add_argument("--system", choices=tuple(_SYSTEMS), default="nls")
    init = s.add_mutually_exclusive_group()
    init.add_argument("--soliton", action="store_true", default=True)
    init.add_argument("--two-soliton", action="store_true")
    init.add_argument("--gaussian", action="store_true")
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--velocity", type=float, default=0.0)
    s.add_argument("--eps", type=float, default=0.0)
    s.add_argument("--N", type=int, default=256)
    s.add_argument("--L", type=float, default=40.0)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--tend", type=float, default=10.0)
    s.add_argument("--every", type=int, default=10, help="steps between snapshots")
    s.add_argument("--integrator", choices=(nm.RK4, nm.SPLIT), default=nm.RK4)
    s.add_argument("--no-dealias", action="store_true")
    s.add_argument("--out", default="")
    s.add_argument("--snapshot", default="")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="golden, random-eval and numerical checks")
    v.add_argument("--all", action="store_true", help="every check (the default)")
    v.add_argument("--skip-numerics", action="store_true")
    v.add_argument("--only", nargs="+", default=None, help="substrings of check names")
    v.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    v.add_argument("--samples", type=int, default=None)
    v.set_defaults(func=cmd_verify)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_signed(argv))
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except VerificationFailed as e:
        console.print(Panel(str(e), title="verify", border_style="red"))
        return EXIT_FAIL
    except UsageError as e:
        console.print(Panel(str(e), title=f"{args.verb}: usage", border_style="red"))
        return EXIT_USAGE
    except (ValueError, RuntimeError, KeyError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        console.print(Panel(f"{type(e).__name__}: {e}", title=args.verb, border_style="red"))
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
