"""Golden-file, random-evaluation and numerical checks behind `lxf verify`."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from tqdm import tqdm

from laxforge import config
from laxforge import diffpoly as dp
from laxforge import hierarchy as hy
from laxforge import nhd as nh
from laxforge import numerics as nm
from laxforge import quasi as qs
from laxforge.diffpoly import DiffPoly, JetVar
from laxforge.loopalg import commutator, element_dt, element_dx
from laxforge.series import ChargeSeries

logger = logging.getLogger("laxforge.verify")

PASS, FAIL = "PASS", "FAIL"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == PASS


@dataclass
class VerifyReport:
    seed: int
    results: List[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def rows(self) -> List[List[str]]:
        return [[self.seed, r.name, r.status, r.detail] for r in self.results]

    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.ok]


class GoldenMismatch(AssertionError):
    pass


# ------------------------------------------------------------------ golden

def load_golden(name: str) -> dict:
    path = os.path.join(config.golden_dir(), name)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _expect(label: str, got: DiffPoly, text: str, ctx: dp.Context = dp.STANDARD) -> None:
    want = dp.parse_text(text, ctx)
    if got != want:
        raise GoldenMismatch(f"{label}: got {got}, expected {want}")


def proportional(a: DiffPoly, b: DiffPoly) -> bool:
    """a == c b for some non-zero constant c."""
    if a.is_zero or b.is_zero:
        return a.is_zero and b.is_zero
    mono, cb = b.terms()[0]
    ca = a.coefficient(mono)
    if ca == 0:
        return False
    return b.scale(sp.expand(ca / cb)) == a


def _expect_up_to_scale(label: str, got: DiffPoly, text: str, ctx: dp.Context) -> None:
    want = dp.parse_text(text, ctx)
    if not proportional(got, want):
        raise GoldenMismatch(f"{label}: {got} is not a multiple of {want}")


def check_nls_golden() -> str:
    gold = load_golden("nls_coeffs.json")
    table = hy.nls_coeffs(gold["n"])
    for ent in gold["entries"]:
        m = ent["m"]
        for part in ("a", "b", "c"):
            _expect(f"{part}_{m}", getattr(table, part)(m), ent[part])
    for n, sides in gold["eom"].items():
        eom = hy.nls_eom(int(n), table)
        _expect(f"q_t n={n}", eom.q_t, sides["q_t"])
        _expect(f"r_t n={n}", eom.r_t, sides["r_t"])
    return f"{3 * len(gold['entries'])} coefficients, {len(gold['eom'])} systems"


def check_dnls_golden() -> str:
    gold = load_golden("dnls.json")
    table = hy.dnls_coeffs(gold["n"])
    for ent in gold["entries"]:
        m = ent["m"]
        for part in ("a", "b", "c"):
            _expect(f"{part}_{m}", getattr(table, part)(m), ent[part])
    eom = hy.dnls_eom(gold["n"], table)
    _expect("q_t", eom.q_t, gold["eom"]["q_t"])
    _expect("r_t", eom.r_t, gold["eom"]["r_t"])
    for beta, sides in gold["reductions"].items():
        red = hy.dnls_reduce(eom, beta)
        if red.label != sides["label"]:
            raise GoldenMismatch(f"beta={beta}: label {red.label} != {sides['label']}")
        _expect(f"{red.label} q_t", red.q_t, sides["q_t"])
        _expect(f"{red.label} r_t", red.r_t, sides["r_t"])
    return f"DNLS n=1 and {len(gold['reductions'])} reductions"


def check_qid_golden() -> str:
    gold = load_golden("qid.json")
    n = gold["n"]
    table = hy.nls_coeffs(n)
    _, generic = qs.qid_deform(table, qs.QidSpec.generic(n))
    for order, text in gold["anomalies"].items():
        _expect(f"X_{order}", generic.density(int(order)), text)
    und = qs.QidSpec.undeformed(n, table)
    for m, (bt, gt) in enumerate(zip(gold["undeformed"]["beta"], gold["undeformed"]["gamma"])):
        if sp.expand(und.betas[m] - sp.sympify(bt, locals={"alpha": dp.ALPHA})) != 0:
            raise GoldenMismatch(f"beta_{m + 1}: {und.betas[m]}")
        if sp.expand(und.gammas[m] - sp.sympify(gt, locals={"alpha": dp.ALPHA})) != 0:
            raise GoldenMismatch(f"gamma_{m + 1}: {und.gammas[m]}")
    _, matched = qs.qid_deform(table, qs.QidSpec.generic(n).matched())
    verdicts = {"generic": qs.classify(generic), "matched": qs.classify(matched)}
    for kind, wanted in gold["verdicts"].items():
        for order, verdict in wanted.items():
            got = verdicts[kind][int(order)][0]
            if got != verdict:
                raise GoldenMismatch(f"{kind} X_{order}: {got} != {verdict}")
    for order in (2, 4):
        if not verdicts["matched"][order][1]:
            raise GoldenMismatch(f"matched X_{order} is not a total derivative")
    _, undeformed = qs.qid_deform(table, und)
    if not undeformed.is_zero:
        raise GoldenMismatch("undeformed couplings leave an anomaly")
    return f"X_1..X_{n} and verdicts"


def check_abelianization_golden() -> str:
    gold = load_golden("abelianization.json")
    for family, key in ((hy.NLS, "nls"), (qs.KN, "kn")):
        want = gold[key]
        table = qs.abelianize(family, len(want["xi"]))
        for j, (x1, x2) in enumerate(want["xi"], start=1):
            got1, got2 = table.xi(j)
            _expect(f"{key} xi1^-{j}", got1, x1)
            _expect(f"{key} xi2^-{j}", got2, x2)
        for grade, text in want["charges"].items():
            _expect(f"{key} charge {grade}", table.charge(int(grade)), text)
        for j, text in enumerate(want["alphas"]):
            _expect(f"{key} alpha^-{j}", table.alpha(j), text)
    return "NLS and KN to depth 4"


def check_nhd_golden() -> str:
    gold = load_golden("nhd.json")
    res = nh.nls_nhd(2, 1)
    ctx = res.context
    _expect("NLS NHD q_t", res.deformed_eoms.q_t, gold["nls"]["q_t"], ctx)
    _expect("NLS NHD r_t", res.deformed_eoms.r_t, gold["nls"]["r_t"], ctx)
    _match_constraints("NLS", res, gold["nls"]["constraints"])
    red = nh.reduce_constraints(res)
    _expect_up_to_scale("NLS reduced", red[0].relation, gold["nls"]["reduced"], ctx)
    order = nh.eliminate_deformers(res, red).order
    if order != gold["nls"]["order"]:
        raise GoldenMismatch(f"NLS eliminated order {order}")

    deep = nh.nls_nhd(2, 2)
    red2 = {rc.grade: rc.relation for rc in nh.reduce_constraints(deep)}
    for grade, text in gold["nls_depth2"]["reduced"].items():
        _expect_up_to_scale(f"depth-2 reduced {grade}", red2[int(grade)], text, deep.context)
    order2 = nh.eliminate_deformers(deep).order
    if order2 != gold["nls_depth2"]["order"]:
        raise GoldenMismatch(f"depth-2 eliminated order {order2}")

    kn = nh.kn_nhd()
    for key in ("vanishing", "time_only"):
        if list(getattr(kn, key)) != gold["kn"][key]:
            raise GoldenMismatch(f"KN {key}: {getattr(kn, key)}")
    _expect("KN q_t", kn.deformed_eoms.q_t, gold["kn"]["q_t"], kn.context)
    _expect("KN r_t", kn.deformed_eoms.r_t, gold["kn"]["r_t"], kn.context)
    _match_constraints("KN", kn, gold["kn"]["constraints"])
    pot = nh.kn_resolve(kn)
    _expect("KN u_xt", pot.q_t, gold["kn"]["resolved"]["u_xt"], kn.context)
    _expect("KN v_xt", pot.r_t, gold["kn"]["resolved"]["v_xt"], kn.context)

    cll = nh.cll_nhd()
    for key in ("vanishing", "time_only"):
        if list(getattr(cll, key)) != gold["cll"][key]:
            raise GoldenMismatch(f"CLL {key}: {getattr(cll, key)}")
    _match_constraints("CLL", cll, gold["cll"]["constraints"])
    try:
        nh.kn_resolve(cll)
    except nh.NotResolvable:
        pass
    else:
        raise GoldenMismatch("CLL constraints resolved in potentials")
    return "NLS depth 1-2, KN, CLL"


def _match_constraints(label: str, res: nh.NhdResult, texts: Sequence[str]) -> None:
    got = [c.relation for c in res.constraints]
    for text in texts:
        want = dp.parse_text(text, res.context)
        if not any(proportional(g, want) for g in got):
            raise GoldenMismatch(f"{label}: no constraint matches {text}")
    if len(got) != len(texts):
        raise GoldenMismatch(f"{label}: {len(got)} constraints, expected {len(texts)}")


# -------------------------------------------------------------- symbolic

def check_zero_curvature() -> str:
    done = []
    for n in range(1, 7):
        _, L, M, eom = hy.nls_system(n)
        if not hy.on_shell_curvature(L, M, eom).is_zero:
            raise GoldenMismatch(f"NLS n={n} curvature does not vanish")
        done.append(f"NLS{n}")
    for n in (1, 2):
        for gauge in (hy.TRACELESS, hy.LOWER):
            _, L, M, eom = hy.dnls_system(n, gauge=gauge)
            if not hy.on_shell_curvature(L, M, eom).is_zero:
                raise GoldenMismatch(f"DNLS n={n} ({gauge}) curvature does not vanish")
        done.append(f"DNLS{n}")
    return ", ".join(done)


def check_recurrences() -> str:
    bad = hy.check_nls_recurrences(hy.nls_coeffs(6))
    bad += hy.check_dnls_recurrences(hy.dnls_coeffs(2))
    if bad:
        raise GoldenMismatch("violated: " + ", ".join(bad))
    return "NLS to n=6, DNLS to n=2"


def check_dnls_odd_grades() -> str:
    rep = qs.dnls_qid(1)
    if not rep.odd_sigma3_zero:
        raise GoldenMismatch("odd-grade s3 components survive")
    return f"{len(rep.anomalies)} even-grade anomaly entries"


def check_kn_qid() -> str:
    rep = qs.kn_qid()
    if not rep.anomaly.density.is_zero:
        raise GoldenMismatch(f"default KN Hamiltonian leaves {rep.anomaly.density}")
    if any(p for _, _, p in rep.consistency):
        raise GoldenMismatch("KN QID curvature leaves other grades")
    deformed = qs.kn_qid(qs.kn_default_hamiltonian() + (dp.q() ** 3 * dp.r() ** 3).scale(sp.Rational(1, 3)))
    if deformed.anomaly.parity != dp.ODD or not deformed.anomaly.total_derivative:
        raise GoldenMismatch(f"q^3 r^3 deformation gives {deformed.anomaly.density}")
    return "undeformed zero, sextic deformation parity-odd"


def check_nhd_closure() -> str:
    for label, res in (("NLS", nh.nls_nhd(2, 1)), ("NLS depth 2", nh.nls_nhd(2, 2)),
                       ("KdV-type", nh.nls_nhd(3, 1)), ("KN", nh.kn_nhd()), ("CLL", nh.cll_nhd())):
        if not nh.check_closure(res):
            raise GoldenMismatch(f"{label} deformation does not close")
    return "NLS, NLS depth 2, KdV-type, KN, CLL"


# ------------------------------------------------------------ random eval

def _random_sample(rng: np.random.Generator, jets, params) -> Tuple[Dict[JetVar, complex], Dict[str, complex]]:
    sample = {j: complex(rng.normal(), rng.normal()) for j in jets}
    values = {str(p): complex(rng.normal(), rng.normal()) for p in params}
    return sample, values


def random_eval_curvature(L, M, eom: hy.EomPair, rng: np.random.Generator, samples: int) -> float:
    """Largest relative residual of L_t - M_x + [L, M] evaluated part by part."""
    rules = eom.rules()
    parts = [rules.apply_element(element_dt(L)), element_dx(M).scale(-1), commutator(L, M)]
    grades = sorted({g for p in parts for g in p.grades()})
    worst = 0.0
    for g in grades:
        for attr in ("h", "e", "f", "one"):
            polys = [getattr(p.slot(g), attr) for p in parts]
            jets = set().union(*(p.jets() for p in polys))
            params = set().union(*(p.params() for p in polys))
            for _ in range(samples):
                sample, values = _random_sample(rng, sorted(jets, key=lambda j: j.key), sorted(params, key=str))
                vals = [complex(p.evaluate(sample, values)) if p else 0j for p in polys]
                scale = 1.0 + max(abs(v) for v in vals)
                worst = max(worst, abs(sum(vals)) / scale)
    return worst


def check_random_eval(seed: int, samples: Optional[int] = None) -> str:
    samples = samples if samples is not None else config.EVAL_SAMPLES
    rng = np.random.default_rng(seed)
    systems = [(f"NLS{n}", hy.nls_system(n)) for n in range(1, 7)]
    systems += [(f"DNLS{n}", hy.dnls_system(n)) for n in (1, 2)]
    worst = 0.0
    for label, (_, L, M, eom) in tqdm(systems, desc="random eval", leave=False):
        res = random_eval_curvature(L, M, eom, rng, samples)
        if res > config.EVAL_TOL:
            raise GoldenMismatch(f"{label}: residual {res:.3e}")
        worst = max(worst, res)
    return f"{samples} samples per component, worst {worst:.2e}"


# --------------------------------------------------------------- numerics

def _nls_numeric(n: int = 2) -> hy.EomPair:
    """Focusing NLS with alpha = -i."""
    return hy.nls_eom(n, hy.nls_coeffs(n, alpha=-dp.I))


def soliton_run(N: int = 512, length: float = 40.0, amplitude: float = 1.0, periods: int = 10,
                dt: float = 0.005) -> float:
    """Relative shape error after `periods` phase periods of a travelling soliton."""
    grid = nm.Grid(N, length)
    v = 2 * math.pi / length
    t_end = periods * 4 * math.pi / amplitude ** 2
    cfg = nm.SimConfig(dt=dt, t_end=t_end, snapshot_every=max(1, int(round(t_end / dt))))
    traj = nm.evolve(_nls_numeric(), nm.bright_soliton(grid, amplitude, v), grid, cfg)
    exact = nm.bright_soliton(grid, amplitude, v, t=float(traj.times[-1]))
    return nm.relative_shape_error(traj.final.q, exact.q)


def check_soliton() -> str:
    err = soliton_run()
    if err >= 1e-6:
        raise GoldenMismatch(f"soliton shape error {err:.3e}")
    return f"relative error {err:.2e}"


def self_convergence_ratio(dt: float = 0.05, t_end: float = 2.0, N: int = 256, length: float = 40.0) -> float:
    grid = nm.Grid(N, length)
    init = nm.bright_soliton(grid, 1.0, 0.5)
    finals = []
    for step in (dt, dt / 2, dt / 4):
        cfg = nm.SimConfig(dt=step, t_end=t_end, snapshot_every=int(round(t_end / step)))
        finals.append(nm.evolve(_nls_numeric(), init, grid, cfg).final.q)
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    return float(e1 / e2)


def check_convergence() -> str:
    ratio = self_convergence_ratio()
    if not 12 <= ratio <= 20:
        raise GoldenMismatch(f"error ratio {ratio:.2f} under step halving")
    return f"ratio {ratio:.2f}"


def check_mass() -> str:
    grid = nm.Grid(256, 40.0)
    cfg = nm.SimConfig(dt=0.01, t_end=5.0, snapshot_every=50)
    traj = nm.evolve(_nls_numeric(), nm.bright_soliton(grid, 1.0, 0.5), grid, cfg)
    series = nm.measure(traj, {"mass": (dp.q() * dp.r()).scale(dp.I)})
    drift = series.drift("mass")
    if drift >= 1e-6:
        raise GoldenMismatch(f"mass drift {drift:.3e}")
    return f"drift {drift:.2e}"


@dataclass(frozen=True)
class BalanceRun:
    label: str
    series: ChargeSeries

    def worst(self) -> Tuple[str, float, float]:
        """(charge, max residual, max |Gamma|) for the charge with the largest residual."""
        name = max(self.series.names, key=self.series.max_residual)
        return name, self.series.max_residual(name), self.series.max_anomaly(name)


BALANCE_ORDERS = (1, 2, 3)


def balance_run(label: str, eom: hy.EomPair, X: DiffPoly, cfg: nm.SimConfig, *, N: int = 256,
                length: float = 30.0, amplitude: float = 1.0,
                aux: Optional[Dict[str, nm.AuxProfile]] = None) -> BalanceRun:
    """Evolve a Gaussian pulse and measure the hierarchy charges against Gamma_j = int 2 X alpha_j."""
    grid = nm.Grid(N, length)
    table = qs.lax_abelianization(hy.NLS, max(BALANCE_ORDERS) + 1)
    dens, anomalies = {}, {}
    for j, Q, G in qs.balance_densities(X, table, BALANCE_ORDERS):
        dens[f"Q{j}"], anomalies[f"Q{j}"] = Q, G
    traj = nm.evolve(eom, nm.gaussian_pulse(grid, amplitude, 1.0), grid, cfg, aux)
    return BalanceRun(label, nm.measure(traj, dens, eom, anomalies=anomalies, aux=aux))


def balance_runs(epsilon: float = 0.06, dt: float = 0.01, t_end: float = 1.0) -> Tuple[BalanceRun, ...]:
    """Undeformed baseline, the |qr|^epsilon potential and the scaled-coupling QID flow."""
    # the anomaly identity holds for the unmasked flow
    cfg = nm.SimConfig(dt=dt, t_end=t_end, dealias=False)
    eom = _nls_numeric()
    a2 = hy.nls_coeffs(2, alpha=-dp.I).a(2)
    weighted = {nm.ANOMALY.name: nm.potential_anomaly(a2, epsilon)}
    flow = qs.qid_flow(2, 1 + epsilon)
    return (
        balance_run("undeformed", eom, dp.ZERO, cfg),
        balance_run(f"eps={epsilon}", eom, nm.ANOMALY(), nm.with_epsilon(cfg, epsilon), aux=weighted),
        balance_run(flow.eom.label, flow.eom, flow.anomaly, cfg),
    )


def check_balance(epsilon: float = 0.06) -> str:
    parts = []
    for run in balance_runs(epsilon):
        s = run.series
        spacing = float(s.times[1] - s.times[0])
        for name in s.names:
            scale = float(np.max(np.abs(s.charges[name])))
            tol = nm.balance_tolerance(spacing, scale)
            res = s.max_residual(name)
            if res > tol:
                raise GoldenMismatch(f"{run.label} {name}: |dQ/dt - Gamma| = {res:.3e} > {tol:.1e}")
            if s.flow_mismatch(name) > tol:
                raise GoldenMismatch(f"{run.label} {name}: flow derivative and Gamma differ by "
                                     f"{s.flow_mismatch(name):.3e}")
        if run.label != "undeformed":
            top = f"Q{max(BALANCE_ORDERS)}"
            if s.max_residual(top) > 0.01 * s.max_anomaly(top):
                raise GoldenMismatch(f"{run.label} {top}: anomaly {s.max_anomaly(top):.2e} not resolved "
                                     f"above residual {s.max_residual(top):.2e}")
        name, res, gam = run.worst()
        parts.append(f"{run.label} {name} res {res:.1e} |G| {gam:.1e}")
    return "; ".join(parts)


def check_parity_diagnostic() -> str:
    grid = nm.Grid(256, 40.0)
    state = nm.gaussian_pulse(grid, 1.0, 2.0)
    X2 = qs.qid_deform(hy.nls_coeffs(2, alpha=-dp.I), qs.QidSpec.generic(2))[1].density(2)
    ev = nm.compile_density(X2, grid, params={"beta2": 0.3, "gamma2": -0.7})
    value = abs(ev.integral(state))
    if value >= 1e-8:
        raise GoldenMismatch(f"odd anomaly integrates to {value:.3e} on even data")
    return f"|Gamma| = {value:.1e}"


def check_collision(epsilon: float = 1e-3) -> str:
    grid = nm.Grid(512, 80.0)
    dt = 0.01
    cfg = nm.SimConfig(dt=dt, t_end=30.0, epsilon=epsilon, snapshot_every=10)
    init = nm.two_soliton(grid, (1.0, 1.0, -15.0), (1.0, -1.0, 15.0))
    traj = nm.evolve(_nls_numeric(), init, grid, cfg)
    series = nm.measure(traj, {"energy": qs.nls_hamiltonians(3)[2]})
    Q = series.charges["energy"]
    w = max(1, len(Q) // 5)
    before, after = np.mean(Q[:w]), np.mean(Q[-w:])
    rel = abs(after - before) / abs(before)
    if rel >= 1e-3:
        raise GoldenMismatch(f"energy changed by {rel:.3e} through the collision")
    return f"relative change {rel:.2e}"


# -------------------------------------------------------------- running

SYMBOLIC: Tuple[Tuple[str, Callable[[], str]], ...] = (
    ("golden: NLS coefficients", check_nls_golden),
    ("golden: DNLS and reductions", check_dnls_golden),
    ("golden: QID anomalies", check_qid_golden),
    ("golden: abelianization", check_abelianization_golden),
    ("golden: NHD", check_nhd_golden),
    ("recurrences", check_recurrences),
    ("zero curvature", check_zero_curvature),
    ("DNLS odd grades", check_dnls_odd_grades),
    ("KN QID", check_kn_qid),
    ("NHD closure", check_nhd_closure),
)

NUMERIC: Tuple[Tuple[str, Callable[[], str]], ...] = (
    ("numerics: soliton", check_soliton),
    ("numerics: convergence", check_convergence),
    ("numerics: mass", check_mass),
    ("numerics: balance", check_balance),
    ("numerics: parity", check_parity_diagnostic),
    ("numerics: collision", check_collision),
)


def _run_one(name: str, fn: Callable[[], str]) -> CheckResult:
    try:
        detail = fn()
        logger.info("%s: %s", name, detail)
        return CheckResult(name, PASS, detail)
    except (GoldenMismatch, FileNotFoundError, KeyError, ValueError, RuntimeError) as e:
        logger.error("%s failed: %s", name, e)
        return CheckResult(name, FAIL, str(e))


def run(seed: Optional[int] = None, skip_numerics: bool = False, only: Optional[Sequence[str]] = None,
        samples: Optional[int] = None) -> VerifyReport:
    seed = config.DEFAULT_SEED if seed is None else seed
    checks = list(SYMBOLIC)
    checks.append(("random eval", lambda: check_random_eval(seed, samples)))
    if not skip_numerics:
        checks += list(NUMERIC)
    if only:
        checks = [(n, f) for n, f in checks if any(o in n for o in only)]
    report = VerifyReport(seed)
    for name, fn in checks:
        report.results.append(_run_one(name, fn))
    return report
