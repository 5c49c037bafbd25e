"""Pseudospectral evolution of NLS-family equations on a periodic grid and the
numerical balance dQ/dt = Gamma for charge densities."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from tqdm import tqdm

from laxforge import config
from laxforge.diffpoly import DiffPoly, FieldSymbol, JetVar, R, phi, q, r
from laxforge.hierarchy import EomPair
from laxforge.series import ChargeSeries

logger = logging.getLogger("laxforge.numerics")

RK4, SPLIT = "rk4", "split-step"

AuxProfile = Callable[["Grid", "FieldState"], np.ndarray]


class UnsupportedDensity(ValueError):
    """A density cannot be evaluated pointwise on the grid."""


class BlowUp(RuntimeError):
    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good time {last_good_time:.6g})")
        self.last_good_time = last_good_time


@dataclass(frozen=True)
class Grid:
    N: int
    length: float

    def __post_init__(self):
        if self.N < config.MIN_GRID or self.N & (self.N - 1):
            raise ValueError(f"grid size must be a power of two >= {config.MIN_GRID}, got {self.N}")
        if not self.length > 0:
            raise ValueError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.length / 2 + self.dx * np.arange(self.N)

    @cached_property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kmax = np.abs(self.k).max()
        return (np.abs(self.k) <= (2.0 / 3.0) * kmax).astype(float)

    def derivative(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        if order == 0:
            return f
        return np.fft.ifft((1j * self.k) ** order * np.fft.fft(f))

    def integrate(self, f) -> complex:
        f = np.broadcast_to(f, (self.N,))
        return complex(np.sum(f) * self.dx)


@dataclass
class FieldState:
    q: np.ndarray
    r: np.ndarray
    t: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(self.q.copy(), self.r.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.r)))


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    integrator: str = RK4
    dealias: bool = config.DEALIAS
    snapshot_every: int = 1
    epsilon: float = 0.0
    params: Tuple[Tuple[str, complex], ...] = ()
    kappa: float = config.KAPPA
    progress: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.integrator not in (RK4, SPLIT):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    grid: Grid
    config: SimConfig
    times: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> FieldState:
        return FieldState(self.q[i], self.r[i], float(self.times[i]))

    @property
    def final(self) -> FieldState:
        return self.state(len(self) - 1)


# ------------------------------------------------------------- initial data

def _reduce(grid: Grid, psi: np.ndarray, focusing: bool) -> FieldState:
    psi = np.asarray(psi, dtype=complex)
    return FieldState(psi, -np.conj(psi) if focusing else np.conj(psi))


def bright_soliton(grid: Grid, amplitude: float = 1.0, velocity: float = 0.0, x0: float = 0.0,
                   t: float = 0.0) -> FieldState:
    """Focusing one-soliton A sech(A(x - x0 - vt)) exp(i(vx - (v^2 - A^2)t/2)), r = -q*."""
    A, v = amplitude, velocity
    # centre wrapped into the periodic domain
    centre = (x0 + v * t + grid.length / 2) % grid.length - grid.length / 2
    psi = A / np.cosh(A * (grid.x - centre)) * np.exp(1j * (v * grid.x - 0.5 * (v * v - A * A) * t))
    state = _reduce(grid, psi, True)
    state.t = t
    return state


def two_soliton(grid: Grid, first: Tuple[float, float, float], second: Tuple[float, float, float]) -> FieldState:
    """Superposition of well-separated solitons given as (amplitude, velocity, x0)."""
    a = bright_soliton(grid, *first)
    b = bright_soliton(grid, *second)
    return _reduce(grid, a.q + b.q, True)


def gaussian_pulse(grid: Grid, amplitude: float = 1.0, width: float = 1.0, x0: float = 0.0,
                   focusing: bool = True) -> FieldState:
    return _reduce(grid, amplitude * np.exp(-((grid.x - x0) / width) ** 2), focusing)


def zero_state(grid: Grid) -> FieldState:
    z = np.zeros(grid.N, dtype=complex)
    return FieldState(z, z.copy())


# ---------------------------------------------------------------- densities

_Term = Tuple[complex, Tuple[Tuple[JetVar, int], ...]]


def _numeric_terms(p: DiffPoly, params: Mapping[str, complex], kappa: float) -> List[_Term]:
    out = []
    for mono, c in p.items():
        expr = c
        for s in c.free_symbols:
            if s.name == "kappa":
                expr = expr.subs(s, kappa)
            elif s.name in params:
                expr = expr.subs(s, sp.sympify(params[s.name]))
            else:
                raise UnsupportedDensity(f"parameter {s.name} has no numeric value")
        out.append((complex(expr), mono))
    return out


def _eval_terms(terms: Sequence[_Term], sample: Mapping[JetVar, np.ndarray], n: int) -> np.ndarray:
    total = np.zeros(n, dtype=complex)
    for c, mono in terms:
        val = c
        for jet, e in mono:
            x = sample[jet]
            val = val * (x if e == 1 else x ** e)
        total = total + val
    return total


@dataclass
class DensityEvaluator:
    """Pointwise evaluation of a compiled density; integral() applies the grid quadrature."""
    density: DiffPoly
    grid: Grid
    terms: List[_Term]
    jets: Tuple[JetVar, ...]
    kappa: float = config.KAPPA
    aux: Mapping[str, AuxProfile] = field(default_factory=dict)

    def sample(self, state: FieldState) -> Dict[JetVar, np.ndarray]:
        return jet_sample(self.grid, state, self.jets, self.kappa, self.aux)

    def __call__(self, state: FieldState) -> np.ndarray:
        return _eval_terms(self.terms, self.sample(state), self.grid.N)

    def integral(self, state: FieldState) -> complex:
        return self.grid.integrate(self(state))


def _phase_gradient(grid: Grid, state: FieldState) -> np.ndarray:
    """phi_x from exp(2i phi) = -kappa r/q, zero where |q| or |r| is below the guard."""
    guard = config.PHASE_GUARD
    qx, rx = grid.derivative(state.q), grid.derivative(state.r)
    ok = (np.abs(state.q) > guard) & (np.abs(state.r) > guard)
    out = np.zeros(grid.N, dtype=complex)
    out[ok] = (rx[ok] / state.r[ok] - qx[ok] / state.q[ok]) / 2j
    return out


def jet_sample(grid: Grid, state: FieldState, jets: Sequence[JetVar], kappa: float,
               aux: Optional[Mapping[str, AuxProfile]] = None) -> Dict[JetVar, np.ndarray]:
    base: Dict[str, np.ndarray] = {}
    out: Dict[JetVar, np.ndarray] = {}
    for jet in jets:
        name = jet.field.name
        if name not in base:
            if name == "q":
                base[name] = state.q
            elif name == "r":
                base[name] = state.r
            elif name == "R":
                base[name] = np.sqrt(state.q * state.r / kappa)
            elif name == "phi":
                base[name] = _phase_gradient(grid, state)
            elif aux and name in aux:
                base[name] = np.broadcast_to(aux[name](grid, state), (grid.N,)).astype(complex)
            else:
                raise UnsupportedDensity(f"no grid values for field {name}")
        order = jet.dx - 1 if name == "phi" else jet.dx
        out[jet] = grid.derivative(base[name], order)
    return out


def compile_density(p: DiffPoly, grid: Grid, *, kappa: float = config.KAPPA,
                    params: Optional[Mapping[str, complex]] = None,
                    aux: Optional[Mapping[str, AuxProfile]] = None) -> DensityEvaluator:
    """Grid evaluator for a density in x-jets of q, r, R and phi_x (R^2 = qr/kappa)."""
    if p.has_t_jets():
        raise UnsupportedDensity("densities with t-derivatives cannot be evaluated on a snapshot")
    allowed = {q.name, r.name, R.name, phi.name} | set(aux or {})
    for jet in p.jets():
        if jet.field.name not in allowed:
            raise UnsupportedDensity(f"unknown field {jet.field.name}")
        if jet.field.name == phi.name and jet.dx == 0:
            raise UnsupportedDensity("phi enters only through its x-derivatives")
    terms = _numeric_terms(p, params or {}, kappa)
    return DensityEvaluator(p, grid, terms, tuple(sorted(p.jets(), key=lambda j: j.key)), kappa, dict(aux or {}))


# ---------------------------------------------------------------- evolution

@dataclass
class _Rhs:
    grid: Grid
    linear: np.ndarray  # (2, N) Fourier multipliers
    nonlinear: Tuple[List[_Term], List[_Term]]
    jets: Tuple[JetVar, ...]
    epsilon: float
    kappa: float
    dealias: bool
    aux: Mapping[str, AuxProfile]

    def physical(self, state: FieldState) -> Tuple[np.ndarray, np.ndarray]:
        sample = jet_sample(self.grid, state, self.jets, self.kappa, self.aux)
        nq = _eval_terms(self.nonlinear[0], sample, self.grid.N)
        nr = _eval_terms(self.nonlinear[1], sample, self.grid.N)
        if self.epsilon != 0.0:
            weight = np.abs(state.q * state.r) ** self.epsilon
            nq, nr = nq * weight, nr * weight
        return nq, nr

    def spectral(self, v: np.ndarray, t: float) -> np.ndarray:
        """Fourier transform of the explicit part at the spectral state v."""
        state = FieldState(np.fft.ifft(v[0]), np.fft.ifft(v[1]), t)
        nq, nr = self.physical(state)
        out = np.stack([np.fft.fft(nq), np.fft.fft(nr)])
        if self.dealias:
            out *= self.grid.dealias_mask
        return out

    def full(self, state: FieldState) -> Tuple[np.ndarray, np.ndarray]:
        """Complete right-hand side in physical space."""
        nq, nr = self.physical(state)
        lq = np.fft.ifft(self.linear[0] * np.fft.fft(state.q))
        lr = np.fft.ifft(self.linear[1] * np.fft.fft(state.r))
        return lq + nq, lr + nr


def _split_linear(rhs: DiffPoly, own: FieldSymbol, grid: Grid, params, kappa) -> Tuple[np.ndarray, List[_Term]]:
    lam = np.zeros(grid.N, dtype=complex)
    rest = []
    for c, mono in _numeric_terms(rhs, params, kappa):
        if len(mono) == 1 and mono[0][1] == 1 and mono[0][0].field == own and not mono[0][0].dt:
            lam = lam + c * (1j * grid.k) ** mono[0][0].dx
        else:
            rest.append((c, mono))
    return lam, rest


def compile_rhs(eom: EomPair, grid: Grid, cfg: SimConfig,
                aux: Optional[Mapping[str, AuxProfile]] = None) -> _Rhs:
    if eom.lhs[0].field != q or eom.lhs[1].field != r or eom.lhs[0].dx or eom.lhs[1].dx:
        raise UnsupportedDensity("only q_t, r_t systems can be evolved")
    params = dict(cfg.params)
    lq, nq = _split_linear(eom.q_t, q, grid, params, cfg.kappa)
    lr, nr = _split_linear(eom.r_t, r, grid, params, cfg.kappa)
    jets = {j for _, mono in nq + nr for j, _ in mono}
    allowed = {q.name, r.name} | set(aux or {})
    bad = [str(j) for j in jets if j.field.name not in allowed]
    if bad:
        raise UnsupportedDensity("no grid values for " + ", ".join(sorted(bad)))
    explicit = max((j.dx for j in jets), default=0)
    if explicit >= 2:
        bound = config.CFL_CONSTANT * grid.dx ** 2
        if cfg.dt > bound:
            raise ValueError(f"dt={cfg.dt} exceeds the explicit dispersive bound {bound:.3g}")
    return _Rhs(grid, np.stack([lq, lr]), (nq, nr), tuple(sorted(jets, key=lambda j: j.key)),
                cfg.epsilon, cfg.kappa, cfg.dealias, dict(aux or {}))


def _lawson_rk4(rhs: _Rhs, v: np.ndarray, t: float, dt: float, E: np.ndarray, E2: np.ndarray) -> np.ndarray:
    a = dt * rhs.spectral(v, t)
    b = dt * rhs.spectral(E * (v + a / 2), t + dt / 2)
    c = dt * rhs.spectral(E * v + b / 2, t + dt / 2)
    d = dt * rhs.spectral(E2 * v + E * c, t + dt)
    return E2 * v + (E2 * a + 2 * E * (b + c) + d) / 6


def _strang(rhs: _Rhs, v: np.ndarray, t: float, dt: float, E: np.ndarray) -> np.ndarray:
    # half linear, RK4 on the explicit part, half linear
    v = E * v
    k1 = rhs.spectral(v, t)
    k2 = rhs.spectral(v + dt / 2 * k1, t + dt / 2)
    k3 = rhs.spectral(v + dt / 2 * k2, t + dt / 2)
    k4 = rhs.spectral(v + dt * k3, t + dt)
    v = v + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return E * v


def evolve(eom: EomPair, init: FieldState, grid: Grid, cfg: SimConfig,
           aux: Optional[Mapping[str, AuxProfile]] = None) -> Trajectory:
    """Integrating-factor RK4 (or Strang split-step) with snapshots every cfg.snapshot_every steps."""
    rhs = compile_rhs(eom, grid, cfg, aux)
    E = np.exp(cfg.dt * rhs.linear / 2)
    E2 = E * E
    v = np.stack([np.fft.fft(init.q), np.fft.fft(init.r)])
    t = init.t
    times, qs, rs = [t], [init.q.copy()], [init.r.copy()]
    steps = cfg.steps
    logger.info("%s: %d steps of dt=%g on N=%d, L=%g (%s)", eom.label or "system", steps, cfg.dt,
                grid.N, grid.length, cfg.integrator)
    it = tqdm(range(1, steps + 1), desc=eom.label or "evolve", leave=False, disable=not cfg.progress)
    for step in it:
        if cfg.integrator == RK4:
            nxt = _lawson_rk4(rhs, v, t, cfg.dt, E, E2)
        else:
            nxt = _strang(rhs, v, t, cfg.dt, E)
        if not np.all(np.isfinite(nxt)):
            raise BlowUp(f"non-finite field at step {step}", t)
        v, t = nxt, init.t + step * cfg.dt
        if step % cfg.snapshot_every == 0 or step == steps:
            times.append(t)
            qs.append(np.fft.ifft(v[0]))
            rs.append(np.fft.ifft(v[1]))
    return Trajectory(grid, cfg, np.asarray(times), np.asarray(qs), np.asarray(rs))


def with_epsilon(cfg: SimConfig, epsilon: float) -> SimConfig:
    return replace(cfg, epsilon=epsilon)


# ---------------------------------------------------------------- measuring

ANOMALY = FieldSymbol("X")


def balance_tolerance(spacing: float, scale: float) -> float:
    """Bound on |dQ/dt - Gamma| for centered differences over snapshots `spacing` apart."""
    return max(1e-6, 0.1 * spacing ** 2) * max(1.0, scale)


def potential_anomaly(a: DiffPoly, epsilon: float, *, kappa: float = config.KAPPA,
                      params: Optional[Mapping[str, complex]] = None) -> AuxProfile:
    """Grid values of X = -d_x[(|qr|^epsilon - 1) a] for the flow whose nonlinear terms
    2 q a, -2 r a carry the weight |qr|^epsilon; `a` is the grade-0 s3 entry of M."""
    compiled: Dict[Grid, DensityEvaluator] = {}

    def profile(grid: Grid, state: FieldState) -> np.ndarray:
        ev = compiled.get(grid)
        if ev is None:
            ev = compiled[grid] = compile_density(a, grid, kappa=kappa, params=params)
        weight = np.abs(state.q * state.r) ** epsilon
        return -grid.derivative((weight - 1.0) * ev(state))

    return profile


def flow_derivative(density: DensityEvaluator, rhs: _Rhs, state: FieldState, h: float = 1e-4) -> complex:
    """dQ/dt along the flow by a central difference in the direction of the vector field."""
    fq, fr = rhs.full(state)
    plus = FieldState(state.q + h * fq, state.r + h * fr, state.t)
    minus = FieldState(state.q - h * fq, state.r - h * fr, state.t)
    return (density.integral(plus) - density.integral(minus)) / (2 * h)


def measure(traj: Trajectory, densities: Mapping[str, DiffPoly], eom: Optional[EomPair] = None, *,
            anomalies: Optional[Mapping[str, DiffPoly]] = None,
            aux: Optional[Mapping[str, AuxProfile]] = None) -> ChargeSeries:
    """Q(t) for each density and, when `anomalies` is given, Gamma(t) from its anomaly
    density (zero for names it leaves out) with |dQ/dt - Gamma| by centered differences.
    With `eom` the flow derivative of every charge is recorded alongside as a cross-check."""
    grid, cfg = traj.grid, traj.config
    params = dict(cfg.params)
    rhs = compile_rhs(eom, grid, cfg, aux) if eom is not None else None
    charges, gammas, residuals, flows = {}, {}, {}, {}
    for name, dens in densities.items():
        ev = compile_density(dens, grid, kappa=cfg.kappa, params=params, aux=aux)
        Q = np.array([ev.integral(traj.state(i)) for i in range(len(traj))])
        charges[name] = Q
        if rhs is not None:
            flows[name] = np.array([flow_derivative(ev, rhs, traj.state(i)) for i in range(len(traj))])
        if anomalies is None:
            continue
        if name in anomalies:
            gev = compile_density(anomalies[name], grid, kappa=cfg.kappa, params=params, aux=aux)
            G = np.array([gev.integral(traj.state(i)) for i in range(len(traj))])
        else:
            G = np.zeros(len(traj), dtype=complex)
        gammas[name] = G
        if len(traj) >= 3:
            dQ = np.gradient(Q, traj.times, edge_order=2)
            residuals[name] = np.abs(dQ - G)
    return ChargeSeries(np.asarray(traj.times), charges, gammas, residuals, flows)


def relative_shape_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), math.ulp(1.0)))
