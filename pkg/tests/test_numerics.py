import math

import numpy as np
import pytest

from laxforge import hierarchy as hy
from laxforge import nhd as nh
from laxforge import numerics as nm
from laxforge import quasi as qs
from laxforge.diffpoly import I, parse_text, q, r


def test_grid_validation():
    with pytest.raises(ValueError):
        nm.Grid(100, 10.0)
    with pytest.raises(ValueError):
        nm.Grid(32, 10.0)
    with pytest.raises(ValueError):
        nm.Grid(64, 0.0)


def test_spectral_derivative_is_exact_for_modes(small_grid):
    g = small_grid
    k0 = 2 * math.pi * 3 / g.length
    f = np.sin(k0 * g.x)
    assert np.allclose(g.derivative(f, 1), k0 * np.cos(k0 * g.x), atol=1e-10)
    assert np.allclose(g.derivative(f, 2), -k0 ** 2 * f, atol=1e-9)


def test_gaussian_mass(small_grid):
    state = nm.gaussian_pulse(small_grid, amplitude=2.0, width=1.0)
    ev = nm.compile_density(q() * r(), small_grid)
    assert ev.integral(state) == pytest.approx(-4.0 * math.sqrt(math.pi / 2), abs=1e-10)


def test_soliton_mass(small_grid):
    state = nm.bright_soliton(small_grid, amplitude=1.5)
    mass = nm.compile_density(parse_text("I*q*r"), small_grid).integral(state)
    assert mass == pytest.approx(-3j, abs=1e-10)


def test_phase_gradient_of_plane_wave(small_grid):
    g = small_grid
    k0 = 2 * math.pi * 4 / g.length
    psi = 0.7 * np.exp(1j * k0 * g.x)
    state = nm.FieldState(psi, -np.conj(psi))
    vals = nm.compile_density(parse_text("phi[x]"), g)(state)
    assert np.allclose(vals, -k0, atol=1e-9)


def test_unsupported_densities(small_grid):
    with pytest.raises(nm.UnsupportedDensity):
        nm.compile_density(q(0, 1) * r(), small_grid)
    with pytest.raises(nm.UnsupportedDensity):
        nm.compile_density(parse_text("phi*q"), small_grid)
    with pytest.raises(nm.UnsupportedDensity):
        nm.compile_density(parse_text("beta*q*r"), small_grid)
    assert nm.compile_density(parse_text("beta*q*r"), small_grid, params={"beta": 2.0}).integral(
        nm.zero_state(small_grid)) == 0


def test_sim_config_validation():
    with pytest.raises(ValueError):
        nm.SimConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        nm.SimConfig(dt=0.1, t_end=1.0, integrator="euler")
    assert nm.SimConfig(dt=0.01, t_end=1.0).steps == 100


def test_short_soliton_run_is_accurate(nls_focusing):
    grid = nm.Grid(256, 40.0)
    cfg = nm.SimConfig(dt=0.01, t_end=1.0, snapshot_every=50)
    traj = nm.evolve(nls_focusing, nm.bright_soliton(grid, velocity=0.5), grid, cfg)
    assert list(traj.times) == pytest.approx([0.0, 0.5, 1.0])
    exact = nm.bright_soliton(grid, velocity=0.5, t=1.0)
    assert nm.relative_shape_error(traj.final.q, exact.q) < 1e-5


def test_split_step_agrees_with_rk4(nls_focusing):
    grid = nm.Grid(128, 40.0)
    init = nm.bright_soliton(grid)
    a = nm.evolve(nls_focusing, init, grid, nm.SimConfig(dt=0.01, t_end=0.5, snapshot_every=50))
    b = nm.evolve(nls_focusing, init, grid, nm.SimConfig(dt=0.01, t_end=0.5, snapshot_every=50,
                                                          integrator=nm.SPLIT))
    assert nm.relative_shape_error(b.final.q, a.final.q) < 1e-3


def test_zero_state_stays_zero(nls_focusing, small_grid):
    traj = nm.evolve(nls_focusing, nm.zero_state(small_grid), small_grid, nm.SimConfig(dt=0.01, t_end=0.1))
    assert np.all(traj.final.q == 0)


def test_zero_epsilon_is_the_undeformed_run(nls_focusing, small_grid):
    init = nm.bright_soliton(small_grid)
    cfg = nm.SimConfig(dt=0.01, t_end=0.2)
    a = nm.evolve(nls_focusing, init, small_grid, cfg)
    b = nm.evolve(nls_focusing, init, small_grid, nm.with_epsilon(cfg, 0.0))
    assert np.array_equal(a.q, b.q)
    c = nm.evolve(nls_focusing, init, small_grid, nm.with_epsilon(cfg, 0.1))
    assert not np.array_equal(a.final.q, c.final.q)


def test_mass_balance_on_short_run(nls_focusing):
    grid = nm.Grid(256, 40.0)
    cfg = nm.SimConfig(dt=0.01, t_end=0.5, snapshot_every=5)
    traj = nm.evolve(nls_focusing, nm.bright_soliton(grid, velocity=1.0), grid, cfg)
    series = nm.measure(traj, {"mass": q() * r()}, nls_focusing, anomalies={})
    assert series.drift("mass") < 1e-7
    assert np.all(series.anomalies["mass"] == 0)
    assert series.max_residual("mass") < nm.balance_tolerance(0.05, 2.0)
    assert np.max(np.abs(series.flows["mass"])) < 1e-8


def test_measure_without_anomalies_records_charges_only(nls_focusing, small_grid):
    traj = nm.evolve(nls_focusing, nm.bright_soliton(small_grid), small_grid, nm.SimConfig(dt=0.01, t_end=0.05))
    series = nm.measure(traj, {"mass": q() * r()})
    assert series.names == ["mass"]
    assert series.anomalies == {} and series.residuals == {} and series.flows == {}


def test_non_conserved_functional_does_not_balance_against_zero(nls_focusing):
    grid = nm.Grid(256, 40.0)
    cfg = nm.SimConfig(dt=0.01, t_end=0.5, epsilon=0.06)
    traj = nm.evolve(nls_focusing, nm.bright_soliton(grid), grid, cfg)
    dens = {"odd": parse_text("q[x]*r[x]*q*r + 7*q**3*r")}
    series = nm.measure(traj, dens, nls_focusing, anomalies={})
    assert series.max_residual("odd") > 1e-2
    # cross-check against the flow derivative
    dQ = np.gradient(series.charges["odd"], series.times, edge_order=2)
    flow = series.flows["odd"]
    assert np.max(np.abs(dQ - flow)) < 1e-3 * np.max(np.abs(flow))


def test_potential_anomaly_is_a_total_derivative(small_grid):
    a2 = hy.nls_coeffs(2, alpha=-I).a(2)
    state = nm.gaussian_pulse(small_grid, 1.0, 1.5)
    X = nm.potential_anomaly(a2, 0.06)(small_grid, state)
    assert np.max(np.abs(X)) > 1e-3
    assert abs(small_grid.integrate(X)) < 1e-12
    assert np.all(nm.potential_anomaly(a2, 0.0)(small_grid, state) == 0)


def test_anomaly_density_feeds_gamma():
    a2 = hy.nls_coeffs(2, alpha=-I).a(2)
    aux = {nm.ANOMALY.name: nm.potential_anomaly(a2, 0.06)}
    table = qs.lax_abelianization(hy.NLS, 4)
    (_, Q, G), = qs.balance_densities(nm.ANOMALY(), table, (3,))
    cfg = nm.SimConfig(dt=0.01, t_end=0.3, epsilon=0.06, dealias=False)
    eom = hy.nls_eom(2, hy.nls_coeffs(2, alpha=-I))
    grid = nm.Grid(256, 30.0)
    traj = nm.evolve(eom, nm.gaussian_pulse(grid, 1.0, 1.0), grid, cfg, aux)
    series = nm.measure(traj, {"Q3": Q}, eom, anomalies={"Q3": G}, aux=aux)
    gamma = series.anomalies["Q3"]
    assert np.max(np.abs(gamma)) > 1e-5
    assert series.flow_mismatch("Q3") < 1e-3 * np.max(np.abs(gamma))


def test_blow_up_is_reported(small_grid):
    eom = hy.EomPair(q() * q() * q(), r().scale(0), "cubic ode")
    init = nm.FieldState(np.full(small_grid.N, 10.0 + 0j), np.zeros(small_grid.N, dtype=complex))
    with pytest.raises(nm.BlowUp) as err:
        nm.evolve(eom, init, small_grid, nm.SimConfig(dt=0.1, t_end=50.0, dealias=False))
    assert err.value.last_good_time >= 0.0


def test_explicit_dispersion_respects_cfl(small_grid):
    eom = hy.EomPair(r(2), q(2), "cross dispersion")
    with pytest.raises(ValueError):
        nm.compile_rhs(eom, small_grid, nm.SimConfig(dt=0.1, t_end=1.0))


def test_nhd_with_zero_profiles_matches_undeformed(nls_focusing, small_grid):
    res = nh.nls_nhd(2, 1)
    zero = {"g1": lambda grid, s: np.zeros(grid.N), "g2": lambda grid, s: np.zeros(grid.N)}
    init = nm.bright_soliton(small_grid)
    cfg = nm.SimConfig(dt=0.01, t_end=0.2)
    a = nm.evolve(nls_focusing, init, small_grid, cfg)
    b = nm.evolve(res.deformed_eoms, init, small_grid, cfg, aux=zero)
    assert np.allclose(a.final.q, b.final.q, atol=1e-12)
