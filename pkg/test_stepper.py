#!/usr/bin/env python3
"""
Tests for the integrators: discrete gradient, tridiagonal solve, Newton,
linearized and RK4 steppers, run bookkeeping
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import solve_banded

from src.chain.model import ChainConfig, PotentialKind, SchemeKind, evanescent_decay
from src.chain.stepper import (
    acceleration,
    discrete_gradient,
    evanescent_initial_data,
    initial_state,
    linearized_matrices,
    run,
    step_linearized,
    step_newton,
)
from src.chain import stepper
from src.chain.stepper import ChainState, _newton_kernel
from src.chain.tridiag import is_diagonally_dominant, thomas_solve
from src.chain.errors import BlowUpError, DegenerateMatrixError, SimulationError, StepConvergenceError


SMALL = ChainConfig(n_sites=60, n_physical=40, t_final=10.0, ramp_time=5.0)
coordinates = st.floats(min_value=-10.0, max_value=10.0)


@given(coordinates, coordinates)
def test_discrete_gradient_is_symmetric(x, w):
    for potential in PotentialKind:
        assert discrete_gradient(x, w, potential) == discrete_gradient(w, x, potential)


@given(coordinates, coordinates)
def test_discrete_gradient_is_exact_difference_quotient(x, w):
    if abs(x - w) < 1e-3:
        return
    potential = PotentialKind.SINE_GORDON
    expected = (potential.energy(x) - potential.energy(w)) / (x - w)
    assert discrete_gradient(x, w, potential) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_discrete_gradient_falls_back_to_midpoint_derivative():
    x = 0.7
    value = discrete_gradient(x, x + 1e-9, PotentialKind.SINE_GORDON)
    assert value == pytest.approx(np.sin(x), rel=1e-8)
    assert discrete_gradient(x, x, PotentialKind.KLEIN_GORDON) == pytest.approx(
        PotentialKind.KLEIN_GORDON.force(x))


def test_discrete_gradient_of_harmonic_potential_is_average():
    x = np.array([0.1, -0.3, 2.0])
    w = np.array([0.4, -0.3, -1.0])
    assert discrete_gradient(x, w, PotentialKind.HARMONIC) == pytest.approx((x + w) / 2)


def test_thomas_solve_matches_banded_solver():
    rng = np.random.default_rng(11)
    n = 50
    lower, upper = rng.normal(size=(2, n))
    diag = 3.0 + np.abs(lower) + np.abs(upper) + rng.random(n)
    rhs = rng.normal(size=n)
    bands = np.zeros((3, n))
    bands[0, 1:] = upper[:-1]
    bands[1] = diag
    bands[2, :-1] = lower[1:]
    assert thomas_solve(lower, diag, upper, rhs) == pytest.approx(solve_banded((1, 1), bands, rhs))
    assert is_diagonally_dominant(lower, diag, upper)


def test_thomas_solve_reports_zero_pivot():
    with pytest.raises(DegenerateMatrixError) as excinfo:
        thomas_solve(np.ones(3), np.zeros(3), np.ones(3), np.ones(3), step=7, time=0.35)
    assert excinfo.value.row == 0
    assert excinfo.value.step == 7


def test_linearized_matrix_is_diagonally_dominant():
    cfg = ChainConfig(beta=0.2, gamma=0.03)
    m = linearized_matrices(cfg, np.full(cfg.n_sites, 0.03))
    assert is_diagonally_dominant(m['a'], m['b'], m['a'])
    assert m['d'][0] == pytest.approx(2 / 0.05 ** 2 - 2 * 16)


@pytest.mark.parametrize("scheme", list(SchemeKind))
def test_undriven_chain_stays_at_rest(scheme):
    result = run(SMALL.with_updates(scheme=scheme), probes=(1, 30, 60))
    assert np.all(result.trajectory == 0.0)
    assert result.E_total == 0.0
    assert result.E_injected == 0.0


@pytest.mark.parametrize("scheme", list(SchemeKind))
def test_run_layout(scheme):
    cfg = SMALL.with_updates(scheme=scheme, amplitude=0.5)
    result = run(cfg, probes=(5,))
    assert result.trajectory.shape == (cfg.n_steps + 1, 1)
    assert result.times[-1] == pytest.approx(cfg.t_final)
    assert len(result.energy) == cfg.n_steps + 1
    assert result.energy['E_total'].iloc[-1] == pytest.approx(result.E_total)
    assert list(result.trajectory_frame().columns) == ['t', 'u_5']


def test_runs_are_deterministic():
    cfg = SMALL.with_updates(amplitude=1.2)
    first, second = run(cfg, probes=(10,)), run(cfg, probes=(10,))
    assert np.array_equal(first.trajectory, second.trajectory)
    assert first.energy.equals(second.energy)


def test_newton_converges_within_budget():
    cfg = SMALL.with_updates(amplitude=2.0)
    result = run(cfg, record_energy=False)
    assert 1 <= result.max_newton_iterations <= 25
    assert result.steps_taken == cfg.n_steps


def test_newton_reports_non_convergence():
    cfg = SMALL.with_updates(amplitude=1.0, ramp_time=0.0)
    state = initial_state(cfg)
    with pytest.raises(StepConvergenceError) as excinfo:
        step_newton(state, cfg, tolerance=0.0, max_iterations=2)
    assert excinfo.value.iterations == 2
    assert excinfo.value.step == 2


def test_step_size_above_stability_bound_blows_up():
    cfg = ChainConfig(dt=0.3, t_final=50.0).with_updates(amplitude=1.0)
    with pytest.raises(SimulationError):
        run(cfg, record_energy=False)
    run(cfg.with_updates(dt=0.05), record_energy=False)


def test_blowup_error_carries_step():
    cfg = ChainConfig(dt=0.3, t_final=50.0).with_updates(amplitude=1.0)
    with pytest.raises(BlowUpError) as excinfo:
        run(cfg, record_energy=False)
    assert 0 < excinfo.value.step <= cfg.n_steps + 1
    assert excinfo.value.time == pytest.approx(excinfo.value.step * 0.3)


def test_small_amplitude_schemes_agree():
    cfg = SMALL.with_updates(amplitude=0.01)
    newton = run(cfg, probes=(1, 10), record_energy=False)
    linearized = run(cfg.with_updates(scheme=SchemeKind.LINEARIZED), probes=(1, 10), record_energy=False)
    rk4 = run(cfg.with_updates(scheme=SchemeKind.RK4), probes=(1, 10), record_energy=False)
    assert np.max(np.abs(newton.trajectory - linearized.trajectory)) < 1e-3
    assert np.max(np.abs(newton.trajectory - rk4.trajectory)) < 1e-3


def test_evanescent_initial_data():
    cfg = ChainConfig().with_updates(amplitude=0.1, frequency=0.9)
    started = evanescent_initial_data(cfg)
    decay = evanescent_decay(0.9, cfg)
    phi, varphi = started.initial_layers()
    assert started.ramp_time == 0.0
    assert np.all(phi == 0.0)
    assert varphi[0] == pytest.approx(0.1 * 0.9 * np.exp(-decay))
    assert varphi[9] == pytest.approx(0.1 * 0.9 * np.exp(-10 * decay))


def test_second_order_start_adds_acceleration():
    phi = 0.1 * np.exp(-0.2 * np.arange(60))
    cfg = SMALL.with_updates(initial_displacement=phi, second_order_start=True)
    state = initial_state(cfg)
    expected = phi + 0.5 * cfg.dt ** 2 * acceleration(0.0, phi, np.zeros(60), cfg, np.zeros(60))
    assert state.u_curr == pytest.approx(expected)
    assert state.step == 1
    assert state.time == pytest.approx(cfg.dt)


def test_rk4_state_carries_velocity():
    cfg = SMALL.with_updates(scheme=SchemeKind.RK4)
    state = initial_state(cfg)
    assert state.step == 1
    assert state.velocity is not None
    assert np.all(state.u_prev == 0.0)


@pytest.mark.parametrize("amplitude", [1.0, 1.79, 2.2])
def test_driven_default_chain_converges(amplitude):
    cfg = ChainConfig().with_updates(amplitude=amplitude, frequency=0.9)
    result = run(cfg, probes=(60,), record_energy=False)
    assert result.steps_taken == cfg.n_steps
    assert 1 <= result.max_newton_iterations <= 25
    assert np.all(np.isfinite(result.trajectory))


@pytest.mark.parametrize("scheme", list(SchemeKind))
def test_single_step_horizon_takes_one_step(scheme):
    cfg = SMALL.with_updates(scheme=scheme, t_final=SMALL.dt, amplitude=0.5)
    result = run(cfg, probes=(1,))
    assert cfg.n_steps == 1
    assert result.steps_taken == 1
    assert result.trajectory.shape == (2, 1)


def test_linearized_step_matches_two_site_system():
    cfg = ChainConfig(n_sites=2, n_physical=2, coupling=1.0, beta=0.1, gamma=0.2, kappa=0.0,
                      dt=0.1, t_final=1.0, ramp_time=0.0,
                      scheme=SchemeKind.LINEARIZED).with_updates(amplitude=0.3, frequency=0.9)
    dt, beta, alpha = 0.1, 0.1, 0.2
    u_prev = np.array([0.05, -0.02])
    u_curr = np.array([0.1, 0.03])
    b0, b1, b2 = cfg.boundary(0.0), cfg.boundary(dt), cfg.boundary(2 * dt)
    state = ChainState(u_prev, u_curr, step=1, dt=dt, boundary_prev=b0, boundary_curr=b1)

    def lap(u, left):
        return np.array([left - 2 * u[0] + u[1], u[0] - 2 * u[1]])

    # (x - 2u + u')/dt^2 - lap(u) - beta (lap(x) - lap(u'))/2dt + alpha (x - u')/2dt + sin(u) = 0
    L = np.array([[-2.0, 1.0], [1.0, -2.0]])
    M = np.eye(2) / dt ** 2 - beta * L / (2 * dt) + alpha * np.eye(2) / (2 * dt)
    r = ((2 * u_curr - u_prev) / dt ** 2 + lap(u_curr, b1)
         + beta * (np.array([b2, 0.0]) - lap(u_prev, b0)) / (2 * dt)
         + alpha * u_prev / (2 * dt) - np.sin(u_curr))

    advanced, _ = step_linearized(state, cfg)
    assert advanced.u_curr == pytest.approx(np.linalg.solve(M, r), rel=1e-12, abs=1e-15)
    assert advanced.step == 2
    assert advanced.u_prev is u_curr


def test_newton_corrections_shrink_quadratically():
    cfg = SMALL.with_updates(amplitude=2.0, ramp_time=0.0, dt=0.2)
    sites = np.arange(1, 61)
    u_prev = 1.5 * np.exp(-0.1 * sites)
    u_curr = u_prev + 0.3 * np.sin(0.5 * sites)
    state = ChainState(u_prev, u_curr, step=1, dt=cfg.dt,
                       boundary_prev=cfg.boundary(0.0), boundary_curr=cfg.boundary(cfg.dt))
    corrections = []
    for budget in (1, 2, 3):
        with pytest.raises(StepConvergenceError) as excinfo:
            step_newton(state, cfg, tolerance=0.0, max_iterations=budget)
        corrections.append(excinfo.value.residual)
    r1, r2, r3 = corrections
    assert r2 <= r1 ** 2
    assert r3 <= max(r2 ** 2, 1e-13)


def test_newton_zero_pivot_reports_row():
    # harmonic rows with 1/dt^2 + m^2/2 + 1/2 = 0 except where damping lifts the diagonal
    zeros = np.zeros(3)
    alpha = np.array([2.0, 0.0, 0.0])
    x = np.empty(3)
    iterations, _, status, row = _newton_kernel(zeros, zeros, alpha, 0.0, 0.0, 0.0,
                                                1.0, 0.0, -3.0, 1.0, 2, 1e-7, 1e-12, 25, 1e8, x)
    assert (iterations, status, row) == (1, 2, 1)


def test_step_newton_forwards_pivot_row(monkeypatch):
    monkeypatch.setattr(stepper, '_newton_kernel', lambda *args: (1, np.inf, 2, 7))
    state = initial_state(SMALL)
    with pytest.raises(DegenerateMatrixError) as excinfo:
        step_newton(state, SMALL)
    assert excinfo.value.row == 7
    assert excinfo.value.step == 2


def test_undamped_chain_conserves_discrete_energy():
    sites = np.arange(1, 201)
    phi = 0.5 * np.exp(-((sites - 100) / 8.0) ** 2)
    cfg = ChainConfig(kappa=0.0, initial_displacement=tuple(phi))
    result = run(cfg)
    energy = result.energy['E_total'].to_numpy()
    assert len(energy) == 4001
    assert np.max(np.abs(energy - energy[0])) <= 1e-8 * max(1.0, energy[0])
    assert energy[0] > 0
