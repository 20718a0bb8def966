#!/usr/bin/env python3
"""
Tests for sweeps, threshold detection, accuracy studies and the shift laws

Reproduction checks at desk scale are marked slow: pytest -m "not slow" skips them.
"""

import numpy as np
import pytest

from src.chain.model import ChainConfig, PotentialKind, SchemeKind, evanescent_decay, mass_squared_for_level, threshold_As
from src.chain.errors import BandGapError, ChainConfigError
from src.chain.stepper import run
from src.analysis import experiments
from src.analysis.experiments import (
    BifurcationDiagram,
    ThresholdRecord,
    ThresholdSearch,
    amplitude_sweep,
    bifurcation_diagram,
    compare_integrators,
    convergence_study,
    energy_surface,
    evanescent_envelope,
    find_threshold,
    horizon_for,
    interpolate_threshold,
    is_nondecreasing,
    is_nonincreasing,
    linear_problem,
    mass_family,
    mass_level_family,
    parallel_map,
    parameter_family,
    shift_law_check,
    steady_amplitude,
)


SMALL = ChainConfig(n_sites=60, n_physical=40, t_final=20.0, ramp_time=5.0)


def _square(x):
    return x * x


def test_parallel_map_restores_order():
    assert parallel_map(_square, range(6), workers=1) == [0, 1, 4, 9, 16, 25]
    assert parallel_map(_square, range(6), workers=3) == [0, 1, 4, 9, 16, 25]


def test_zero_amplitude_sweep_is_a_single_quiet_cell():
    result = amplitude_sweep(SMALL, [0.0])
    frame = result.to_frame()
    assert len(frame) == 1
    assert frame.loc[0, 'E_physical'] == 0.0
    assert frame.loc[0, 'flag'] == ""


@pytest.mark.parametrize("grid", [[], [0.5, 0.5], [1.0, 0.5]])
def test_sweep_rejects_bad_grids(grid):
    with pytest.raises(ChainConfigError):
        amplitude_sweep(SMALL, grid)


def test_sweep_is_independent_of_worker_count():
    grid = [0.2, 0.6, 1.0]
    serial = amplitude_sweep(SMALL, grid, workers=1).to_frame()
    pooled = amplitude_sweep(SMALL, grid, workers=2).to_frame()
    assert serial.equals(pooled)
    assert list(serial.columns) == ['A', 'Omega', 'E_physical', 'E_total', 'E_injected', 'flag']


def test_sweep_records_failures_and_continues():
    unstable = ChainConfig(dt=0.3, t_final=30.0)
    frame = amplitude_sweep(unstable, [0.0, 1.0]).to_frame()
    assert frame.loc[0, 'flag'] == ""
    assert frame.loc[1, 'flag'] != ""
    assert np.isnan(frame.loc[1, 'E_physical'])


def test_single_cell_surface_matches_single_run():
    surface = energy_surface(SMALL, [0.9], [0.8])
    single = run(SMALL.with_updates(amplitude=0.8, frequency=0.9), record_energy=False)
    assert surface.cells[0].E_physical == single.E_physical
    assert surface.energy_grid().shape == (1, 1)


def test_surface_is_frequency_major():
    surface = energy_surface(SMALL, [0.7, 0.8], [0.1, 0.2, 0.3])
    frame = surface.to_frame()
    assert list(frame['Omega']) == [0.7, 0.7, 0.7, 0.8, 0.8, 0.8]
    assert list(frame['A']) == [0.1, 0.2, 0.3, 0.1, 0.2, 0.3]


def test_band_edge_extends_horizon():
    assert horizon_for(ChainConfig(), 0.96).t_final == 500.0
    assert horizon_for(ChainConfig(), 0.96, extend_band_edge=False).t_final == 200.0
    assert horizon_for(ChainConfig(), 0.9).t_final == 200.0


def test_threshold_bracket_validation():
    with pytest.raises(ChainConfigError):
        find_threshold(SMALL, 0.9, ThresholdSearch(a_lo=2.0, a_hi=1.0))
    with pytest.raises(BandGapError):
        bifurcation_diagram(SMALL, [0.9, 1.1])


def test_threshold_bisection_contract():
    search = ThresholdSearch(a_lo=0.3, a_hi=4.0, tolerance=0.05)
    record = find_threshold(ChainConfig(), 0.9, search)
    assert not record.flagged
    assert record.a_hi - record.a_lo <= 0.05
    assert 1.72 <= record.a_thr <= 1.83
    assert record.a_lo < record.a_thr <= record.a_hi
    assert record.a_base == pytest.approx(0.03)


def test_interpolate_threshold_skips_flagged_points():
    records = [
        ThresholdRecord(0.5, 2.0, 1.99, 2.01, 0.1, 1.0, 10.0, 1e-3),
        ThresholdRecord(0.6, np.nan, 0.5, 4.0, 0.1, 1.0, 10.0, 1e-3, flag="discrepancy"),
        ThresholdRecord(0.7, 1.6, 1.59, 1.61, 0.1, 1.0, 10.0, 1e-3),
    ]
    diagram = BifurcationDiagram((0.5, 0.6, 0.7), records, ThresholdSearch(), ChainConfig())
    assert interpolate_threshold(diagram, 0.6) == pytest.approx(1.8)
    assert np.isnan(interpolate_threshold(diagram, 0.8))
    frame = diagram.to_frame()
    assert list(frame.columns) == ['Omega', 'A_thr', 'A_lo', 'A_hi', 'A_s_reference', 'flag']
    assert frame.loc[2, 'A_s_reference'] == pytest.approx(threshold_As(0.7, ChainConfig()))


def test_families():
    labels = [label for label, _ in parameter_family(SMALL, 'gamma', [0.0, 0.01, 0.02, 0.03])]
    assert labels == ['gamma=0', 'gamma=0.01', 'gamma=0.02', 'gamma=0.03']
    imaginary = mass_family(SMALL, [0.05, 0.1], imaginary=True)
    assert imaginary[1][1].mass_squared == pytest.approx(-0.01)
    assert imaginary[1][0] == 'm=0.1i'
    with pytest.raises(ChainConfigError):
        parameter_family(SMALL, 'viscosity', [1.0])


def test_mass_level_family():
    family = mass_level_family(SMALL, [-4, 0, 2])
    assert [label for label, _ in family] == ['level=-4', 'level=0', 'level=2']
    assert family[1][1].mass_squared == 0.0
    assert family[0][1].mass_squared == pytest.approx(mass_squared_for_level(-4))
    assert family[2][1].gap_edge == pytest.approx(1.05)


def test_monotonicity_helpers():
    assert is_nondecreasing([1.0, 1.0, 1.2])
    assert not is_nondecreasing([1.0, 0.9])
    assert is_nonincreasing([3.0, 2.0, 2.0])


def test_steady_amplitude_recovers_sinusoid():
    t = np.arange(0, 200, 0.05)
    series = 0.7 * np.sin(0.9 * t + 0.3) + 0.1
    assert steady_amplitude(t, series, 0.9) == pytest.approx(0.7, rel=1e-9)


def test_linear_convergence_is_second_order():
    base = linear_problem(ChainConfig()).with_updates(amplitude=0.5, t_final=10.0)
    study = convergence_study(base, (0.05, 0.025, 0.0125), reference='exact')
    assert not study.failures
    assert np.all((study.orders >= 1.8) & (study.orders <= 2.2))
    assert len(study.to_frame()) == 3


def test_convergence_study_reports_blowup():
    base = linear_problem(ChainConfig()).with_updates(amplitude=0.5, t_final=30.0)
    study = convergence_study(base, (0.3, 0.15), reference='exact')
    assert 0.3 in study.failures
    assert np.isnan(study.errors[0])


def test_convergence_ladder_must_decrease():
    with pytest.raises(ChainConfigError):
        convergence_study(SMALL, (0.025, 0.05))


@pytest.mark.slow
def test_rk4_self_convergence_is_fourth_order():
    base = ChainConfig(scheme=SchemeKind.RK4, ramp_time=0.0, t_final=10.0).with_updates(amplitude=0.5)
    study = convergence_study(base, (0.05, 0.025, 0.0125), reference='rk4')
    assert np.all((study.orders >= 3.5) & (study.orders <= 4.5))


@pytest.mark.slow
def test_evanescent_envelope_in_linear_regime():
    frame = evanescent_envelope(ChainConfig().with_updates(amplitude=0.01, frequency=0.9))
    assert list(frame['site']) == [20, 40, 60]
    assert (frame['relative_error'] <= 0.05).all()
    assert frame['expected'].iloc[-1] == pytest.approx(0.01 * np.exp(-60 * evanescent_decay(0.9, ChainConfig())))


@pytest.mark.slow
def test_threshold_at_reference_frequency():
    record = find_threshold(ChainConfig(), 0.9)
    assert not record.flagged
    assert 1.77 <= record.a_thr <= 1.79
    assert abs(record.a_thr - threshold_As(0.9, ChainConfig())) <= 0.05


@pytest.mark.slow
def test_sweep_jump_location():
    grid = np.round(np.arange(1.70, 1.905, 0.01), 2)
    result = amplitude_sweep(ChainConfig().with_updates(frequency=0.9), grid, workers=4)
    low, high = result.largest_jump()
    assert 1.77 <= low and high <= 1.79


@pytest.mark.slow
def test_klein_gordon_transmits_after_bifurcation():
    cfg = ChainConfig(potential=PotentialKind.KLEIN_GORDON)
    below = run(cfg.with_updates(amplitude=1.77), record_energy=False)
    above = run(cfg.with_updates(amplitude=1.79), record_energy=False)
    assert above.E_physical > below.E_physical


@pytest.mark.slow
@pytest.mark.parametrize("key, values", [
    ('gamma', [0.0, 0.01, 0.02, 0.03]),
    ('beta', [0.0, 0.1, 0.2, 0.3]),
])
def test_threshold_grows_with_damping(key, values):
    tolerance = 2.5e-4
    thresholds = [find_threshold(cfg, 0.9, ThresholdSearch(tolerance=tolerance)).a_thr
                  for _, cfg in parameter_family(ChainConfig(), key, values)]
    assert is_nondecreasing(thresholds, slack=tolerance)
    assert thresholds[-1] > thresholds[0] + tolerance


@pytest.mark.slow
def test_final_energy_falls_with_external_damping():
    energies = [run(cfg.with_updates(amplitude=2.2), record_energy=False).E_physical
                for _, cfg in parameter_family(ChainConfig(), 'gamma', [0.0, 0.01, 0.02, 0.03])]
    assert is_nonincreasing(energies)


@pytest.mark.slow
@pytest.mark.parametrize("kind, value", [('beta', 0.4), ('mass', 0.01)])
def test_shift_laws(kind, value):
    checks = shift_law_check(ChainConfig(), (0.8, 0.9), kind=kind, value=value,
                             search=ThresholdSearch(tolerance=1e-2), workers=4)
    assert all(check.passed for check in checks)


@pytest.mark.slow
def test_newton_and_rk4_agree_at_second_order():
    cfg = ChainConfig(t_final=100.0).with_updates(amplitude=1.0, frequency=0.9)
    frame = compare_integrators(cfg, (0.05, 0.025))
    assert frame['ratio'].iloc[-1] >= 3.0


def _fake_thresholds(slope):
    def task(args):
        cfg, frequency, search, _ = args
        return ThresholdRecord(frequency, 2.0 - frequency + slope * cfg.beta, 0.1, 4.0, 0.01, 1.0, 10.0,
                               search.tolerance)
    return task


def test_beta_shift_law_readings(monkeypatch):
    monkeypatch.setattr(experiments, '_threshold_task', _fake_thresholds(0.1))
    same = shift_law_check(SMALL, (0.8, 0.9), kind='beta', value=0.4)
    assert [check.shifted_frequency for check in same] == [0.8, 0.9]
    assert all(check.passed for check in same)

    shifted = shift_law_check(SMALL, (0.8, 0.9), kind='beta-shifted', value=0.4)
    assert [check.shifted_frequency for check in shifted] == pytest.approx([0.4, 0.5])
    assert shifted[0].a_thr_reference == pytest.approx(1.6)
    assert not any(check.passed for check in shifted)


def test_beta_shift_law_rejects_lower_damped_threshold(monkeypatch):
    monkeypatch.setattr(experiments, '_threshold_task', _fake_thresholds(-0.05))
    checks = shift_law_check(SMALL, (0.8, 0.9), kind='beta', value=0.4)
    assert all(check.relative_error <= 0.1 for check in checks)
    assert not any(check.passed for check in checks)
    with pytest.raises(ChainConfigError):
        shift_law_check(SMALL, kind='gamma')


def test_bifurcation_diagram_is_independent_of_worker_count():
    search = ThresholdSearch(tolerance=0.05)
    serial = bifurcation_diagram(SMALL, (0.8, 0.9), search, workers=1).to_frame()
    pooled = bifurcation_diagram(SMALL, (0.8, 0.9), search, workers=2).to_frame()
    assert serial.equals(pooled)


def test_rk4_matches_exact_linear_solution():
    base = linear_problem(ChainConfig()).with_updates(scheme=SchemeKind.RK4, amplitude=0.5, t_final=10.0)
    study = convergence_study(base, (0.025, 0.0125), reference='exact')
    assert not study.failures
    assert study.errors[-1] <= 1e-6


@pytest.mark.slow
def test_newton_and_linearized_agree_at_second_order():
    cfg = ChainConfig(t_final=100.0).with_updates(amplitude=1.0, frequency=0.9)
    frame = compare_integrators(cfg, (0.05, 0.025), other=SchemeKind.LINEARIZED)
    assert frame['ratio'].iloc[-1] >= 3.0


@pytest.mark.slow
def test_threshold_grows_with_mass_squared():
    tolerance = 1e-3
    base = ChainConfig(gamma=0.01)
    members = mass_family(base, [0.1, 0.075, 0.05], imaginary=True) + mass_family(base, [0.0, 0.05, 0.075, 0.1])
    assert [cfg.mass_squared for _, cfg in members] == sorted(cfg.mass_squared for _, cfg in members)
    thresholds = [find_threshold(cfg, 0.9, ThresholdSearch(tolerance=tolerance)).a_thr for _, cfg in members]
    assert not np.any(np.isnan(thresholds))
    assert is_nondecreasing(thresholds, slack=tolerance)


@pytest.mark.slow
def test_klein_gordon_has_no_clean_threshold_at_low_frequency():
    record = find_threshold(ChainConfig(potential=PotentialKind.KLEIN_GORDON), 0.6)
    assert record.flagged
    assert np.isnan(record.a_thr)


@pytest.mark.slow
def test_bifurcation_diagram_follows_continuum_threshold():
    diagram = bifurcation_diagram(ChainConfig(), (0.5, 0.7, 0.9), ThresholdSearch(tolerance=1e-2), workers=3)
    assert not any(record.flagged for record in diagram.records)
    reference = diagram.reference_As()
    relative = np.abs(diagram.thresholds - reference) / reference
    assert np.all(relative <= 0.10)
