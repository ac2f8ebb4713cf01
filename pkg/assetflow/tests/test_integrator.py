import numpy as np
import pytest

from assetflow.analysis.bifurcation import seeded_state
from assetflow.analysis.equilibrium import fundamental_equilibrium
from assetflow.common.errors import PreconditionError, StepLimitError
from assetflow.integration.integrator import (IntegratorSettings, integrate, integrate_to_attractor,
                                              rate_series, solve_ode)
from assetflow.scenarios.presets import load_scenario
from assetflow.tests.synthetic_data import SyntheticDataGenerator


def test_exponential_decay_matches_closed_form():
    times = np.linspace(0.0, 5.0, 51)
    states, stats = solve_ode(lambda t, y: -y, np.array([1.0, 2.0]), times, abs_tol=1e-12, rel_tol=1e-12)
    np.testing.assert_allclose(states[:, 0], np.exp(-times), rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(states[:, 1], 2 * np.exp(-times), rtol=1e-8, atol=1e-12)
    assert stats['accepted_steps'] > 0


def test_dense_output_tracks_harmonic_oscillator():
    times = np.linspace(0.0, 4 * np.pi, 400)
    states, _ = solve_ode(lambda t, y: np.array([y[1], -y[0]]), np.array([1.0, 0.0]), times,
                          abs_tol=1e-10, rel_tol=1e-10)
    np.testing.assert_allclose(states[:, 0], np.cos(times), atol=1e-7)
    np.testing.assert_allclose(states[:, 1], -np.sin(times), atol=1e-7)


def test_t_eval_must_increase():
    with pytest.raises(PreconditionError):
        solve_ode(lambda t, y: -y, np.array([1.0]), np.array([0.0, 1.0, 1.0]))
    with pytest.raises(PreconditionError):
        solve_ode(lambda t, y: -y, np.array([1.0]), np.array([0.0]))


def test_settings_validation_and_sample_grid():
    with pytest.raises(PreconditionError):
        IntegratorSettings(t_end=0.0)
    with pytest.raises(PreconditionError):
        IntegratorSettings(abs_tol=0.0)
    with pytest.raises(PreconditionError):
        IntegratorSettings(sample_dt=-1.0)
    times = IntegratorSettings(t_end=1.05, sample_dt=0.1).sample_times()
    assert times[0] == 0.0
    assert times[-1] == 1.05
    assert len(times) == 12
    assert IntegratorSettings(t_end=1.0, sample_dt=0.1).sample_times()[-1] == 1.0


def test_equilibrium_is_stationary():
    scenario = load_scenario('mixed-two-asset')
    eq = fundamental_equilibrium(scenario.cfg, scenario.cash)
    traj = integrate(scenario.cfg, eq.state, IntegratorSettings(t_end=20.0, sample_dt=1.0))
    np.testing.assert_allclose(traj.states, np.repeat(eq.state.flatten()[None, :], len(traj), axis=0),
                               atol=1e-9)
    assert traj.diagnostics['drift']['max'] < 1e-9


def test_trajectory_frame_columns_and_conservation():
    scenario = load_scenario('mixed-two-asset')
    traj = integrate(scenario.cfg, scenario.state, IntegratorSettings(t_end=10.0, sample_dt=0.5))
    frame = traj.to_frame()
    assert list(frame.columns[:4]) == ['time', 'P_1', 'P_2', 'M_1']
    assert 'N_(1,2)' in frame.columns
    assert 'Z2_(1,1)' in frame.columns
    assert 'W_1' in frame.columns
    assert len(frame) == 21
    np.testing.assert_allclose(traj.cash.sum(axis=1), scenario.cfg.M0, atol=1e-8)
    assert np.all(traj.prices > 0)


def test_integrate_to_attractor_keeps_late_window():
    scenario = load_scenario('mixed-two-asset')
    settings = IntegratorSettings(t_end=20.0, sample_dt=0.5)
    traj = integrate_to_attractor(scenario.cfg, scenario.state, settings, transient_fraction=0.5)
    assert traj.times[0] == pytest.approx(10.0)
    assert traj.times[-1] == pytest.approx(20.0)
    with pytest.raises(PreconditionError):
        integrate_to_attractor(scenario.cfg, scenario.state, settings, transient_fraction=0.95)


def test_step_limit_is_reported():
    with pytest.raises(StepLimitError) as excinfo:
        solve_ode(lambda t, y: np.array([y[1], -y[0]]), np.array([1.0, 0.0]), np.linspace(0.0, 100.0, 11),
                  abs_tol=1e-10, rel_tol=1e-10, max_steps=3)
    assert excinfo.value.time < 100.0


def test_rhs_hook_replaces_model():
    cfg = SyntheticDataGenerator().generate_simple_config()
    y0 = np.ones(cfg.dimension)
    traj = integrate(cfg, y0, IntegratorSettings(t_end=1.0, sample_dt=0.5, abs_tol=1e-12, rel_tol=1e-12),
                     rhs_hook=lambda t, y: -y)
    np.testing.assert_allclose(traj.states[-1], np.exp(-1.0) * y0, rtol=1e-8)
    assert 'drift' not in traj.diagnostics


def test_dimension_mismatch():
    cfg = SyntheticDataGenerator().generate_simple_config()
    with pytest.raises(PreconditionError):
        integrate(cfg, np.ones(cfg.dimension + 1), IntegratorSettings(t_end=1.0))


def test_rate_series_shapes():
    scenario = load_scenario('mixed-two-asset')
    traj = integrate(scenario.cfg, scenario.state, IntegratorSettings(t_end=2.0, sample_dt=1.0))
    series = rate_series(scenario.cfg, traj)
    assert series['k'].shape == (3, scenario.cfg.n, scenario.cfg.m)
    assert series['S'].shape == (3, scenario.cfg.m)
    assert np.all((series['k'] >= 0) & (series['k'] <= 1))


def test_halving_tolerances_moves_prices_within_tolerance():
    scenario = load_scenario('mixed-two-asset')
    eq = fundamental_equilibrium(scenario.cfg, scenario.cash)
    x0 = seeded_state(eq.state, 0.05, 0)
    settings = IntegratorSettings(t_end=20.0, sample_dt=0.5)
    coarse = integrate(scenario.cfg, x0, settings)
    fine = integrate(scenario.cfg, x0, settings.tightened(2.0))
    bound = 10 * (settings.abs_tol + settings.rel_tol * np.abs(fine.prices))
    assert np.all(np.abs(coarse.prices - fine.prices) < bound)
