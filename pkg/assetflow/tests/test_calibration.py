import numpy as np
import pytest

from assetflow.calibration.estimation import (EstimationResult, FreeParameter, _slice_log_density, nls_fit,
                                              noise_draws, problem_from_dict, sml_fit, sml_loglik, sse_loss,
                                              status_for)
from assetflow.common.errors import ConfigError, DensityFloorWarning, PreconditionError
from assetflow.scenarios.presets import load_scenario
from assetflow.tests.synthetic_data import SyntheticDataGenerator


def test_free_parameter_transform_round_trip():
    p = FreeParameter('q1_2', 0.2, 0.9)
    assert p.to_bounded(0.0) == pytest.approx(0.55)
    assert p.to_bounded(p.to_unbounded(0.37)) == pytest.approx(0.37)
    assert 0.2 < p.to_bounded(-100.0) < p.to_bounded(100.0) < 0.9
    with pytest.raises(PreconditionError):
        FreeParameter('q1_2', 0.9, 0.2)
    with pytest.raises(PreconditionError):
        FreeParameter('q1_2', 0.0, np.inf)


def test_sse_is_zero_at_truth_without_noise():
    problem = SyntheticDataGenerator().generate_recovery_problem()
    assert problem.truth == {'q1_2': 0.5}
    assert sse_loss(problem, [0.5]) == pytest.approx(0.0, abs=1e-16)
    assert sse_loss(problem, [0.7]) > 0


def test_nls_recovers_trend_magnitude():
    problem = SyntheticDataGenerator().generate_recovery_problem()
    result = nls_fit(problem, restarts=1, seed=0)
    assert abs(result.estimates['q1_2'] - 0.5) < 0.02
    assert result.converged
    assert result.relative_errors()['q1_2'] < 0.04
    assert result.table()['status'].iloc[0] == "Excellent"


def test_status_bands():
    assert status_for(0.01) == "Excellent"
    assert status_for(0.08) == "Good"
    assert status_for(0.12) == "Acceptable"
    assert status_for(0.5) == "Moderate"


def test_result_without_truth_has_no_errors():
    result = EstimationResult(names=['x'], theta=np.array([1.0]), loss=0.0, loss_kind="sse", converged=True,
                              evaluations=1, restarts=[], rmse=np.zeros(1))
    assert result.relative_errors() is None
    assert result.table_rows()[0]['status'] == ""


def test_sml_loglik_is_deterministic_in_seed():
    problem = SyntheticDataGenerator(seed=1).generate_recovery_problem(noise=0.005, loss="sml")
    draws = noise_draws(problem, seed=3)
    assert draws.shape == (50, 21, 2)
    np.testing.assert_array_equal(draws, noise_draws(problem, seed=3))
    first = sml_loglik(problem, [0.5], draws)
    assert first == sml_loglik(problem, [0.5], draws)
    assert np.isfinite(first)


def test_sml_preconditions():
    problem = SyntheticDataGenerator().generate_recovery_problem(noise=0.005, loss="sml", simulations=10)
    with pytest.raises(PreconditionError):
        sml_fit(problem)


def test_density_floor_warns_far_from_samples():
    samples = np.random.default_rng(0).normal(0.0, 0.01, size=50)
    with pytest.warns(DensityFloorWarning):
        value = _slice_log_density(samples, 10.0, 0.01)
    assert value == pytest.approx(np.log(1e-300))


def test_empty_free_list_is_rejected():
    problem = SyntheticDataGenerator().generate_recovery_problem()
    bare = problem_from_dict({'free': [], 'series': {'times': problem.times.tolist(),
                                                     'prices': problem.observed.tolist()}},
                             problem.cfg, problem.initial_state)
    with pytest.raises(PreconditionError):
        nls_fit(bare, restarts=1)


def test_problem_from_dict_validation():
    scenario = load_scenario('mixed-two-asset')
    series = {'times': [0.0, 1.0], 'prices': [[1.0, 1.0], [1.0, 1.0]]}
    with pytest.raises(ConfigError):
        problem_from_dict({'free': [{'name': 'q1_2'}], 'series': series}, scenario.cfg, scenario.state)
    with pytest.raises(ConfigError):
        problem_from_dict({'free': [], 'series': series, 'extra': 1}, scenario.cfg, scenario.state)
    with pytest.raises(ConfigError):
        problem_from_dict({'free': []}, scenario.cfg, scenario.state)
    with pytest.raises(PreconditionError):
        problem_from_dict({'free': [], 'series': {'times': [0.0, 1.0], 'prices': [[1.0], [1.0]]}},
                          scenario.cfg, scenario.state)
    problem = problem_from_dict({'free': [{'name': 'q1_2', 'lo': 0.2, 'hi': 0.9}], 'series': series,
                                 'loss': 'nls'}, scenario.cfg, scenario.state, scenario.aliases)
    assert problem.names == ['q1_2']
    np.testing.assert_allclose(problem.current_values(), [0.5])
