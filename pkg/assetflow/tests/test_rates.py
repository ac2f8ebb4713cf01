import numpy as np
import pytest

from assetflow.common.errors import ConfigError, PreconditionError, RateBudgetWarning
from assetflow.model.parameters import ParameterPath, apply_overrides, apply_parameter
from assetflow.model.rates import buy_rate, buy_rates, rate_snapshot, sell_rate, sell_rates
from assetflow.model.scaling import nondimensionalize
from assetflow.model.types import SellRule, StateVector
from assetflow.tests.synthetic_data import SyntheticDataGenerator

generator = SyntheticDataGenerator()


def test_buy_rate_at_neutral_sentiment_is_base_rate():
    cfg = generator.generate_simple_config(m=2, n=2)
    zeros = np.zeros((2, 2))
    np.testing.assert_allclose(buy_rates(cfg, zeros, zeros), np.full((2, 2), 0.25))


def test_buy_rate_follows_tanh_of_weighted_sentiments():
    cfg = generator.generate_simple_config(alpha=[[[1.0]]], beta=[[[0.5]]])
    value = buy_rate(cfg, 0, 0, np.array([[0.3]]), np.array([[-0.2]]))
    assert value == pytest.approx(0.5 + 0.2 * np.tanh(0.3 - 0.1), abs=1e-15)


def test_buy_rate_is_clamped_to_unit_interval():
    cfg = generator.generate_simple_config(b=[[2.5]], alpha=[[[1.0]]], strict_rate_bounds=False)
    high = buy_rate(cfg, 0, 0, np.array([[5.0]]), np.zeros((1, 1)))
    low = buy_rate(cfg, 0, 0, np.array([[-5.0]]), np.zeros((1, 1)))
    assert high == 1.0
    assert low == 0.0


def test_strict_rate_bounds_reject_large_gain():
    with pytest.raises(ConfigError) as excinfo:
        generator.generate_simple_config(b=[[2.5]])
    assert "$.a[0][0]" in str(excinfo.value)


def test_zero_sum_sell_rate_complements_buy_rate():
    cfg = generator.generate_simple_config(sell_rule=SellRule.zero_sum(), alpha=[[[1.0]]])
    Z1 = np.array([[0.4]])
    Z2 = np.zeros((1, 1))
    k = buy_rate(cfg, 0, 0, Z1, Z2)
    assert sell_rate(cfg, 0, 0, Z1, Z2, np.array([1.0])) == pytest.approx(1.0 - k)


def test_linear_value_sell_rate():
    cfg = generator.generate_simple_config(sell_rule=SellRule.linear_value([[0.3]], [[0.2]]), Pa=[2.0])
    zeros = np.zeros((1, 1))
    assert sell_rate(cfg, 0, 0, zeros, zeros, np.array([3.0])) == pytest.approx(0.3 + 0.2 * 0.5)


def test_sell_rates_reject_non_positive_price():
    cfg = generator.generate_simple_config()
    zeros = np.zeros((1, 1))
    with pytest.raises(PreconditionError):
        sell_rates(cfg, zeros, zeros, np.array([0.0]))


def test_rate_index_out_of_range():
    cfg = generator.generate_simple_config()
    zeros = np.zeros((1, 1))
    with pytest.raises(IndexError):
        buy_rate(cfg, 1, 0, zeros, zeros)


def test_buy_budget_warning_and_rescaling():
    cfg = generator.generate_simple_config(m=2, a=[[0.6, 0.6]], b=[[0.0, 0.0]])
    zeros = np.zeros((1, 2))
    with pytest.warns(RateBudgetWarning):
        buy_rates(cfg, zeros, zeros)
    rescaled = cfg.replace(rescale_buy_rates=True)
    np.testing.assert_allclose(buy_rates(rescaled, zeros, zeros).sum(axis=1), [1.0])


def test_rate_snapshot_demand_and_supply():
    cfg = generator.generate_simple_config(m=1, n=2)
    P = np.array([2.0])
    M = np.array([0.4, 0.6])
    N = np.array([[0.3], [0.7]])
    zeros = np.zeros((2, 1))
    snap = rate_snapshot(cfg, P, M, N, zeros, zeros)
    assert snap.S[0] == pytest.approx(0.5 * 1.0)
    assert snap.T[0] == pytest.approx(0.3 * 1.0 * 2.0)


def test_config_rejects_bad_shapes_and_signs():
    with pytest.raises(ConfigError):
        generator.generate_simple_config(tau=[1.0, 2.0])
    with pytest.raises(ConfigError) as excinfo:
        generator.generate_simple_config(q1=[[-0.1]])
    assert "$.q1" in str(excinfo.value)


def test_state_vector_flatten_layout():
    state = StateVector.from_holdings([1.0, 2.0], [0.5, 0.5], [[0.1, 0.2], [0.3, 0.4]])
    flat = state.flatten()
    assert flat.shape == (2 + 2 + 3 * 4,)
    np.testing.assert_array_equal(flat[:2], [1.0, 2.0])
    np.testing.assert_array_equal(flat[4:8], [0.1, 0.2, 0.3, 0.4])
    restored = StateVector.from_flat(flat, 2, 2)
    np.testing.assert_array_equal(restored.N, state.N)


def test_parameter_path_wildcards_and_joins():
    cfg = generator.generate_simple_config(m=2, n=2)
    path = ParameterPath.parse('q1[1][*]+c1[0][0]')
    changed = path.apply(cfg, 0.9)
    np.testing.assert_array_equal(changed.q1, [[0.5, 0.5], [0.9, 0.9]])
    assert changed.c1[0, 0] == 0.9
    assert path.read(changed) == 0.9
    assert cfg.q1[1, 0] == 0.5


def test_parameter_aliases_and_overrides():
    cfg = generator.generate_simple_config(m=2, n=1)
    aliases = {'trend': 'q1[0][1]'}
    changed = apply_overrides(cfg, {'trend': 0.8, 'tau[0]': 2.0}, aliases)
    assert changed.q1[0, 1] == 0.8
    assert changed.tau[0] == 2.0
    with pytest.raises(ConfigError):
        apply_parameter(cfg, 'nope', 1.0, aliases)
    with pytest.raises(ConfigError):
        apply_parameter(cfg, 'q1[5][0]', 1.0)


def test_sell_rule_parameters_are_addressable():
    cfg = generator.generate_simple_config()
    changed = apply_parameter(cfg, 'btilde[0][0]', 0.05)
    assert changed.sell_rule['btilde'][0, 0] == 0.05
    with pytest.raises(ConfigError):
        apply_parameter(cfg, 'dtilde[0][0]', 0.1)


def test_nondimensionalize_scales_totals():
    cfg = generator.generate_simple_config(m=2, n=1, M0=4.0, N0=[2.0, 0.5], Pa=[3.0, 5.0])
    scaled, scales = nondimensionalize(cfg)
    np.testing.assert_allclose(scales.liquidity, [2.0, 8.0])
    np.testing.assert_allclose(scaled.Pa, [1.5, 0.625])
    assert scaled.M0 == 1.0
    state = StateVector.from_holdings([3.0, 5.0], [4.0], [[2.0, 0.5]])
    back = scales.unscale_state(scales.scale_state(state))
    np.testing.assert_allclose(back.flatten(), state.flatten())
