import numpy as np
import pytest

from assetflow.analysis.equilibrium import (EquilibriumKind, cash_nodes, fundamental_equilibrium,
                                            manifold_frame, manifold_scan, simplex_grid,
                                            solve_manifold_point)
from assetflow.common.errors import CalibrationInfeasibleError, PreconditionError, ZeroSellRateError
from assetflow.model.types import SellRule
from assetflow.scenarios.presets import load_scenario
from assetflow.tests.synthetic_data import SyntheticDataGenerator


def test_mixed_fundamental_equilibrium():
    scenario = load_scenario('mixed-two-asset')
    eq = fundamental_equilibrium(scenario.cfg, scenario.cash)
    assert eq.kind == EquilibriumKind.FUNDAMENTAL
    np.testing.assert_allclose(eq.prices, [1.0, 1.0])
    np.testing.assert_allclose(eq.state.N, [[1.0, 1.0]], rtol=1e-12)
    assert eq.residual < 1e-12
    assert eq.balance['asset_imbalance'] < 1e-12


def test_oil_fundamental_holdings():
    scenario = load_scenario('nigeria-libya')
    eq = fundamental_equilibrium(scenario.cfg, scenario.cash)
    # both groups share the base buy rates, so an even cash split gives even holdings
    np.testing.assert_allclose(eq.state.N, [[0.00525, 0.00375], [0.00525, 0.00375]], rtol=1e-9)
    np.testing.assert_allclose(eq.state.N.sum(axis=0), [0.0105, 0.0075], rtol=1e-10)
    np.testing.assert_allclose(eq.prices, [80.0, 80.0])


def test_case1_has_no_fundamental_equilibrium():
    scenario = load_scenario('manifold-case1')
    with pytest.raises(CalibrationInfeasibleError) as excinfo:
        fundamental_equilibrium(scenario.cfg, scenario.cash)
    assert excinfo.value.mismatch[0] == pytest.approx(0.25)


def test_zero_sell_rate_is_reported():
    generator = SyntheticDataGenerator()
    cfg = generator.generate_simple_config(sell_rule=SellRule.tanh([[0.0]], [[0.0]], [[0.0]], [[0.0]]))
    with pytest.raises(ZeroSellRateError):
        fundamental_equilibrium(cfg, [1.0])


def test_case1_manifold_point_satisfies_closed_form():
    scenario = load_scenario('manifold-case1')
    point = solve_manifold_point(scenario.cfg, [0.5, 0.5])
    P, q2, Pa = point.prices[0], scenario.cfg.q2[0, 0], scenario.cfg.Pa[0]
    M1 = point.state.M[0]
    assert (1 - M1) * np.exp(2 * q2 * (1 - P / Pa)) == pytest.approx(P - M1, abs=1e-8)
    assert point.residual < 1e-8
    assert point.kind == EquilibriumKind.MANIFOLD
    np.testing.assert_allclose(point.state.Z1, 0.0, atol=1e-12)
    assert point.state.N.sum() == pytest.approx(1.0)


def test_cash_distribution_preconditions():
    scenario = load_scenario('manifold-case1')
    with pytest.raises(PreconditionError):
        solve_manifold_point(scenario.cfg, [0.4, 0.4])
    with pytest.raises(PreconditionError):
        solve_manifold_point(scenario.cfg, [1.2, -0.2])
    with pytest.raises(PreconditionError):
        solve_manifold_point(scenario.cfg, [1.0])


def test_case1_manifold_scan_is_stable_and_monotone():
    scenario = load_scenario('manifold-case1')
    nodes = manifold_scan(scenario.cfg, np.linspace(0.05, 0.95, 10), workers=1)
    assert len(nodes) == 10
    assert all(node.error is None for node in nodes)
    assert all(node.stable for node in nodes)
    frame = manifold_frame(scenario.cfg, nodes)
    assert list(frame.columns) == ['M_1', 'M_2', 'P_eq_1', 'residual', 'stable', 'leading_re', 'error']
    assert np.all(np.diff(frame['P_eq_1']) > 0)


def test_simplex_grid_nodes_sum_to_total():
    grid = simplex_grid(3, 5, 2.0)
    assert len(grid) == 6
    np.testing.assert_allclose(grid.sum(axis=1), 2.0)
    assert np.all(grid > 0)
    with pytest.raises(PreconditionError):
        simplex_grid(3, 2, 1.0)


def test_cash_nodes_from_scalar_grid():
    cfg = load_scenario('manifold-case1').cfg
    nodes = cash_nodes(cfg, [0.2, 0.7])
    np.testing.assert_allclose(nodes, [[0.2, 0.8], [0.7, 0.3]])
    with pytest.raises(PreconditionError):
        cash_nodes(cfg, [1.5])
    with pytest.raises(PreconditionError):
        cash_nodes(cfg, [[0.2, 0.2]])
