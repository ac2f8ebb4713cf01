import numpy as np
import pytest
from scipy.integrate import simpson

from assetflow.analysis.bifurcation import seeded_state
from assetflow.analysis.equilibrium import fundamental_equilibrium
from assetflow.common.errors import InvalidStateError, SingularSupplyError
from assetflow.integration.integrator import IntegratorSettings, integrate
from assetflow.model.dynamics import cash_imbalance, executed_flows, make_rhs, rhs, rhs_flat, wealth
from assetflow.model.rates import rate_snapshot
from assetflow.model.types import ExecutionMode, StateVector
from assetflow.scenarios.acceptance import random_config, random_state
from assetflow.scenarios.presets import load_scenario
from assetflow.tests.synthetic_data import SyntheticDataGenerator


def test_rhs_vanishes_at_fundamental_equilibrium():
    scenario = load_scenario('mixed-two-asset')
    eq = fundamental_equilibrium(scenario.cfg, scenario.cash)
    assert np.max(np.abs(rhs_flat(scenario.cfg, eq.state.flatten()))) < 1e-12


def test_rationed_clearing_conserves_cash_and_shares():
    generator = SyntheticDataGenerator(seed=3)
    for _ in range(20):
        cfg = generator.generate_random_config()
        state = generator.generate_random_state(cfg)
        dx = rhs(cfg, state)
        assert abs(dx.M.sum()) < 1e-12 * max(1.0, cfg.M0)
        np.testing.assert_allclose(dx.N.sum(axis=0), 0.0, atol=1e-12)


def test_as_written_cash_imbalance_is_supply_minus_demand():
    generator = SyntheticDataGenerator(seed=5)
    cfg = generator.generate_random_config(m=2, n=2).replace(exec_mode=ExecutionMode.AS_WRITTEN)
    state = generator.generate_random_state(cfg)
    snap = rate_snapshot(cfg, state.P, state.M, state.N, state.Z1, state.Z2)
    assert cash_imbalance(cfg, state) == pytest.approx(float((snap.T - snap.S).sum()), abs=1e-12)


def test_rationed_volume_is_matched():
    generator = SyntheticDataGenerator(seed=7)
    cfg = generator.generate_random_config(m=2, n=3)
    state = generator.generate_random_state(cfg)
    buys, sells, S, T = executed_flows(cfg, state.P, state.M, state.N, state.Z1, state.Z2)
    np.testing.assert_allclose(buys.sum(axis=0), np.minimum(S, T), rtol=1e-12)
    np.testing.assert_allclose(sells.sum(axis=0), np.minimum(S, T), rtol=1e-12)


def test_price_and_sentiment_equations():
    generator = SyntheticDataGenerator(seed=11)
    cfg = generator.generate_random_config(m=2, n=2)
    state = generator.generate_random_state(cfg)
    snap = rate_snapshot(cfg, state.P, state.M, state.N, state.Z1, state.Z2)
    dx = rhs(cfg, state)
    dP = state.P / cfg.tau * (snap.S / snap.T - 1.0)
    np.testing.assert_allclose(dx.P, dP, rtol=1e-12)
    np.testing.assert_allclose(dx.Z1, cfg.c1 * cfg.q1 * (dP / state.P)[None, :] - cfg.c1 * state.Z1, atol=1e-12)
    np.testing.assert_allclose(dx.Z2, cfg.c2 * cfg.q2 * (1 - state.P / cfg.Pa)[None, :] - cfg.c2 * state.Z2,
                               atol=1e-12)


def test_rhs_rejects_invalid_states():
    cfg = SyntheticDataGenerator().generate_simple_config()
    x = StateVector.from_holdings([1.0], [1.0], [[1.0]]).flatten()
    x[0] = -1.0
    with pytest.raises(InvalidStateError):
        rhs_flat(cfg, x)
    x[0] = np.nan
    with pytest.raises(InvalidStateError):
        rhs_flat(cfg, x)


def test_empty_supply_is_singular():
    cfg = SyntheticDataGenerator().generate_simple_config()
    state = StateVector.from_holdings([1.0], [1.0], [[0.0]])
    with pytest.raises(SingularSupplyError) as excinfo:
        rhs(cfg, state)
    assert excinfo.value.asset == 0


def test_wealth_adds_cash_and_share_value():
    state = StateVector.from_holdings([2.0, 3.0], [0.5, 1.0], [[1.0, 0.0], [0.5, 2.0]])
    cfg = SyntheticDataGenerator().generate_simple_config(m=2, n=2)
    W, total = wealth(cfg, state)
    np.testing.assert_allclose(W, [2.5, 8.0])
    assert total == pytest.approx(10.5)


def test_frozen_holdings_keeps_cash_and_shares_fixed():
    scenario = load_scenario('nigeria-libya')
    assert scenario.cfg.frozen_holdings
    layout = scenario.cfg.layout
    x = random_state(np.random.default_rng(4), scenario.cfg).flatten()
    frozen = make_rhs(scenario.cfg)(0.0, x)
    full = rhs_flat(scenario.cfg, x)
    assert np.all(frozen[layout.M] == 0.0)
    assert np.all(frozen[layout.N] == 0.0)
    np.testing.assert_array_equal(frozen[layout.P], full[layout.P])
    np.testing.assert_array_equal(frozen[layout.Z1], full[layout.Z1])
    conserving = make_rhs(scenario.cfg.replace(frozen_holdings=False))(0.0, x)
    assert np.max(np.abs(conserving[layout.M])) > 0
    np.testing.assert_array_equal(conserving, full)


def test_random_configs_stay_positive_and_bounded():
    settings = IntegratorSettings(t_end=100.0, sample_dt=0.5)
    slack = 10 * settings.abs_tol
    for idx in range(20):
        rng = np.random.default_rng([0, idx])
        cfg = random_config(rng)
        traj = integrate(cfg, random_state(rng, cfg), settings)
        assert np.all(np.isfinite(traj.states)), cfg.name
        assert np.all(traj.prices > 0), cfg.name
        assert np.all(traj.cash >= -slack) and np.all(traj.cash <= cfg.M0 + slack), cfg.name
        assert np.all(traj.shares >= -slack), cfg.name
        assert np.all(traj.shares <= cfg.N0[None, None, :] + slack), cfg.name


def test_sentiments_equal_discounted_integrals():
    # Z(T) = e^{−cT}·Z(0) + ∫ c·q·e^{c(s−T)}·g(s) ds with g = dP/P for Z1 and g = 1 − P/Pa for Z2
    scenario = load_scenario('mixed-two-asset')
    cfg = scenario.cfg
    eq = fundamental_equilibrium(cfg, scenario.cash)
    traj = integrate(cfg, seeded_state(eq.state, 0.05, 0),
                     IntegratorSettings(t_end=10.0, sample_dt=0.01, abs_tol=1e-12, rel_tol=1e-10))
    times = traj.times
    dP = np.array([rhs_flat(cfg, x)[cfg.layout.P] for x in traj.states])
    trend_drive = dP / traj.prices
    value_drive = 1.0 - traj.prices / cfg.Pa[None, :]
    for j in range(cfg.n):
        for i in range(cfg.m):
            for Z, c, q, drive in ((traj.trend, cfg.c1, cfg.q1, trend_drive),
                                   (traj.value, cfg.c2, cfg.q2, value_drive)):
                rate = c[j, i]
                decay = np.exp(rate * (times - times[-1]))
                expected = decay[0] * Z[0, j, i] + simpson(rate * q[j, i] * decay * drive[:, i], x=times)
                assert Z[-1, j, i] == pytest.approx(expected, rel=1e-6, abs=1e-9)
