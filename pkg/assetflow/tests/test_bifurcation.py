from types import SimpleNamespace

import numpy as np
import pytest

from assetflow.analysis import bifurcation
from assetflow.analysis.bifurcation import (HopfThreshold, ScanNode, bifurcation_scan, continuation_scan,
                                            find_hopf_threshold, hysteresis_gap, seeded_state, signal_metrics)
from assetflow.common import config
from assetflow.common.errors import NonTransversalError, NoSignChangeError, PreconditionError, WindowTooShortError
from assetflow.scenarios.presets import load_scenario
from assetflow.tests.synthetic_data import SyntheticDataGenerator

generator = SyntheticDataGenerator()


def test_mixed_hopf_threshold_and_period():
    scenario = load_scenario('mixed-two-asset')
    threshold = find_hopf_threshold(scenario.cfg, 'q1_2', (0.5, 1.5), cash=scenario.cash,
                                    aliases=scenario.aliases)
    assert threshold.mu == pytest.approx(1.0, abs=0.01)
    assert threshold.period == pytest.approx(2 * np.pi, rel=0.01)
    assert threshold.slope > 0
    assert threshold.transversal
    assert threshold.to_dict()['parameter'] == 'q1_2'


def test_threshold_needs_sign_change():
    scenario = load_scenario('mixed-two-asset')
    with pytest.raises(NoSignChangeError):
        find_hopf_threshold(scenario.cfg, 'q1_2', (0.5, 0.8), cash=scenario.cash, aliases=scenario.aliases)
    with pytest.raises(PreconditionError):
        find_hopf_threshold(scenario.cfg, 'q1_2', (1.5, 0.5), cash=scenario.cash, aliases=scenario.aliases)


def test_sinusoid_metrics():
    times, values = generator.generate_sinusoid(period=2 * np.pi, amplitude=0.1)
    metrics = signal_metrics(times, values)
    assert metrics.oscillating
    assert metrics.amplitude == pytest.approx(0.1, abs=1e-4)
    assert metrics.period == pytest.approx(2 * np.pi, abs=1e-3)
    assert metrics.P_max == pytest.approx(1.1, abs=1e-4)


def test_constant_signal_has_no_period():
    times, values = generator.generate_constant(2.0)
    metrics = signal_metrics(times, values)
    assert metrics.period is None
    assert metrics.amplitude == 0.0
    assert metrics.peaks == 0


def test_short_window_is_rejected_when_strict():
    times, values = generator.generate_sinusoid(horizon=8.0)
    with pytest.raises(WindowTooShortError):
        signal_metrics(times, values)
    relaxed = signal_metrics(times, values, strict=False)
    assert relaxed.period is None
    assert relaxed.amplitude == pytest.approx(0.1, abs=1e-4)


def test_seeded_state_raises_one_price():
    scenario = load_scenario('mixed-two-asset')
    seeded = seeded_state(scenario.state, 0.01, asset=1)
    np.testing.assert_allclose(seeded.P, scenario.state.P * np.array([1.0, 1.01]))
    np.testing.assert_array_equal(seeded.N, scenario.state.N)


def test_scan_over_mixed_threshold():
    scenario = load_scenario('mixed-two-asset')
    result = bifurcation_scan(scenario.cfg, 'q1_2', [0.5, 1.5], cash=scenario.cash, horizon=100.0,
                              perturbation=0.01, asset=1, aliases=scenario.aliases, workers=1)
    stable, unstable = result.nodes
    assert stable.classification == "Stable"
    assert unstable.classification == "Unstable"
    assert stable.consistent
    assert result.threshold_value == pytest.approx(1.0, abs=0.01)
    frame = result.to_frame()
    assert list(frame['parameter']) == [0.5, 1.5]
    assert 'leadingRe' in frame.columns


def test_scan_grid_must_be_monotone():
    scenario = load_scenario('mixed-two-asset')
    with pytest.raises(PreconditionError):
        bifurcation_scan(scenario.cfg, 'q1_2', [0.5, 1.5, 1.0], aliases=scenario.aliases)
    with pytest.raises(PreconditionError):
        continuation_scan(scenario.cfg, 'q1_2', [0.5, 1.5], direction="sideways", aliases=scenario.aliases)


def test_hysteresis_gap_compares_shared_values():
    up = [ScanNode(value=0.5, amplitude=0.0), ScanNode(value=1.2, amplitude=0.05)]
    down = [ScanNode(value=1.2, amplitude=0.08), ScanNode(value=0.5, amplitude=0.001),
            ScanNode(value=0.9, amplitude=1.0)]
    assert hysteresis_gap(up, down) == pytest.approx(0.03)
    assert hysteresis_gap(up, []) == 0.0


def test_oil_hopf_threshold_and_period():
    scenario = load_scenario('nigeria-libya')
    threshold = find_hopf_threshold(scenario.cfg, 'q1_china', (0.2, 1.0), cash=scenario.cash,
                                    aliases=scenario.aliases)
    assert 0.30 <= threshold.mu <= 0.45
    assert 10.0 <= threshold.period <= 18.0
    assert threshold.transversal


def test_oil_full_and_reduced_thresholds_agree():
    scenario = load_scenario('nigeria-libya')
    found = {kind: find_hopf_threshold(scenario.cfg, 'q1_china', (0.2, 1.0), cash=scenario.cash,
                                       aliases=scenario.aliases, kind=kind).mu
             for kind in ("reduced", "full")}
    assert abs(found["full"] - found["reduced"]) < 0.01 * found["reduced"]


def test_oil_cycles_match_spectrum_and_lengthen():
    scenario = load_scenario('nigeria-libya')
    result = bifurcation_scan(scenario.cfg, 'q1_china', [0.4, 0.7, 1.0], cash=scenario.cash, horizon=1500.0,
                              asset=scenario.asset, aliases=scenario.aliases, workers=1, refine=False)
    for node in result.nodes:
        assert node.classification == "Unstable"
        assert node.consistent
    periods = [node.period for node in result.nodes]
    assert all(p is not None for p in periods)
    assert periods[0] < periods[1] < periods[2]
    assert 1.2 <= periods[2] / periods[0] <= 1.8


def test_oil_amplitude_rises_from_zero_through_threshold():
    scenario = load_scenario('nigeria-libya')
    mu = find_hopf_threshold(scenario.cfg, 'q1_china', (0.2, 1.0), cash=scenario.cash,
                             aliases=scenario.aliases).mu
    result = bifurcation_scan(scenario.cfg, 'q1_china', [mu - 0.02, mu + 0.02, mu + 0.1], cash=scenario.cash,
                              horizon=1500.0, asset=scenario.asset, aliases=scenario.aliases, workers=1,
                              refine=False)
    below, near, above = (node.amplitude for node in result.nodes)
    assert below < config.AMPLITUDE_THRESHOLD * scenario.cfg.Pa[0]
    assert 0 < near < above


def test_tangential_crossing_is_not_transversal(monkeypatch):
    # leading real part (μ − 0.5)³ changes sign with zero slope
    def fake_spectrum(cfg, path, mu, cash=None, kind="reduced"):
        leading = (mu - 0.5) ** 3
        return SimpleNamespace(leading=leading, leading_eigenvalue=complex(leading, 1.0))

    monkeypatch.setattr(bifurcation, 'spectrum_at', fake_spectrum)
    scenario = load_scenario('mixed-two-asset')
    with pytest.raises(NonTransversalError) as excinfo:
        find_hopf_threshold(scenario.cfg, 'q1_2', (0.0, 1.0), aliases=scenario.aliases)
    assert excinfo.value.context['mu'] == pytest.approx(0.5, abs=1e-4)
    assert not HopfThreshold('q1_2', 0.5, 1j, slope=1e-9, iterations=0, bracket=(0.0, 1.0)).transversal
