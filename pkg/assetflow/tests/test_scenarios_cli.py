import json
import logging
import os
import re

import numpy as np
import pandas as pd
import pytest

from assetflow.common.errors import ConfigError, UnknownScenarioError
from assetflow.main import cli_dispatch
from assetflow.model.config_io import config_from_dict, config_hash, config_to_dict, save_config
from assetflow.model.parameters import ParameterPath
from assetflow.reporting import plots
from assetflow.reporting.exporters import ArtifactWriter, RunManifest
from assetflow.scenarios.acceptance import (ValidationContext, check_conservation, check_contagion,
                                            check_jacobian_structure)
from assetflow.scenarios.presets import BENCHMARK_NAMES, PRESETS, available_scenarios, load_scenario


def _manifest(out_dir) -> dict:
    with open(os.path.join(out_dir, 'manifest.json'), encoding='utf-8') as fh:
        return json.load(fh)


def test_every_preset_loads_with_provenance():
    assert set(available_scenarios()) == set(PRESETS)
    for name in available_scenarios():
        scenario = load_scenario(name)
        assert scenario.cfg.name == name
        assert scenario.state.m == scenario.cfg.m
        assert scenario.provenance
        assert abs(scenario.cash.sum() - scenario.cfg.M0) < 1e-12


def test_oil_scenario_cited_values():
    scenario = load_scenario('nigeria-libya')
    read = {name: ParameterPath.parse(name, scenario.aliases).read(scenario.cfg)
            for name in ('b_china', 'd_usa', 'alpha')}
    assert read == {'b_china': 2.5, 'd_usa': 0.01, 'alpha': 3.0}
    assert scenario.provenance['b_china'][0] == "cited"
    assert scenario.scan == ('q1_china', 0.2, 1.0)


def test_unknown_scenario():
    with pytest.raises(UnknownScenarioError) as excinfo:
        load_scenario('no-such-scenario')
    assert 'mixed-two-asset' in excinfo.value.available
    assert 'cavani-nigeria-libya' in excinfo.value.available


def test_config_file_round_trip(tmp_path):
    scenario = load_scenario('nigeria-libya')
    path = str(tmp_path / 'oil.json')
    save_config(scenario.cfg, path)
    loaded = load_scenario(path)
    assert config_hash(loaded.cfg) == config_hash(scenario.cfg)
    assert not loaded.explicit_state

    save_config(scenario.cfg, path, initial_state=scenario.state)
    explicit = load_scenario(path)
    assert explicit.explicit_state
    np.testing.assert_allclose(explicit.state.N, scenario.state.N)


def test_malformed_and_unknown_fields(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"m": 1,\n  "n": }', encoding='utf-8')
    with pytest.raises(ConfigError) as excinfo:
        load_scenario(str(path))
    assert 'line 2' in excinfo.value.message

    doc = config_to_dict(load_scenario('mixed-two-asset').cfg)
    doc['volatility'] = 0.3
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict(doc)
    assert excinfo.value.path == "$.volatility"


def test_cli_usage_errors(tmp_path):
    assert cli_dispatch(['simulate', '--no-such-flag']) == 2
    assert cli_dispatch(['simulate', '--scenario', 'mixed-two-asset', '--config', 'x.json']) == 2
    assert cli_dispatch(['simulate', '--threads', '0']) == 2
    assert cli_dispatch(['simulate', '--perturb', '7=0.01', '--out', str(tmp_path)]) == 2


def test_cli_domain_error_exit_code(tmp_path, capsys):
    assert cli_dispatch(['simulate', '--scenario', 'no-such-scenario', '--out', str(tmp_path)]) == 1
    assert 'UnknownScenarioError' in capsys.readouterr().err


def test_simulate_writes_artifacts_and_manifest(tmp_path):
    out = str(tmp_path / 'stable')
    assert cli_dispatch(['simulate', '--horizon', '40', '--out', out, '--plot']) == 0
    manifest = _manifest(out)
    assert manifest['command'] == 'simulate'
    assert manifest['status']['classification'] == 'Stable'
    assert {'trajectory.csv', 'spectrum.json', 'trajectory.gp', 'manifest.json'} <= set(manifest['outputs'])
    assert manifest['config_hash'] == config_hash(load_scenario('mixed-two-asset').cfg)
    frame = pd.read_csv(os.path.join(out, 'trajectory.csv'))
    assert frame['time'].iloc[-1] == pytest.approx(40.0)
    assert 'capital_gain_1' in frame.columns


def test_simulate_past_threshold_is_unstable(tmp_path):
    out = str(tmp_path / 'unstable')
    assert cli_dispatch(['simulate', '--horizon', '20', '--set', 'q1_2=1.005', '--out', out]) == 0
    manifest = _manifest(out)
    assert manifest['status']['classification'] == 'Unstable'
    assert manifest['settings']['overrides'] == {'q1_2': 1.005}


def test_equilibria_command(tmp_path):
    out = str(tmp_path / 'manifold')
    assert cli_dispatch(['equilibria', '--scenario', 'manifold-case1', '--grid', '5', '--out', out]) == 0
    frame = pd.read_csv(os.path.join(out, 'manifold.csv'))
    assert len(frame) == 5
    status = _manifest(out)['status']
    assert status['solved'] == 5
    assert status['stable'] == 5


def test_writer_records_outputs(tmp_path):
    writer = ArtifactWriter(str(tmp_path / 'run'))
    writer.csv('table.csv', pd.DataFrame({'x': [1.0, 2.0]}))
    writer.json('values.json', {'arr': np.array([1.0, np.nan]), 'flag': np.bool_(True)})
    RunManifest(command='test', config_hash='abc', seed=3).write(writer)
    manifest = _manifest(writer.out_dir)
    assert manifest['outputs'] == ['table.csv', 'values.json', 'manifest.json']
    with open(writer.path('values.json'), encoding='utf-8') as fh:
        assert json.load(fh) == {'arr': [1.0, None], 'flag': True}


def test_plot_scripts_reference_columns():
    script = plots.trajectory_script(['time', 'P_1', 'P_2', 'M_1', 'W_1'])
    assert "using 1:2" in script
    assert "using 1:3" in script
    assert "using 1:5" in script
    assert "set arrow from 1.0" in plots.bifurcation_script(1.0)
    assert "'a' 0, 'b' 1" in plots.contagion_script([[0.0, 0.1], [0.2, 0.0]], ['a', 'b'])


EMOJI = re.compile('[\u2600-\u27bf\U0001f300-\U0001faff]')


def test_benchmark_names_load_their_presets():
    listed = available_scenarios(benchmark_names=True)
    assert set(BENCHMARK_NAMES) <= set(listed)
    assert set(PRESETS) <= set(listed)
    for benchmark, preset in BENCHMARK_NAMES.items():
        scenario = load_scenario(benchmark)
        assert scenario.cfg.name == preset
        assert config_hash(scenario.cfg) == config_hash(load_scenario(preset).cfg)


def test_frozen_holdings_survive_config_round_trip(tmp_path):
    cfg = load_scenario('nigeria-libya').cfg
    assert cfg.frozen_holdings
    assert config_from_dict(config_to_dict(cfg)).frozen_holdings
    path = str(tmp_path / 'oil.json')
    save_config(cfg.replace(frozen_holdings=False), path)
    assert not load_scenario(path).cfg.frozen_holdings


def test_structural_acceptance_rows_pass():
    ctx = ValidationContext(quick=True, workers=1)
    rows = check_jacobian_structure(ctx) + check_conservation(ctx)
    failed = [row.check for row in rows if not row.passed]
    assert not failed


def test_contagion_acceptance_rows_pass():
    rows = check_contagion(ValidationContext(quick=True, workers=1))
    assert [row.passed for row in rows] == [True, True, True]
    assert rows[2].check == "off-diagonal reduction without trend coupling"


@pytest.mark.parametrize('argv', [
    ['simulate', '--horizon', '5'],
    ['scan', '--param', 'q1_2', '--from', '0.8', '--to', '1.2', '--steps', '2', '--horizon', '20'],
    ['excursion', '--grid=-0.05,0,0.05', '--horizon', '10'],
    ['contagion', '--horizon', '20'],
])
def test_cli_log_lines_are_plain_text(tmp_path, caplog, argv):
    caplog.set_level(logging.INFO)
    assert cli_dispatch(argv + ['--threads', '1', '--out', str(tmp_path / argv[0])]) == 0
    assert caplog.records
    assert not [record.getMessage() for record in caplog.records if EMOJI.search(record.getMessage())]
