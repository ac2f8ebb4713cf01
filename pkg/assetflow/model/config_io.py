"""
Config Serialization
JSON documents for ModelConfig and initial states
"""

import hashlib
import json
import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from assetflow.common.errors import ConfigError, InvalidStateError
from assetflow.model.types import (
    SELL_RULE_FIELDS, ExecutionMode, ModelConfig, SellRule, SellRuleKind, StateVector,
)

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ('m', 'n', 'tau', 'Pa', 'c1', 'c2', 'q1', 'q2', 'a', 'b', 'alpha', 'beta',
                 'sell_rule', 'M0', 'N0')
OPTIONAL_KEYS = ('name', 'exec_mode', 'strict_rate_bounds', 'rescale_buy_rates', 'frozen_holdings',
                 'group_names', 'asset_names')
DOCUMENT_KEYS = ('initial_state', 'cash', 'aliases')
STATE_KEYS = ('P', 'M', 'N', 'Z1', 'Z2')


def config_to_dict(cfg: ModelConfig) -> Dict[str, Any]:
    rule = {'kind': cfg.sell_rule.kind.value}
    for name, arr in cfg.sell_rule.params.items():
        rule[name] = arr.tolist()
    return {
        'name': cfg.name,
        'm': cfg.m,
        'n': cfg.n,
        'tau': cfg.tau.tolist(),
        'Pa': cfg.Pa.tolist(),
        'c1': cfg.c1.tolist(),
        'c2': cfg.c2.tolist(),
        'q1': cfg.q1.tolist(),
        'q2': cfg.q2.tolist(),
        'a': cfg.a.tolist(),
        'b': cfg.b.tolist(),
        'alpha': cfg.alpha.tolist(),
        'beta': cfg.beta.tolist(),
        'sell_rule': rule,
        'M0': cfg.M0,
        'N0': cfg.N0.tolist(),
        'exec_mode': cfg.exec_mode.value,
        'strict_rate_bounds': cfg.strict_rate_bounds,
        'rescale_buy_rates': cfg.rescale_buy_rates,
        'frozen_holdings': cfg.frozen_holdings,
        'group_names': list(cfg.group_names),
        'asset_names': list(cfg.asset_names),
    }


def config_from_dict(doc: Dict[str, Any]) -> ModelConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    allowed = set(REQUIRED_KEYS + OPTIONAL_KEYS)
    for key in doc:
        if key not in allowed:
            raise ConfigError("unknown field", path=f"$.{key}")
    for key in REQUIRED_KEYS:
        if key not in doc:
            raise ConfigError("missing required field", path=f"$.{key}")

    rule_doc = doc['sell_rule']
    if not isinstance(rule_doc, dict) or 'kind' not in rule_doc:
        raise ConfigError("must be an object with a 'kind'", path="$.sell_rule")
    try:
        kind = SellRuleKind(rule_doc['kind'])
    except ValueError:
        options = ', '.join(k.value for k in SellRuleKind)
        raise ConfigError(f"unknown kind (expected one of {options})", path="$.sell_rule.kind")
    for key in rule_doc:
        if key != 'kind' and key not in SELL_RULE_FIELDS[kind]:
            raise ConfigError("unknown field", path=f"$.sell_rule.{key}")
    rule = SellRule(kind, {key: value for key, value in rule_doc.items() if key != 'kind'})

    exec_mode = doc.get('exec_mode', ExecutionMode.RATIONED_CLEARING.value)
    try:
        exec_mode = ExecutionMode(exec_mode)
    except ValueError:
        raise ConfigError("expected 'as_written' or 'rationed_clearing'", path="$.exec_mode")

    cfg = ModelConfig(
        m=doc['m'], n=doc['n'],
        tau=doc['tau'], Pa=doc['Pa'],
        c1=doc['c1'], c2=doc['c2'], q1=doc['q1'], q2=doc['q2'],
        a=doc['a'], b=doc['b'], alpha=doc['alpha'], beta=doc['beta'],
        sell_rule=rule, M0=doc['M0'], N0=doc['N0'],
        exec_mode=exec_mode,
        strict_rate_bounds=bool(doc.get('strict_rate_bounds', True)),
        rescale_buy_rates=bool(doc.get('rescale_buy_rates', False)),
        frozen_holdings=bool(doc.get('frozen_holdings', False)),
        name=str(doc.get('name', '')),
        group_names=tuple(doc.get('group_names', ())),
        asset_names=tuple(doc.get('asset_names', ())),
    )
    for name, path in cfg.rate_bound_violations():
        logger.warning(f"{path}: {name} ± |gain| leaves [0, 1]; rates will be clamped")
    return cfg


def state_from_dict(doc: Dict[str, Any], cfg: ModelConfig) -> StateVector:
    if not isinstance(doc, dict):
        raise ConfigError("must be an object", path="$.initial_state")
    for key in doc:
        if key not in STATE_KEYS:
            raise ConfigError("unknown field", path=f"$.initial_state.{key}")
    for key in ('P', 'M', 'N'):
        if key not in doc:
            raise ConfigError("missing required field", path=f"$.initial_state.{key}")
    try:
        state = StateVector.from_holdings(doc['P'], doc['M'], doc['N'], doc.get('Z1'), doc.get('Z2'))
    except InvalidStateError as exc:
        raise ConfigError(exc.message, path="$.initial_state")
    if state.m != cfg.m or state.n != cfg.n:
        raise ConfigError(f"state dimensions do not match m={cfg.m}, n={cfg.n}", path="$.initial_state")
    try:
        return state.check()
    except InvalidStateError as exc:
        raise ConfigError(exc.message, path="$.initial_state")


def parse_document(text: str, source: str = "<string>") -> Dict[str, Any]:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {source}: {exc.msg} at line {exc.lineno}, column {exc.colno}",
                          line=exc.lineno, column=exc.colno)


def load_config_document(path: str) -> Tuple[ModelConfig, Optional[StateVector], Optional[np.ndarray], Dict[str, str]]:
    """
    Load a config file

    Returns:
        (config, initial state or None, cash split or None, parameter aliases)
    """
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}")
    doc = parse_document(text, path)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    model_doc = {key: value for key, value in doc.items() if key not in DOCUMENT_KEYS}
    cfg = config_from_dict(model_doc)
    state = state_from_dict(doc['initial_state'], cfg) if 'initial_state' in doc else None
    cash = None
    if 'cash' in doc:
        cash = np.asarray(doc['cash'], dtype=float)
        if cash.shape != (cfg.n,):
            raise ConfigError(f"expected {cfg.n} entries", path="$.cash")
    aliases = doc.get('aliases', {})
    if not isinstance(aliases, dict):
        raise ConfigError("must map alias names to parameter paths", path="$.aliases")
    return cfg, state, cash, {str(k): str(v) for k, v in aliases.items()}


def save_config(cfg: ModelConfig, path: str, initial_state: Optional[StateVector] = None):
    doc = config_to_dict(cfg)
    if initial_state is not None:
        doc['initial_state'] = initial_state.to_dict()
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(doc, fh, indent=2)


def config_hash(cfg: ModelConfig) -> str:
    """SHA-256 of the canonical JSON form"""
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
