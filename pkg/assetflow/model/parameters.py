"""
Parameter Paths
Addressing and overriding individual model parameters, e.g. "q1[1][*]" or "b[1][*]+dtilde[0][*]"
"""

import re
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from assetflow.common.errors import ConfigError
from assetflow.model.types import SELL_RULE_FIELDS, ModelConfig, SellRule

_TARGET_RE = re.compile(r'^(?P<field>[A-Za-z_][A-Za-z0-9_]*)(?P<index>(?:\[(?:\d+|\*)\])*)$')
_INDEX_RE = re.compile(r'\[(\d+|\*)\]')

ARRAY_FIELDS = ('tau', 'Pa', 'N0', 'c1', 'c2', 'q1', 'q2', 'a', 'b', 'alpha', 'beta')
SCALAR_FIELDS = ('M0',)
SELL_FIELDS = tuple(name for names in SELL_RULE_FIELDS.values() for name in names)

Index = Tuple[Union[int, str], ...]


@dataclass(frozen=True)
class ParameterPath:
    text: str
    targets: Tuple[Tuple[str, Index], ...]

    @classmethod
    def parse(cls, text: str, aliases: Optional[Dict[str, str]] = None) -> "ParameterPath":
        aliases = aliases or {}
        resolved = aliases.get(text, text)
        targets = []
        for part in resolved.split('+'):
            part = part.strip()
            match = _TARGET_RE.match(part)
            if not match:
                raise ConfigError(f"cannot parse parameter path '{part}'", path=f"$.{text}")
            field = match.group('field')
            if field not in ARRAY_FIELDS + SCALAR_FIELDS + SELL_FIELDS:
                known = ', '.join(sorted(aliases)) or 'none'
                raise ConfigError(f"unknown parameter '{field}' (aliases: {known})", path=f"$.{text}")
            index = tuple(int(tok) if tok != '*' else '*' for tok in _INDEX_RE.findall(match.group('index')))
            targets.append((field, index))
        return cls(text=text, targets=tuple(targets))

    def apply(self, cfg: ModelConfig, value: float) -> ModelConfig:
        changes: Dict[str, np.ndarray] = {}
        sell_params = dict(cfg.sell_rule.params)
        sell_touched = False
        for field, index in self.targets:
            if field in SCALAR_FIELDS:
                if index:
                    raise ConfigError("scalar parameter takes no index", path=f"$.{self.text}")
                changes[field] = float(value)
                continue
            if field in SELL_FIELDS:
                if field not in sell_params:
                    raise ConfigError(
                        f"sell rule {cfg.sell_rule.kind.value} has no '{field}'", path=f"$.{self.text}")
                arr = np.array(sell_params[field])
                sell_params[field] = self._assign(arr, index, value)
                sell_touched = True
                continue
            arr = np.array(changes.get(field, getattr(cfg, field)))
            changes[field] = self._assign(arr, index, value)
        if sell_touched:
            changes['sell_rule'] = SellRule(cfg.sell_rule.kind, sell_params)
        return cfg.replace(**changes)

    def read(self, cfg: ModelConfig) -> float:
        """Current value at the first target"""
        field, index = self.targets[0]
        if field in SCALAR_FIELDS:
            return float(getattr(cfg, field))
        arr = cfg.sell_rule[field] if field in SELL_FIELDS else getattr(cfg, field)
        selected = np.asarray(arr[self._selector(arr, index)])
        return float(selected.flat[0])

    def _selector(self, arr: np.ndarray, index: Index):
        if index and len(index) != arr.ndim:
            raise ConfigError(f"expected {arr.ndim} indices", path=f"$.{self.text}")
        if not index:
            return tuple(slice(None) for _ in range(arr.ndim))
        selector = []
        for axis, tok in enumerate(index):
            if tok == '*':
                selector.append(slice(None))
            elif tok >= arr.shape[axis]:
                raise ConfigError(f"index {tok} out of range", path=f"$.{self.text}")
            else:
                selector.append(tok)
        return tuple(selector)

    def _assign(self, arr: np.ndarray, index: Index, value: float) -> np.ndarray:
        arr[self._selector(arr, index)] = float(value)
        return arr


def apply_parameter(cfg: ModelConfig, path: Union[str, ParameterPath], value: float,
                    aliases: Optional[Dict[str, str]] = None) -> ModelConfig:
    """Return a copy of cfg with the addressed parameter(s) set to value"""
    if isinstance(path, str):
        path = ParameterPath.parse(path, aliases)
    return path.apply(cfg, value)


def apply_overrides(cfg: ModelConfig, overrides: Dict[str, float],
                    aliases: Optional[Dict[str, str]] = None) -> ModelConfig:
    for text, value in overrides.items():
        cfg = apply_parameter(cfg, text, value, aliases)
    return cfg
