"""
Model Types
Configuration, state layout and rate snapshot types of the asset flow model
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Tuple

import numpy as np

from assetflow.common import config
from assetflow.common.errors import ConfigError, InvalidStateError


class ExecutionMode(str, Enum):
    AS_WRITTEN = "as_written"
    RATIONED_CLEARING = "rationed_clearing"


class SellRuleKind(str, Enum):
    TANH = "tanh"
    LINEAR_VALUE = "linear_value"
    ZERO_SUM = "zero_sum"


SELL_RULE_FIELDS = {
    SellRuleKind.TANH: ("atilde", "btilde", "gamma", "delta"),
    SellRuleKind.LINEAR_VALUE: ("ctilde", "dtilde"),
    SellRuleKind.ZERO_SUM: (),
}


def _frozen_array(values, shape: Tuple[int, ...], path: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a numeric array ({exc})", path=path)
    if arr.shape != shape:
        raise ConfigError(f"expected shape {list(shape)}, got {list(arr.shape)}", path=path)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("entries must be finite", path=path)
    arr.setflags(write=False)
    return arr


def _first_bad(mask: np.ndarray) -> str:
    idx = tuple(int(v) for v in np.argwhere(mask)[0])
    return "".join(f"[{v}]" for v in idx)


@dataclass(frozen=True, eq=False)
class SellRule:
    """Selling-rate rule; arrays are indexed [group][asset]"""

    kind: SellRuleKind
    params: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def tanh(cls, atilde, btilde, gamma, delta) -> "SellRule":
        return cls(SellRuleKind.TANH, {'atilde': atilde, 'btilde': btilde, 'gamma': gamma, 'delta': delta})

    @classmethod
    def linear_value(cls, ctilde, dtilde) -> "SellRule":
        return cls(SellRuleKind.LINEAR_VALUE, {'ctilde': ctilde, 'dtilde': dtilde})

    @classmethod
    def zero_sum(cls) -> "SellRule":
        return cls(SellRuleKind.ZERO_SUM, {})

    def bind(self, n: int, m: int) -> "SellRule":
        """Return a copy with arrays checked against an n×m layout"""
        kind = SellRuleKind(self.kind)
        expected = SELL_RULE_FIELDS[kind]
        unknown = sorted(set(self.params) - set(expected))
        if unknown:
            raise ConfigError(f"unknown field '{unknown[0]}' for rule {kind.value}",
                              path=f"$.sell_rule.{unknown[0]}")
        bound = {}
        for name in expected:
            if name not in self.params:
                raise ConfigError("missing field", path=f"$.sell_rule.{name}")
            bound[name] = _frozen_array(self.params[name], (n, m), f"$.sell_rule.{name}")
        return SellRule(kind, bound)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """
    All parameters of the m-asset, n-group system

    Group-indexed arrays have shape (n, m); coupling arrays have shape
    (n, m, m) ordered [group][bought asset][influencing asset].

    frozen_holdings holds cash and shares at their initial values during
    time integration, leaving the (P, Z1, Z2) subsystem. Equilibria and
    Jacobians always use the conserving flow.
    """

    m: int
    n: int
    tau: np.ndarray
    Pa: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sell_rule: SellRule
    M0: float
    N0: np.ndarray
    exec_mode: ExecutionMode = ExecutionMode.RATIONED_CLEARING
    strict_rate_bounds: bool = True
    rescale_buy_rates: bool = False
    frozen_holdings: bool = False
    name: str = ""
    group_names: Tuple[str, ...] = ()
    asset_names: Tuple[str, ...] = ()

    def __post_init__(self):
        m, n = self.m, self.n
        if not isinstance(m, (int, np.integer)) or m < 1:
            raise ConfigError("must be an integer ≥ 1", path="$.m")
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigError("must be an integer ≥ 1", path="$.n")
        set_ = object.__setattr__
        set_(self, 'm', int(m))
        set_(self, 'n', int(n))
        for name in ('tau', 'Pa', 'N0'):
            set_(self, name, _frozen_array(getattr(self, name), (m,), f"$.{name}"))
        for name in ('c1', 'c2', 'q1', 'q2', 'a', 'b'):
            set_(self, name, _frozen_array(getattr(self, name), (n, m), f"$.{name}"))
        for name in ('alpha', 'beta'):
            set_(self, name, _frozen_array(getattr(self, name), (n, m, m), f"$.{name}"))
        set_(self, 'sell_rule', self.sell_rule.bind(n, m))
        set_(self, 'exec_mode', ExecutionMode(self.exec_mode))
        set_(self, 'M0', float(self.M0))
        if not self.group_names:
            set_(self, 'group_names', tuple(f"group{j + 1}" for j in range(n)))
        if not self.asset_names:
            set_(self, 'asset_names', tuple(f"asset{i + 1}" for i in range(m)))
        if len(self.group_names) != n:
            raise ConfigError(f"expected {n} names", path="$.group_names")
        if len(self.asset_names) != m:
            raise ConfigError(f"expected {m} names", path="$.asset_names")
        set_(self, 'group_names', tuple(self.group_names))
        set_(self, 'asset_names', tuple(self.asset_names))
        self._validate()

    def _validate(self):
        positive = {'tau': self.tau, 'Pa': self.Pa, 'c1': self.c1, 'c2': self.c2, 'N0': self.N0}
        for name, arr in positive.items():
            if np.any(arr <= 0):
                raise ConfigError("must be > 0", path=f"$.{name}{_first_bad(arr <= 0)}")
        if not np.isfinite(self.M0) or self.M0 <= 0:
            raise ConfigError("must be > 0", path="$.M0")
        for name in ('q1', 'q2', 'alpha', 'beta'):
            arr = getattr(self, name)
            if np.any(arr < 0):
                raise ConfigError("must be ≥ 0", path=f"$.{name}{_first_bad(arr < 0)}")
        violations = self.rate_bound_violations()
        if violations and self.strict_rate_bounds:
            name, path = violations[0]
            raise ConfigError(
                f"{name} ± |gain| must stay inside [0, 1]; set strict_rate_bounds=false to rely on clamping",
                path=path,
            )

    def rate_bound_violations(self):
        """Pointwise rate-bound violations as (field, JSON path) pairs"""
        slack = config.RATE_BOUND_SLACK
        found = []
        checks = [('a', self.a, self.b)]
        if self.sell_rule.kind == SellRuleKind.TANH:
            checks.append(('atilde', self.sell_rule['atilde'], self.sell_rule['btilde']))
        for name, offset, gain in checks:
            bad = (offset - np.abs(gain) < -slack) | (offset + np.abs(gain) > 1 + slack)
            if np.any(bad):
                prefix = "$.sell_rule." if name == 'atilde' else "$."
                found.append((name, f"{prefix}{name}{_first_bad(bad)}"))
        if self.sell_rule.kind == SellRuleKind.LINEAR_VALUE:
            ctilde = self.sell_rule['ctilde']
            bad = (ctilde < -slack) | (ctilde > 1 + slack)
            if np.any(bad):
                found.append(('ctilde', f"$.sell_rule.ctilde{_first_bad(bad)}"))
        return found

    @property
    def dimension(self) -> int:
        return self.m + self.n + 3 * self.m * self.n

    @property
    def layout(self) -> "StateLayout":
        return StateLayout(self.m, self.n)

    def replace(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def liquidity_values(self) -> np.ndarray:
        """Total cash per share of each asset"""
        return self.M0 / self.N0

    def equal_cash_split(self) -> np.ndarray:
        return np.full(self.n, self.M0 / self.n)


@dataclass(frozen=True)
class StateLayout:
    """
    Canonical flattening: P, then M, then N, Z1, Z2 group-major (j outer, i inner)
    """

    m: int
    n: int

    @property
    def size(self) -> int:
        return self.m + self.n + 3 * self.m * self.n

    @property
    def P(self) -> slice:
        return slice(0, self.m)

    @property
    def M(self) -> slice:
        return slice(self.m, self.m + self.n)

    @property
    def N(self) -> slice:
        start = self.m + self.n
        return slice(start, start + self.m * self.n)

    @property
    def Z1(self) -> slice:
        start = self.m + self.n + self.m * self.n
        return slice(start, start + self.m * self.n)

    @property
    def Z2(self) -> slice:
        start = self.m + self.n + 2 * self.m * self.n
        return slice(start, start + self.m * self.n)

    def blocks(self) -> Dict[str, slice]:
        return {'P': self.P, 'M': self.M, 'N': self.N, 'Z1': self.Z1, 'Z2': self.Z2}

    def reduced_indices(self) -> np.ndarray:
        """Indices of the (P, Z1, Z2) sub-dynamics"""
        return np.concatenate([
            np.arange(self.P.start, self.P.stop),
            np.arange(self.Z1.start, self.Z2.stop),
        ])

    def unpack(self, x: np.ndarray):
        shape = (self.n, self.m)
        return (x[self.P], x[self.M], x[self.N].reshape(shape),
                x[self.Z1].reshape(shape), x[self.Z2].reshape(shape))

    def label(self, k: int) -> str:
        if k < self.M.start:
            return f"P_{k + 1}"
        if k < self.N.start:
            return f"M_{k - self.m + 1}"
        for name in ('N', 'Z1', 'Z2'):
            sl = getattr(self, name)
            if sl.start <= k < sl.stop:
                j, i = divmod(k - sl.start, self.m)
                return f"{name}_({j + 1},{i + 1})"
        raise IndexError(k)

    def labels(self):
        return [self.label(k) for k in range(self.size)]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Prices P[i], cash M[j], shares N[j][i] and sentiments Z1[j][i], Z2[j][i]"""

    P: np.ndarray
    M: np.ndarray
    N: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float).reshape(-1)
        M = np.array(self.M, dtype=float).reshape(-1)
        m, n = P.size, M.size
        for name, value in (('P', P), ('M', M)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        for name in ('N', 'Z1', 'Z2'):
            value = np.array(getattr(self, name), dtype=float)
            if value.shape != (n, m):
                raise InvalidStateError(f"{name} must have shape ({n}, {m}), got {value.shape}")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def m(self) -> int:
        return self.P.size

    @property
    def n(self) -> int:
        return self.M.size

    @property
    def layout(self) -> StateLayout:
        return StateLayout(self.m, self.n)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.P, self.M, self.N.ravel(), self.Z1.ravel(), self.Z2.ravel()])

    @classmethod
    def from_flat(cls, x: np.ndarray, m: int, n: int) -> "StateVector":
        layout = StateLayout(m, n)
        x = np.asarray(x, dtype=float)
        if x.shape != (layout.size,):
            raise InvalidStateError(f"flat state must have length {layout.size}, got {x.shape}")
        return cls(*(np.array(part) for part in layout.unpack(x)))

    @classmethod
    def from_holdings(cls, P, M, N, Z1=None, Z2=None) -> "StateVector":
        """Build a state with sentiments defaulting to zero"""
        N = np.asarray(N, dtype=float)
        zeros = np.zeros_like(N)
        return cls(P, M, N, zeros if Z1 is None else Z1, zeros if Z2 is None else Z2)

    def with_prices(self, P) -> "StateVector":
        return StateVector(P, self.M, self.N, self.Z1, self.Z2)

    def check(self):
        """Raise InvalidStateError unless prices are positive and holdings non-negative"""
        x = self.flatten()
        if not np.all(np.isfinite(x)):
            raise InvalidStateError("state contains non-finite entries")
        if np.any(self.P <= 0):
            raise InvalidStateError(f"prices must be positive, got {self.P.tolist()}")
        if np.any(self.M < 0) or np.any(self.N < 0):
            raise InvalidStateError("cash and shares must be non-negative")
        return self

    def to_dict(self) -> Dict[str, list]:
        return {name: getattr(self, name).tolist() for name in ('P', 'M', 'N', 'Z1', 'Z2')}


@dataclass(frozen=True, eq=False)
class RateSnapshot:
    """Transition rates with demand S[i] and supply T[i] at one state"""

    k: np.ndarray
    ktilde: np.ndarray
    S: np.ndarray
    T: np.ndarray

