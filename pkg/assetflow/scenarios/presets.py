"""
Scenario Presets
Benchmark parameterizations with provenance, parameter aliases and estimation domains
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from assetflow.analysis.equilibrium import fundamental_equilibrium, solve_manifold_point
from assetflow.common.errors import CalibrationInfeasibleError, UnknownScenarioError
from assetflow.model.config_io import load_config_document
from assetflow.model.types import ModelConfig, SellRule, StateVector

logger = logging.getLogger(__name__)

CITED = "cited"
DEFAULT_CHOSEN = "default-chosen"

# Estimation domains for the two-country oil scenario
PARAMETER_DOMAINS: Dict[str, Tuple[float, float]] = {
    'b_china': (0.5, 4.0),
    'd_usa': (0.001, 0.3),
    'alpha': (0.5, 5.0),
    'q1_china': (0.1, 1.2),
    'q2_usa': (0.1, 0.8),
    'c1_china': (0.05, 0.5),
    'c2_usa': (0.1, 0.6),
    'k0_china': (0.05, 0.4),
    'k0_usa': (0.05, 0.4),
}


@dataclass(frozen=True, eq=False)
class ScenarioPreset:
    """
    A named configuration with its cash split, aliases and provenance

    provenance maps a parameter (or alias) to (tag, note) where tag is
    "cited" for values taken from published benchmark studies and
    "default-chosen" for values filled in here.
    """

    name: str
    description: str
    build: Callable[[], ModelConfig]
    cash: Tuple[float, ...]
    aliases: Dict[str, str] = field(default_factory=dict)
    provenance: Dict[str, Tuple[str, str]] = field(default_factory=dict)
    perturbation: Dict[int, float] = field(default_factory=lambda: {0: 0.01})
    scan: Optional[Tuple[str, float, float]] = None
    asset: int = 0  # asset seeded and measured in cycle scans

    def config(self) -> ModelConfig:
        return self.build()


@dataclass(frozen=True, eq=False)
class Scenario:
    """A loaded configuration ready for the workflows"""

    name: str
    cfg: ModelConfig
    state: StateVector
    cash: np.ndarray
    aliases: Dict[str, str] = field(default_factory=dict)
    provenance: Dict[str, Tuple[str, str]] = field(default_factory=dict)
    perturbation: Dict[int, float] = field(default_factory=dict)
    source: str = "preset"
    asset: int = 0
    scan: Optional[Tuple[str, float, float]] = None
    explicit_state: bool = False

    def with_config(self, cfg: ModelConfig) -> "Scenario":
        return Scenario(self.name, cfg, self.state, self.cash, self.aliases, self.provenance,
                        self.perturbation, self.source, self.asset, self.scan, self.explicit_state)


def _manifold_case(q1: float, q2: float, c: float, name: str) -> ModelConfig:
    # group 1 follows trends, group 2 trades on value; one asset
    return ModelConfig(
        m=1, n=2,
        tau=[1.0], Pa=[0.8],
        c1=[[c], [c]], c2=[[c], [c]],
        q1=[[q1], [q1]], q2=[[q2], [q2]],
        a=[[0.5], [0.5]], b=[[0.5], [0.5]],
        alpha=[[[1.0]], [[0.0]]], beta=[[[0.0]], [[1.0]]],
        sell_rule=SellRule.zero_sum(),
        M0=1.0, N0=[1.0],
        name=name,
        group_names=("trend", "value"),
        asset_names=("asset",),
    )


_MANIFOLD_ALIASES = {'q1': 'q1[*][*]', 'q2': 'q2[*][*]', 'c': 'c1[*][*]+c2[*][*]'}
_MANIFOLD_PROVENANCE = {
    'q1': (CITED, "trend magnitude of the benchmark case"),
    'q2': (CITED, "value magnitude of the benchmark case"),
    'c': (CITED, "sentiment decay rates of the benchmark case"),
    'Pa': (CITED, "fundamental value 0.8 in liquidity units"),
    'sell_rule': (CITED, "zero-sum rule: sell rate is one minus buy rate"),
    'a': (DEFAULT_CHOSEN, "buy rate 1/2 at neutral sentiment, ranging over (0, 1)"),
    'b': (DEFAULT_CHOSEN, "full tanh range of the buy rate"),
    'tau': (DEFAULT_CHOSEN, "unit price adjustment time"),
    'M0': (DEFAULT_CHOSEN, "nondimensional totals M0 = N0 = 1"),
}


def _mixed_two_asset(q1_2: float = 0.5) -> ModelConfig:
    # one group; asset 2 trend drives buying of both assets, asset 1 value sentiment feeds buying and selling
    return ModelConfig(
        m=2, n=1,
        tau=[1.0, 1.0], Pa=[1.0, 1.0],
        c1=[[1.0, 1.0]], c2=[[2.0, 1.0]],
        q1=[[0.0, q1_2]], q2=[[0.02, 0.0]],
        a=[[0.25, 0.25]], b=[[0.25, 0.25]],
        alpha=[[[0.0, 2.0], [0.0, 2.0]]],
        beta=[[[1.0, 0.0], [0.0, 0.0]]],
        sell_rule=SellRule.tanh(atilde=[[0.25, 0.25]], btilde=[[0.1, 0.1]],
                                gamma=[[0.0, 0.0]], delta=[[-1.0, -1.0]]),
        M0=1.0, N0=[1.0, 1.0],
        name="mixed-two-asset",
        group_names=("investors",),
        asset_names=("asset1", "asset2"),
    )


_NIGERIA_N0 = (0.0105, 0.0075)  # 35% / 25% market shares, scaled so that S/(N0·Pa) stays below 1
_NIGERIA_PA = 80.0
_NIGERIA_BASE_BUY = (0.15, 0.3)  # per asset, shared by both groups


def _nigeria_libya() -> ModelConfig:
    cash = np.array([0.5, 0.5])
    a = np.tile(_NIGERIA_BASE_BUY, (2, 1))
    demand = (a * cash[:, None]).sum(axis=0)
    # sell offsets chosen so that the fundamental equilibrium holds exactly the totals N0
    ctilde = np.tile(demand / (np.array(_NIGERIA_N0) * _NIGERIA_PA), (2, 1))
    alpha = np.zeros((2, 2, 2))
    alpha[1, 0, 1] = alpha[1, 1, 0] = 3.0
    beta = np.zeros((2, 2, 2))
    beta[0, 0, 0] = beta[0, 1, 1] = 1.0
    return ModelConfig(
        m=2, n=2,
        tau=[1.0, 1.0], Pa=[_NIGERIA_PA, _NIGERIA_PA],
        c1=[[0.2, 0.2], [0.2, 0.2]], c2=[[0.2, 0.2], [0.2, 0.2]],
        q1=[[0.0, 0.0], [0.2, 0.2]], q2=[[1.0, 1.0], [0.0, 0.0]],
        a=a, b=[[0.01, 0.01], [2.5, 2.5]],
        alpha=alpha, beta=beta,
        sell_rule=SellRule.linear_value(ctilde=ctilde, dtilde=[[0.01, 0.01], [0.0, 0.0]]),
        M0=1.0, N0=list(_NIGERIA_N0),
        strict_rate_bounds=False,
        frozen_holdings=True,
        name="nigeria-libya",
        group_names=("usa", "china"),
        asset_names=("nigeria", "libya"),
    )


_NIGERIA_ALIASES = {
    'q1_china': 'q1[1][*]',
    'b_china': 'b[1][*]',
    'd_usa': 'dtilde[0][*]',
    'alpha': 'alpha[1][0][1]+alpha[1][1][0]',
    'q2_usa': 'q2[0][*]',
    'c1_china': 'c1[1][*]',
    'c2_usa': 'c2[0][*]',
    'k0_china': 'a[1][*]',
    'k0_usa': 'a[0][*]',
    'k0_nigeria': 'a[*][0]',
    'k0_libya': 'a[*][1]',
}

_NIGERIA_PROVENANCE = {
    'b_china': (CITED, "trend response of the momentum group, 2.5"),
    'd_usa': (CITED, "value response of the value group, 0.01"),
    'alpha': (CITED, "cross-asset trend coupling, 3.0"),
    'Pa': (CITED, "fundamental value 80 per barrel for both grades"),
    'N0': (CITED, "market shares 35% and 25%"),
    'q1_china': (DEFAULT_CHOSEN, "0.2, below the Hopf threshold; scanned over [0.2, 1.0]"),
    'q2_usa': (DEFAULT_CHOSEN, "unit value-sentiment magnitude"),
    'c1': (DEFAULT_CHOSEN, "decay 0.2 per day for all sentiments"),
    'tau': (DEFAULT_CHOSEN, "one day"),
    'a': (DEFAULT_CHOSEN, "base buy rates 0.15 on Nigeria and 0.3 on Libya for both groups; "
                          "the per-asset gap sets the contagion asymmetry"),
    'frozen_holdings': (DEFAULT_CHOSEN, "simulations hold cash and shares at the equilibrium split"),
    'M0': (DEFAULT_CHOSEN, "cash normalized to 1"),
    'cash': (DEFAULT_CHOSEN, "50/50 split between the two investor groups"),
    'ctilde': (DEFAULT_CHOSEN, "calibrated so the fundamental equilibrium reproduces N0"),
    'initial_state': (DEFAULT_CHOSEN, "prices at the fundamental value"),
}


PRESETS: Dict[str, ScenarioPreset] = {
    'manifold-case1': ScenarioPreset(
        name='manifold-case1',
        description="single asset, trend vs value group, zero-sum rates; fully stable manifold",
        build=lambda: _manifold_case(1.0, 1.0, 1.0, 'manifold-case1'),
        cash=(0.5, 0.5),
        aliases=_MANIFOLD_ALIASES,
        provenance=_MANIFOLD_PROVENANCE,
    ),
    'manifold-case2': ScenarioPreset(
        name='manifold-case2',
        description="stronger value response; stability changes along the manifold",
        build=lambda: _manifold_case(1.0, 5.0, 5.0, 'manifold-case2'),
        cash=(0.5, 0.5),
        aliases=_MANIFOLD_ALIASES,
        provenance=_MANIFOLD_PROVENANCE,
    ),
    'manifold-case3': ScenarioPreset(
        name='manifold-case3',
        description="strong trend and value response; mostly unstable manifold",
        build=lambda: _manifold_case(5.0, 5.0, 5.0, 'manifold-case3'),
        cash=(0.5, 0.5),
        aliases=_MANIFOLD_ALIASES,
        provenance=_MANIFOLD_PROVENANCE,
    ),
    'mixed-two-asset': ScenarioPreset(
        name='mixed-two-asset',
        description="one group, two assets, mixed trend/value strategy; Hopf point at q1_2 = 1",
        build=_mixed_two_asset,
        cash=(1.0,),
        aliases={'q1_2': 'q1[0][1]', 'q2_1': 'q2[0][0]'},
        provenance={
            'q2_1': (CITED, "fixed value magnitude 0.02 on asset 1"),
            'q1_2': (DEFAULT_CHOSEN, "0.5, stable side of the threshold"),
            'a': (DEFAULT_CHOSEN, "rates chosen so the threshold sits at q1_2 = 1 with period 2π"),
        },
        scan=("q1_2", 0.5, 1.5),
        perturbation={1: 0.01},
        asset=1,
    ),
    'nigeria-libya': ScenarioPreset(
        name='nigeria-libya',
        description="two crude grades, value-trading and momentum-trading investor groups",
        build=_nigeria_libya,
        cash=(0.5, 0.5),
        aliases=_NIGERIA_ALIASES,
        provenance=_NIGERIA_PROVENANCE,
        scan=('q1_china', 0.2, 1.0),
    ),
}


# Names under which the benchmark studies publish these scenarios
BENCHMARK_NAMES: Dict[str, str] = {
    'desantis-case1': 'manifold-case1',
    'desantis-case2': 'manifold-case2',
    'desantis-case3': 'manifold-case3',
    'bulut-mixed': 'mixed-two-asset',
    'cavani-nigeria-libya': 'nigeria-libya',
}


def available_scenarios(benchmark_names: bool = False):
    names = sorted(PRESETS)
    if benchmark_names:
        names += sorted(BENCHMARK_NAMES)
    return names


def resolve_scenario_name(name: str) -> str:
    """Preset key for a preset or benchmark name; other strings pass through"""
    return BENCHMARK_NAMES.get(name, name)


def initial_state_for(cfg: ModelConfig, cash: np.ndarray) -> StateVector:
    """Fundamental equilibrium when the share calibration holds, otherwise the manifold point"""
    try:
        return fundamental_equilibrium(cfg, cash).state
    except CalibrationInfeasibleError as exc:
        logger.debug(f"{cfg.name or 'config'}: no fundamental equilibrium ({exc.message}); using manifold point")
        return solve_manifold_point(cfg, cash).state


def load_scenario(name_or_path: str) -> Scenario:
    """
    Load a preset by name or a JSON config file

    Returns:
        Scenario with a validated config and its default initial state
    """
    preset = PRESETS.get(resolve_scenario_name(name_or_path))
    if preset is not None:
        cfg = preset.config()
        cash = np.array(preset.cash, dtype=float)
        state = initial_state_for(cfg, cash)
        logger.info(f"loaded preset {preset.name} (m={cfg.m}, n={cfg.n})")
        return Scenario(preset.name, cfg, state, cash, dict(preset.aliases), dict(preset.provenance),
                        dict(preset.perturbation), source="preset", asset=preset.asset, scan=preset.scan)

    if not os.path.exists(name_or_path):
        raise UnknownScenarioError(name_or_path, available_scenarios(benchmark_names=True))
    cfg, state, cash, aliases = load_config_document(name_or_path)
    explicit = state is not None
    if cash is None:
        cash = state.M if state is not None else cfg.equal_cash_split()
    if state is None:
        state = initial_state_for(cfg, cash)
    logger.info(f"loaded config {name_or_path} (m={cfg.m}, n={cfg.n})")
    return Scenario(cfg.name or os.path.basename(name_or_path), cfg, state, np.asarray(cash, dtype=float),
                    aliases, {}, {}, source=name_or_path, explicit_state=explicit)
