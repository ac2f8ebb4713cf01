"""
Synthetic Data Generator
Known signals, small configurations and synthetic estimation problems for tests
"""

from typing import Optional, Tuple

import numpy as np

from assetflow.analysis.bifurcation import seeded_state
from assetflow.calibration.estimation import EstimationProblem, FreeParameter, synthetic_problem
from assetflow.integration.integrator import IntegratorSettings
from assetflow.model.types import ModelConfig, SellRule, StateVector
from assetflow.scenarios.acceptance import random_config, random_state
from assetflow.scenarios.presets import load_scenario


class SyntheticDataGenerator:
    """Signals and model inputs with analytically known properties"""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def generate_sinusoid(self, period: float = 2 * np.pi, amplitude: float = 0.1, mean: float = 1.0,
                          horizon: float = 60.0, dt: float = 0.01) -> Tuple[np.ndarray, np.ndarray]:
        """mean + amplitude·sin(2πt/period) sampled every dt"""
        times = np.arange(0.0, horizon + dt / 2, dt)
        return times, mean + amplitude * np.sin(2 * np.pi * times / period)

    def generate_constant(self, value: float = 1.0, horizon: float = 10.0,
                          dt: float = 0.1) -> Tuple[np.ndarray, np.ndarray]:
        times = np.arange(0.0, horizon + dt / 2, dt)
        return times, np.full(times.shape, value)

    def generate_simple_config(self, m: int = 1, n: int = 1, **changes) -> ModelConfig:
        """
        Small Tanh-rule configuration

        Characteristics:
        - zero sentiment couplings unless overridden
        - buy rate 0.5/m ± 0.2/m, sell rate 0.3 ± 0.1
        - unit time scales, fundamental values and totals
        """
        gm = (n, m)
        cfg = ModelConfig(
            m=m, n=n,
            tau=np.ones(m), Pa=np.ones(m),
            c1=np.ones(gm), c2=np.ones(gm), q1=np.full(gm, 0.5), q2=np.full(gm, 0.5),
            a=np.full(gm, 0.5 / m), b=np.full(gm, 0.2 / m),
            alpha=np.zeros((n, m, m)), beta=np.zeros((n, m, m)),
            sell_rule=SellRule.tanh(np.full(gm, 0.3), np.full(gm, 0.1), np.zeros(gm), np.zeros(gm)),
            M0=1.0, N0=np.ones(m),
            name=f"simple-{m}x{n}",
        )
        return cfg.replace(**changes) if changes else cfg

    def generate_random_config(self, m: Optional[int] = None, n: Optional[int] = None) -> ModelConfig:
        return random_config(self.rng, m, n)

    def generate_random_state(self, cfg: ModelConfig) -> StateVector:
        state = random_state(self.rng, cfg)
        Z1 = self.rng.uniform(-0.5, 0.5, size=(cfg.n, cfg.m))
        Z2 = self.rng.uniform(-0.5, 0.5, size=(cfg.n, cfg.m))
        return StateVector(state.P, state.M, state.N, Z1, Z2)

    def generate_recovery_problem(self, noise: float = 0.0, loss: str = "nls",
                                  simulations: int = 50) -> EstimationProblem:
        """
        Two-asset problem with q1_2 free on (0.2, 0.9); the truth is 0.5

        The initial state is the fundamental equilibrium with asset 2 raised
        by 5%, so the observed prices carry a damped oscillation.
        """
        scenario = load_scenario('mixed-two-asset')
        state = seeded_state(scenario.state, 0.05, scenario.asset)
        times = np.linspace(0.0, 20.0, 21)
        return synthetic_problem(scenario.cfg, state, [FreeParameter('q1_2', 0.2, 0.9)], times,
                                 noise=noise, seed=self.seed, loss=loss, simulations=simulations,
                                 aliases=scenario.aliases, settings=IntegratorSettings(t_end=20.0))
