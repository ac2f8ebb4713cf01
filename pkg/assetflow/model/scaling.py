"""
Nondimensionalization
Rescales prices by the liquidity value, cash by M0 and shares by N0
"""

from dataclasses import dataclass

import numpy as np

from assetflow.model.types import ModelConfig, StateVector


@dataclass(frozen=True)
class Scales:
    liquidity: np.ndarray  # L_i = M0 / N0_i, price units
    cash: float  # M0
    shares: np.ndarray  # N0_i

    def scale_state(self, state: StateVector) -> StateVector:
        return StateVector(state.P / self.liquidity, state.M / self.cash,
                           state.N / self.shares[None, :], state.Z1, state.Z2)

    def unscale_state(self, state: StateVector) -> StateVector:
        return StateVector(state.P * self.liquidity, state.M * self.cash,
                           state.N * self.shares[None, :], state.Z1, state.Z2)

    def unscale_flat(self, x: np.ndarray, m: int, n: int) -> np.ndarray:
        return self.unscale_state(StateVector.from_flat(x, m, n)).flatten()


def nondimensionalize(cfg: ModelConfig):
    """
    Rescaled config in which total cash and every share total equal 1

    Rates, time scales and sentiment parameters are unchanged; the
    fundamental values become Pa / L. Returns (scaled config, Scales).
    """
    scales = Scales(liquidity=cfg.liquidity_values(), cash=cfg.M0, shares=np.array(cfg.N0))
    scaled = cfg.replace(
        Pa=cfg.Pa / scales.liquidity,
        M0=1.0,
        N0=np.ones(cfg.m),
        name=f"{cfg.name}-rescaled" if cfg.name else "rescaled",
    )
    return scaled, scales
