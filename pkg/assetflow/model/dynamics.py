"""
Model Dynamics
Right-hand side of the price, cash, share and sentiment equations
"""

from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from assetflow.common import config
from assetflow.common.errors import InvalidStateError, SingularSupplyError
from assetflow.model.rates import buy_rates, sell_rates
from assetflow.model.types import ExecutionMode, ModelConfig, StateVector


def executed_flows(cfg: ModelConfig, P, M, N, Z1, Z2) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Cash volumes actually traded per (group, asset)

    Returns:
        (buys, sells, S, T): buys and sells in cash units with shape (n, m),
        plus the unrationed demand and supply per asset
    """
    k = buy_rates(cfg, Z1, Z2)
    ktilde = sell_rates(cfg, Z1, Z2, P, k=k)
    buys = k * M[:, None]
    sells = ktilde * N * P[None, :]
    S = buys.sum(axis=0)
    T = sells.sum(axis=0)
    low = T <= config.SUPPLY_FLOOR
    if np.any(low):
        asset = int(np.argmax(low))
        raise SingularSupplyError(asset, float(T[asset]))
    if cfg.exec_mode == ExecutionMode.RATIONED_CLEARING:
        V = np.minimum(S, T)
        buy_scale = np.divide(V, S, out=np.zeros_like(S), where=S > 0)
        buys = buys * buy_scale[None, :]
        sells = sells * (V / T)[None, :]
    return buys, sells, S, T


def rhs_flat(cfg: ModelConfig, x: np.ndarray) -> np.ndarray:
    """Time derivative of a flat state vector"""
    layout = cfg.layout
    P, M, N, Z1, Z2 = layout.unpack(x)
    if not np.all(np.isfinite(x)):
        raise InvalidStateError("state contains non-finite entries")
    if np.any(P <= 0):
        raise InvalidStateError(f"prices must be positive, got {P.tolist()}")

    buys, sells, S, T = executed_flows(cfg, P, M, N, Z1, Z2)
    dP = (P / cfg.tau) * (S / T - 1.0)
    dM = sells.sum(axis=1) - buys.sum(axis=1)
    dN = (buys - sells) / P[None, :]
    dZ1 = cfg.c1 * cfg.q1 * (dP / P)[None, :] - cfg.c1 * Z1
    dZ2 = cfg.c2 * cfg.q2 * (1.0 - P / cfg.Pa)[None, :] - cfg.c2 * Z2

    out = np.empty_like(x, dtype=float)
    out[layout.P] = dP
    out[layout.M] = dM
    out[layout.N] = dN.ravel()
    out[layout.Z1] = dZ1.ravel()
    out[layout.Z2] = dZ2.ravel()
    return out


def rhs(cfg: ModelConfig, state: StateVector) -> StateVector:
    """Derivative of a StateVector as a StateVector"""
    derivative = rhs_flat(cfg, state.flatten())
    return StateVector.from_flat(derivative, cfg.m, cfg.n)


def make_rhs(cfg: ModelConfig) -> Callable[[float, np.ndarray], np.ndarray]:
    """Autonomous rhs in the f(t, x) form used by the integrator"""
    if not cfg.frozen_holdings:
        def fun(t: float, x: np.ndarray) -> np.ndarray:
            return rhs_flat(cfg, x)

        return fun

    layout = cfg.layout

    def frozen(t: float, x: np.ndarray) -> np.ndarray:
        out = rhs_flat(cfg, x)
        out[layout.M] = 0.0
        out[layout.N] = 0.0
        return out

    return frozen


def cash_imbalance(cfg: ModelConfig, state: StateVector) -> float:
    """Σ_j dM_j/dt; equals Σ_i (T_i − S_i) under AsWritten and 0 under rationing"""
    derivative = rhs(cfg, state)
    return float(derivative.M.sum())


def wealth(cfg: ModelConfig, state: StateVector) -> Tuple[np.ndarray, float]:
    """Per-group wealth W[j] = M[j] + Σ_i N[j][i]·P[i] and the total"""
    W = state.M + state.N @ state.P
    return W, float(W.sum())


@dataclass(frozen=True)
class DriftReport:
    cash: float
    shares: np.ndarray
    cash_path: np.ndarray

    @property
    def max(self) -> float:
        return float(max(self.cash, float(np.max(self.shares, initial=0.0))))

    def to_dict(self) -> Dict:
        return {'cash': self.cash, 'shares': self.shares.tolist(), 'max': self.max}


def drift_monitor(traj) -> DriftReport:
    """Max deviation of Σ_j M from M0 and of Σ_j N[j][i] from N0[i] over a trajectory"""
    cfg = traj.cfg
    cash_total = traj.cash.sum(axis=1)
    cash = np.abs(cash_total - cfg.M0)
    shares = np.abs(traj.shares.sum(axis=1) - cfg.N0[None, :])
    return DriftReport(cash=float(cash.max()), shares=shares.max(axis=0), cash_path=cash_total)
