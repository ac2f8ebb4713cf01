"""
Transition Rates
Buying and selling rates driven by trend and value sentiments
"""

import warnings

import numpy as np

from assetflow.common.errors import InvalidStateError, PreconditionError, RateBudgetWarning
from assetflow.model.types import ModelConfig, RateSnapshot, SellRuleKind


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise InvalidStateError("sentiments must be finite")


def buy_rates(cfg: ModelConfig, Z1: np.ndarray, Z2: np.ndarray) -> np.ndarray:
    """
    All buying rates k[j][i] = clamp(a + b·tanh(Σ_l α[j][i][l]·Z1[j][l] + Σ_l β[j][i][l]·Z2[j][l]), 0, 1)
    """
    Z1 = np.asarray(Z1, dtype=float)
    Z2 = np.asarray(Z2, dtype=float)
    _check_finite(Z1, Z2)
    drive = np.einsum('jil,jl->ji', cfg.alpha, Z1) + np.einsum('jil,jl->ji', cfg.beta, Z2)
    k = np.clip(cfg.a + cfg.b * np.tanh(drive), 0.0, 1.0)
    budget = k.sum(axis=1)
    if np.any(budget > 1.0 + 1e-12):
        if cfg.rescale_buy_rates:
            scale = np.where(budget > 1.0, 1.0 / budget, 1.0)
            k = k * scale[:, None]
        else:
            warnings.warn("buy rates of a group sum above 1 across assets", RateBudgetWarning, stacklevel=2)
    return k


def sell_rates(cfg: ModelConfig, Z1: np.ndarray, Z2: np.ndarray, P: np.ndarray,
               k: np.ndarray = None) -> np.ndarray:
    """All selling rates k̃[j][i] under the configured rule"""
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0):
        raise PreconditionError(f"prices must be positive, got {P.tolist()}")
    rule = cfg.sell_rule
    if rule.kind == SellRuleKind.TANH:
        Z1 = np.asarray(Z1, dtype=float)
        Z2 = np.asarray(Z2, dtype=float)
        _check_finite(Z1, Z2)
        raw = rule['atilde'] + rule['btilde'] * np.tanh(rule['gamma'] * Z1 + rule['delta'] * Z2)
    elif rule.kind == SellRuleKind.LINEAR_VALUE:
        raw = rule['ctilde'] + rule['dtilde'] * (P / cfg.Pa - 1.0)[None, :]
    else:
        raw = 1.0 - (buy_rates(cfg, Z1, Z2) if k is None else k)
    return np.clip(raw, 0.0, 1.0)


def buy_rate(cfg: ModelConfig, j: int, i: int, Z1: np.ndarray, Z2: np.ndarray) -> float:
    """Buying rate of group j for asset i"""
    _check_index(cfg, j, i)
    return float(buy_rates(cfg, Z1, Z2)[j, i])


def sell_rate(cfg: ModelConfig, j: int, i: int, Z1: np.ndarray, Z2: np.ndarray, P: np.ndarray) -> float:
    """Selling rate of group j for asset i"""
    _check_index(cfg, j, i)
    return float(sell_rates(cfg, Z1, Z2, P)[j, i])


def rate_snapshot(cfg: ModelConfig, P, M, N, Z1, Z2) -> RateSnapshot:
    k = buy_rates(cfg, Z1, Z2)
    ktilde = sell_rates(cfg, Z1, Z2, P, k=k)
    S = (k * np.asarray(M)[:, None]).sum(axis=0)
    T = (ktilde * np.asarray(N)).sum(axis=0) * np.asarray(P)
    return RateSnapshot(k=k, ktilde=ktilde, S=S, T=T)


def _check_index(cfg: ModelConfig, j: int, i: int):
    if not (0 <= j < cfg.n and 0 <= i < cfg.m):
        raise IndexError(f"group {j} / asset {i} out of range for n={cfg.n}, m={cfg.m}")
