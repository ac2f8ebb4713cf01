"""
Equilibria
Fundamental equilibria, the general equilibrium conditions and manifold sweeps over cash distributions
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from assetflow.common import config
from assetflow.common.errors import (
    AssetFlowError, CalibrationInfeasibleError, ConvergenceError, PreconditionError, ZeroSellRateError,
)
from assetflow.common.parallel import run_jobs
from assetflow.model.dynamics import rhs_flat
from assetflow.model.rates import buy_rates, sell_rates
from assetflow.model.types import ModelConfig, StateVector

logger = logging.getLogger(__name__)


class EquilibriumKind(str, Enum):
    FUNDAMENTAL = "fundamental"
    MANIFOLD = "manifold"


@dataclass(frozen=True, eq=False)
class EquilibriumPoint:
    state: StateVector
    residual: float
    kind: EquilibriumKind
    cash: np.ndarray
    iterations: int = 0
    balance: Dict[str, float] = field(default_factory=dict)

    @property
    def prices(self) -> np.ndarray:
        return self.state.P

    def to_dict(self) -> Dict:
        return {
            'kind': self.kind.value,
            'residual': self.residual,
            'cash': self.cash.tolist(),
            'iterations': self.iterations,
            'balance': dict(self.balance),
            'state': self.state.to_dict(),
        }


def _check_cash(cfg: ModelConfig, cash) -> np.ndarray:
    cash = cfg.equal_cash_split() if cash is None else np.asarray(cash, dtype=float)
    if cash.shape != (cfg.n,):
        raise PreconditionError(f"cash distribution needs {cfg.n} entries, got {cash.shape}")
    if np.any(cash < 0):
        raise PreconditionError("cash distribution must be non-negative")
    if abs(cash.sum() - cfg.M0) > config.CASH_TOL * max(1.0, cfg.M0):
        raise PreconditionError(f"cash distribution sums to {cash.sum():.12g}, expected M0={cfg.M0:.12g}")
    return cash


def value_sentiment_at(cfg: ModelConfig, P: np.ndarray) -> np.ndarray:
    """Equilibrium value sentiment q2·(1 − P/Pa) for every group"""
    return cfg.q2 * (1.0 - np.asarray(P) / cfg.Pa)[None, :]


def balance_checks(cfg: ModelConfig, state: StateVector) -> Dict[str, float]:
    """
    Aggregated forms of the per-(group, asset) balance

    Summing over groups gives demand = supply per asset; summing over
    assets gives zero net cash flow per group.
    """
    k = buy_rates(cfg, state.Z1, state.Z2)
    ktilde = sell_rates(cfg, state.Z1, state.Z2, state.P, k=k)
    flow = k * state.M[:, None] - ktilde * state.N * state.P[None, :]
    return {
        'asset_imbalance': float(np.max(np.abs(flow.sum(axis=0)))),
        'group_imbalance': float(np.max(np.abs(flow.sum(axis=1)))),
    }


def _finish(cfg: ModelConfig, state: StateVector, kind: EquilibriumKind, cash: np.ndarray,
            iterations: int = 0) -> EquilibriumPoint:
    residual = float(np.max(np.abs(rhs_flat(cfg, state.flatten()))))
    balance = balance_checks(cfg, state)
    logger.debug(f"{kind.value} equilibrium: residual={residual:.3e}, balance={balance}")
    return EquilibriumPoint(state=state, residual=residual, kind=kind, cash=np.array(cash),
                            iterations=iterations, balance=balance)


def fundamental_equilibrium(cfg: ModelConfig, cash: Optional[Sequence[float]] = None,
                            tol: float = config.CALIBRATION_TOL) -> EquilibriumPoint:
    """
    Equilibrium at P = Pa with vanishing sentiments

    Share holdings follow from the calibration condition
    k(0,0)·M = k̃(0,0)·N·Pa and must add up to N0.

    Args:
        cfg: model configuration
        cash: cash per group, defaults to an equal split of M0
        tol: relative tolerance on the share totals

    Returns:
        EquilibriumPoint of kind FUNDAMENTAL
    """
    M = _check_cash(cfg, cash)
    zeros = np.zeros((cfg.n, cfg.m))
    k = buy_rates(cfg, zeros, zeros)
    ktilde = sell_rates(cfg, zeros, zeros, cfg.Pa, k=k)
    if np.any(ktilde <= 0):
        j, i = (int(v) for v in np.argwhere(ktilde <= 0)[0])
        raise ZeroSellRateError(j, i)

    N = k * M[:, None] / (ktilde * cfg.Pa[None, :])
    mismatch = N.sum(axis=0) - cfg.N0
    if np.any(np.abs(mismatch) > tol * np.maximum(1.0, cfg.N0)):
        raise CalibrationInfeasibleError(mismatch)
    state = StateVector(cfg.Pa, M, N, zeros, zeros)
    return _finish(cfg, state, EquilibriumKind.FUNDAMENTAL, M)


class ManifoldSolver:
    """
    Damped Newton on the general equilibrium conditions for a fixed cash distribution

    Unknowns are the prices and the holdings of every group but the last;
    the last group's holdings follow from share conservation.
    """

    def __init__(self, cfg: ModelConfig, cash: np.ndarray, tol: float = config.NEWTON_TOL,
                 max_iter: int = config.NEWTON_MAX_ITER, max_halvings: int = config.NEWTON_MAX_HALVINGS,
                 fd_step: float = config.FD_STEP):
        self.cfg = cfg
        self.cash = cash
        self.tol = tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.fd_step = fd_step

    def pack(self, P: np.ndarray, N: np.ndarray) -> np.ndarray:
        return np.concatenate([P, N[:-1].ravel()])

    def unpack(self, u: np.ndarray):
        m, n = self.cfg.m, self.cfg.n
        P = u[:m]
        partial = u[m:].reshape(n - 1, m)
        N = np.vstack([partial, (self.cfg.N0 - partial.sum(axis=0))[None, :]])
        return P, N

    def state(self, u: np.ndarray) -> StateVector:
        P, N = self.unpack(u)
        zeros = np.zeros_like(N)
        return StateVector(P, self.cash, N, zeros, value_sentiment_at(self.cfg, P))

    def feasible(self, u: np.ndarray) -> bool:
        P, N = self.unpack(u)
        return bool(np.all(np.isfinite(u)) and np.all(P > 0) and np.all(N >= 0))

    def residual(self, u: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        P, N = self.unpack(u)
        Z1 = np.zeros_like(N)
        Z2 = value_sentiment_at(cfg, P)
        k = buy_rates(cfg, Z1, Z2)
        ktilde = sell_rates(cfg, Z1, Z2, P, k=k)
        return (k * self.cash[:, None] - ktilde * N * P[None, :]).ravel()

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        size = u.size
        J = np.empty((size, size))
        for col in range(size):
            h = self.fd_step * max(1.0, abs(u[col]))
            forward, backward = u.copy(), u.copy()
            forward[col] += h
            backward[col] -= h
            if backward[col] <= 0 and col < self.cfg.m:
                J[:, col] = (self.residual(forward) - self.residual(u)) / h
            else:
                J[:, col] = (self.residual(forward) - self.residual(backward)) / (2 * h)
        return J

    def solve(self, u0: np.ndarray):
        u = np.array(u0, dtype=float)
        if not self.feasible(u):
            raise PreconditionError("initial guess needs positive prices and non-negative holdings")
        F = self.residual(u)
        norm = float(np.max(np.abs(F)))
        for iteration in range(1, self.max_iter + 1):
            if norm < self.tol:
                return u, norm, iteration - 1
            J = self.jacobian(u)
            try:
                delta = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(J, -F, rcond=None)[0]
            step = 1.0
            for _ in range(self.max_halvings + 1):
                trial = u + step * delta
                if self.feasible(trial):
                    F_trial = self.residual(trial)
                    trial_norm = float(np.max(np.abs(F_trial)))
                    if trial_norm < norm:
                        break
                step *= 0.5
            else:
                raise ConvergenceError(f"line search stalled after {self.max_halvings} halvings",
                                       best_residual=norm, best_point=self.state(u))
            u, F, norm = trial, F_trial, trial_norm
            logger.debug(f"newton iteration {iteration}: residual={norm:.3e}, damping={step:g}")
        if norm < self.tol:
            return u, norm, self.max_iter
        raise ConvergenceError(f"no convergence after {self.max_iter} iterations (residual {norm:.3e})",
                               best_residual=norm, best_point=self.state(u))


def default_guess(cfg: ModelConfig, cash: np.ndarray) -> StateVector:
    """Prices at the liquidity value, holdings proportional to cash"""
    P = cfg.liquidity_values()
    N = np.outer(cash / cfg.M0, cfg.N0)
    zeros = np.zeros_like(N)
    return StateVector(P, cash, N, zeros, zeros)


def solve_manifold_point(cfg: ModelConfig, cash: Sequence[float],
                         initial_guess: Optional[StateVector] = None,
                         tol: float = config.NEWTON_TOL,
                         max_iter: int = config.NEWTON_MAX_ITER) -> EquilibriumPoint:
    """
    Solve k·M = k̃·N·P for every group and asset at fixed cash

    Args:
        cfg: model configuration
        cash: cash per group summing to M0
        initial_guess: starting prices and holdings (defaults to default_guess)
        tol: max-norm tolerance on the balance residual
        max_iter: Newton iteration cap

    Returns:
        EquilibriumPoint of kind MANIFOLD with Z1 = 0 and Z2 at its equilibrium value
    """
    M = _check_cash(cfg, cash)
    guess = initial_guess if initial_guess is not None else default_guess(cfg, M)
    if np.any(guess.P <= 0):
        raise PreconditionError("initial guess needs positive prices")
    solver = ManifoldSolver(cfg, M, tol=tol, max_iter=max_iter)
    N_guess = np.clip(np.array(guess.N), 0.0, None)
    N_guess[-1] = cfg.N0 - N_guess[:-1].sum(axis=0)
    if np.any(N_guess[-1] < 0):
        N_guess = np.outer(M / cfg.M0, cfg.N0)
    u, norm, iterations = solver.solve(solver.pack(np.array(guess.P), N_guess))
    return _finish(cfg, solver.state(u), EquilibriumKind.MANIFOLD, M, iterations)


def simplex_grid(n: int, resolution: int, total: float) -> np.ndarray:
    """Interior barycentric grid: cash vectors with entries (c_j / resolution)·total, c_j ≥ 1"""
    if resolution < n:
        raise PreconditionError(f"resolution {resolution} leaves no interior node for n={n}")
    nodes = []
    for cuts in itertools.combinations(range(1, resolution), n - 1):
        bounds = (0,) + cuts + (resolution,)
        nodes.append([bounds[j + 1] - bounds[j] for j in range(n)])
    return np.array(nodes, dtype=float) * (total / resolution)


def cash_nodes(cfg: ModelConfig, grid: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """Turn a grid of first-group cash (n = 2) or full cash vectors into (nodes, n) cash vectors"""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        if cfg.n != 2:
            raise PreconditionError("a scalar cash grid needs n = 2; pass full cash vectors otherwise")
        if np.any(grid < 0) or np.any(grid > cfg.M0):
            raise PreconditionError("first-group cash must lie in [0, M0]")
        return np.column_stack([grid, cfg.M0 - grid])
    if grid.ndim != 2 or grid.shape[1] != cfg.n:
        raise PreconditionError(f"cash grid must have shape (nodes, {cfg.n})")
    if np.any(np.abs(grid.sum(axis=1) - cfg.M0) > config.CASH_TOL * max(1.0, cfg.M0)):
        raise PreconditionError("every cash grid node must sum to M0")
    return grid


def default_manifold_grid(cfg: ModelConfig, points: int = 50) -> np.ndarray:
    if cfg.n == 2:
        return np.linspace(0.01, 0.99, points) * cfg.M0
    resolution = cfg.n
    while len(simplex_grid(cfg.n, resolution + 1, cfg.M0)) <= points:
        resolution += 1
    return simplex_grid(cfg.n, resolution, cfg.M0)


@dataclass(frozen=True, eq=False)
class ManifoldNode:
    cash: np.ndarray
    point: Optional[EquilibriumPoint] = None
    classification: Optional[str] = None
    leading: float = float('nan')
    error: Optional[str] = None

    @property
    def stable(self) -> bool:
        return self.classification == "Stable"


def manifold_scan(cfg: ModelConfig, grid=None, initial_guess: Optional[StateVector] = None,
                  classify: bool = True, workers: Optional[int] = None) -> List[ManifoldNode]:
    """
    Sweep the equilibrium manifold by continuation over cash distributions

    Nodes are solved in grid order, each warm-started from the previous
    converged point; failed nodes are recorded and the sweep continues.
    Stability of the converged points is then classified concurrently.
    """
    from assetflow.analysis.spectral import jacobian_full, spectrum_report

    nodes = cash_nodes(cfg, default_manifold_grid(cfg) if grid is None else grid)
    guess = initial_guess
    solved: List[ManifoldNode] = []
    for idx, cash in enumerate(nodes):
        try:
            point = solve_manifold_point(cfg, cash, initial_guess=guess)
            solved.append(ManifoldNode(cash=cash, point=point))
            guess = point.state
        except AssetFlowError as exc:
            logger.warning(f"manifold node {idx + 1}/{len(nodes)} (cash={cash.tolist()}) failed: {exc.message}")
            solved.append(ManifoldNode(cash=cash, error=exc.message))
        logger.debug(f"manifold node {idx + 1}/{len(nodes)} solved")

    if not classify:
        return solved

    def _classify(node: ManifoldNode) -> ManifoldNode:
        if node.point is None:
            return node
        try:
            report = spectrum_report(jacobian_full(cfg, node.point))
        except AssetFlowError as exc:
            return ManifoldNode(cash=node.cash, point=node.point, error=exc.message)
        return ManifoldNode(cash=node.cash, point=node.point, classification=report.classification,
                            leading=report.leading)

    classified = run_jobs(_classify, solved, workers=workers, label="manifold node")
    stable = sum(1 for node in classified if node.stable)
    logger.info(f"manifold scan: {len(classified)} nodes, {stable} stable")
    return classified


def manifold_frame(cfg: ModelConfig, nodes: List[ManifoldNode]) -> pd.DataFrame:
    rows = []
    for node in nodes:
        row = {f"M_{j + 1}": float(node.cash[j]) for j in range(cfg.n)}
        prices = node.point.prices if node.point is not None else np.full(cfg.m, np.nan)
        for i in range(cfg.m):
            row[f"P_eq_{i + 1}"] = float(prices[i])
        row['residual'] = node.point.residual if node.point is not None else np.nan
        row['stable'] = int(node.stable)
        row['leading_re'] = node.leading
        row['error'] = node.error or ""
        rows.append(row)
    return pd.DataFrame(rows)
