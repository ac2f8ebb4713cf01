"""
Market Analysis
Excursions, excursion surfaces, contagion matrices and wealth decomposition
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from assetflow.analysis.equilibrium import EquilibriumPoint, fundamental_equilibrium
from assetflow.common import config
from assetflow.common.errors import AssetFlowError, PreconditionError, UndefinedIndexError
from assetflow.common.parallel import run_jobs
from assetflow.integration.integrator import IntegratorSettings, Trajectory, integrate
from assetflow.model.dynamics import make_rhs
from assetflow.model.parameters import ParameterPath
from assetflow.model.types import ModelConfig

logger = logging.getLogger(__name__)


def excursion(traj: Trajectory, asset: int = 0, reference: Optional[float] = None) -> float:
    """Largest absolute deviation of a price from reference, by default its initial value"""
    if len(traj) == 0:
        raise PreconditionError("empty trajectory")
    prices = traj.prices[:, asset]
    origin = prices[0] if reference is None else reference
    return float(np.max(np.abs(prices - origin)))


def price_correlation(prices: np.ndarray) -> np.ndarray:
    """Correlation of price columns; flat columns correlate 0 with the rest"""
    m = prices.shape[1]
    centred = prices - prices.mean(axis=0)
    std = centred.std(axis=0)
    rho = np.eye(m)
    for i, k in itertools.combinations(range(m), 2):
        if std[i] > 0 and std[k] > 0:
            value = float(np.mean(centred[:, i] * centred[:, k]) / (std[i] * std[k]))
            rho[i, k] = rho[k, i] = min(1.0, max(-1.0, value))
    return rho


@dataclass(frozen=True, eq=False)
class ExcursionReport:
    perturbation: np.ndarray
    excursions: np.ndarray
    correlation: np.ndarray

    @property
    def E_max(self) -> float:
        return float(self.excursions.max())

    @property
    def E_agg(self) -> float:
        return float(np.sqrt(np.sum(self.excursions ** 2)))

    def to_dict(self) -> Dict:
        return {
            'perturbation': self.perturbation.tolist(),
            'excursions': self.excursions.tolist(),
            'E_max': self.E_max,
            'E_agg': self.E_agg,
            'correlation': self.correlation.tolist(),
        }


def excursion_report(traj: Trajectory, perturbation: Sequence[float],
                     transient_fraction: float = config.TRANSIENT_FRACTION,
                     reference: Optional[Sequence[float]] = None) -> ExcursionReport:
    origins = [None] * traj.cfg.m if reference is None else [float(v) for v in reference]
    excursions = np.array([excursion(traj, i, origins[i]) for i in range(traj.cfg.m)])
    t_cut = traj.times[0] + transient_fraction * (traj.times[-1] - traj.times[0])
    late = traj.window(t_cut)
    return ExcursionReport(perturbation=np.asarray(perturbation, dtype=float), excursions=excursions,
                           correlation=price_correlation(late.prices))


@dataclass(frozen=True, eq=False)
class SurfaceNode:
    perturbation: np.ndarray
    report: Optional[ExcursionReport] = None
    error: Optional[str] = None

    @property
    def is_origin(self) -> bool:
        return bool(np.all(self.perturbation == 0))


@dataclass(frozen=True, eq=False)
class ExcursionSurface:
    nodes: List[SurfaceNode]
    summary: Dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for node in self.nodes:
            row = {f"dP_{i + 1}": float(v) for i, v in enumerate(node.perturbation)}
            if node.report is not None:
                for i, value in enumerate(node.report.excursions):
                    row[f"E_{i + 1}"] = float(value)
                row['E_max'] = node.report.E_max
                row['E_agg'] = node.report.E_agg
            row['error'] = node.error or ""
            rows.append(row)
        return pd.DataFrame(rows)


def _surface_summary(nodes: List[SurfaceNode], m: int) -> Dict:
    usable = [node for node in nodes if node.report is not None and not node.is_origin]
    summary: Dict = {'nodes': len(nodes), 'used': len(usable), 'failed': sum(1 for n in nodes if n.error)}
    per_asset = []
    for i in range(m):
        values = np.array([node.report.excursions[i] for node in usable])
        if values.size == 0:
            per_asset.append({'asset': i, 'mean': None, 'median': None, 'stddev': None, 'flatness': None})
            continue
        mean = float(values.mean())
        std = float(values.std())
        per_asset.append({
            'asset': i,
            'mean': mean,
            'median': float(np.median(values)),
            'stddev': std,
            'flatness': std / mean if mean > 0 else None,
        })
    summary['assets'] = per_asset
    saturation = []
    for node in usable:
        magnitude = float(np.linalg.norm(node.perturbation))
        saturation.append({'magnitude': magnitude, 'E_max': node.report.E_max,
                           'per_unit': node.report.E_max / magnitude})
    summary['saturation'] = sorted(saturation, key=lambda row: row['magnitude'])
    return summary


def excursion_surface(cfg: ModelConfig, base: EquilibriumPoint, grid1: Optional[Sequence[float]] = None,
                      grid2: Optional[Sequence[float]] = None, horizon: float = config.EXCURSION_HORIZON,
                      settings: Optional[IntegratorSettings] = None,
                      workers: Optional[int] = None) -> ExcursionSurface:
    """
    Excursions from the base equilibrium perturbed over a grid of price offsets

    The first two assets are perturbed by absolute offsets (price units);
    single-asset models use grid1 only. Excursions are measured from the
    base equilibrium prices, not from the perturbed start. Summary
    statistics skip the origin node.
    """
    grid1 = list(config.EXCURSION_GRID if grid1 is None else grid1)
    grid2 = list(config.EXCURSION_GRID if grid2 is None else grid2)
    axes = [grid1] if cfg.m == 1 else [grid1, grid2]
    offsets = [np.array(combo + (0.0,) * (cfg.m - len(combo))) for combo in itertools.product(*axes)]
    base_prices = np.array(base.state.P)
    for offset in offsets:
        if np.any(base_prices + offset <= 0):
            raise PreconditionError(f"perturbation {offset.tolist()} makes a price non-positive")
    settings = (settings or IntegratorSettings()).with_horizon(horizon)
    total = len(offsets)

    def _node(item) -> SurfaceNode:
        idx, offset = item
        try:
            traj = integrate(cfg, base.state.with_prices(base_prices + offset), settings)
        except AssetFlowError as exc:
            logger.warning(f"excursion node {idx + 1}/{total} {offset.tolist()} failed: {exc.message}")
            return SurfaceNode(perturbation=offset, error=exc.message)
        logger.debug(f"excursion node {idx + 1}/{total} done")
        return SurfaceNode(perturbation=offset, report=excursion_report(traj, offset, reference=base_prices))

    nodes = run_jobs(_node, list(enumerate(offsets)), workers=workers, label="excursion node")
    summary = _surface_summary(nodes, cfg.m)
    logger.info(f"excursion surface: {total} nodes, {summary['failed']} failed")
    return ExcursionSurface(nodes=nodes, summary=summary)


def asymmetry_index(gamma: np.ndarray, i: int, j: int) -> float:
    """(Γ[i][j] − Γ[j][i]) / (Γ[i][j] + Γ[j][i])"""
    gamma = np.asarray(gamma, dtype=float)
    forward, backward = gamma[i, j], gamma[j, i]
    denominator = forward + backward
    if not denominator > 0:
        raise UndefinedIndexError(f"asymmetry index undefined: Γ[{i}][{j}] + Γ[{j}][{i}] = {denominator}")
    return float((forward - backward) / denominator)


@dataclass(frozen=True, eq=False)
class ContagionReport:
    gamma: np.ndarray
    shock: float
    shock_sizes: np.ndarray
    baseline: np.ndarray
    horizon: float
    window: float

    @property
    def off_diagonal_total(self) -> float:
        return float(self.gamma.sum() - np.trace(self.gamma))

    @property
    def asymmetry(self) -> Optional[float]:
        if self.gamma.shape != (2, 2):
            return None
        try:
            return asymmetry_index(self.gamma, 0, 1)
        except UndefinedIndexError:
            return None

    def to_dict(self) -> Dict:
        return {
            'gamma': self.gamma.tolist(),
            'asymmetry': self.asymmetry,
            'shock': self.shock,
            'shock_sizes': self.shock_sizes.tolist(),
            'baseline': self.baseline.tolist(),
            'horizon': self.horizon,
            'window': self.window,
        }


def _late_deviation(traj: Trajectory, Pa: np.ndarray, window: float) -> np.ndarray:
    t_cut = traj.times[-1] - window * (traj.times[-1] - traj.times[0])
    late = traj.window(t_cut)
    return np.max(np.abs(late.prices - Pa[None, :]), axis=0)


def contagion_matrix(cfg: ModelConfig, base: EquilibriumPoint, shock: float = config.CONTAGION_SHOCK,
                     horizon: float = config.CONTAGION_HORIZON, window: float = config.CONTAGION_WINDOW,
                     settings: Optional[IntegratorSettings] = None,
                     workers: Optional[int] = None) -> ContagionReport:
    """
    Late-window cross-asset response per unit price shock

    Γ[i][j] is the late-window max of |P_i − Pa_i| after shocking asset j by
    shock·Pa_j, minus the same statistic of the unshocked run, divided by
    the shock size and floored at zero. The diagonal is zero.
    """
    if not shock > 0:
        raise PreconditionError(f"shock fraction must be positive, got {shock}")
    if not 0 < window <= 1:
        raise PreconditionError(f"window must lie in (0, 1], got {window}")
    settings = (settings or IntegratorSettings()).with_horizon(horizon)
    sizes = shock * cfg.Pa
    base_prices = np.array(base.state.P)

    def _run(j: Optional[int]) -> np.ndarray:
        prices = base_prices.copy()
        if j is not None:
            prices[j] += sizes[j]
        traj = integrate(cfg, base.state.with_prices(prices), settings)
        return _late_deviation(traj, cfg.Pa, window)

    runs = run_jobs(_run, [None] + list(range(cfg.m)), workers=workers, label="contagion run")
    baseline = runs[0]
    gamma = np.zeros((cfg.m, cfg.m))
    for j in range(cfg.m):
        gamma[:, j] = np.maximum(0.0, runs[j + 1] - baseline) / sizes[j]
    np.fill_diagonal(gamma, 0.0)
    logger.info(f"contagion matrix: {gamma.tolist()}")
    return ContagionReport(gamma=gamma, shock=shock, shock_sizes=sizes, baseline=baseline,
                           horizon=horizon, window=window)


def contagion_sensitivity(cfg: ModelConfig, path, values: Sequence[float], cash=None,
                          aliases: Optional[Dict[str, str]] = None, **contagion_kwargs) -> List[Dict]:
    """
    Contagion at several values of one parameter

    Each row reports the off-diagonal total and its reduction relative to
    the configured value of the parameter.
    """
    path = path if isinstance(path, ParameterPath) else ParameterPath.parse(path, aliases)
    base_value = path.read(cfg)
    reference = contagion_matrix(cfg, fundamental_equilibrium(cfg, cash), **contagion_kwargs)
    rows = []
    for value in values:
        cfg_v = path.apply(cfg, value)
        report = contagion_matrix(cfg_v, fundamental_equilibrium(cfg_v, cash), **contagion_kwargs)
        reduction = (1.0 - report.off_diagonal_total / reference.off_diagonal_total
                     if reference.off_diagonal_total > 0 else None)
        rows.append({
            'parameter': path.text,
            'value': float(value),
            'base_value': base_value,
            'gamma': report.gamma.tolist(),
            'off_diagonal_total': report.off_diagonal_total,
            'reduction': reduction,
        })
    return rows


def amplification_factor(cfg: ModelConfig, path, cash=None, aliases: Optional[Dict[str, str]] = None,
                         **contagion_kwargs) -> float:
    """Off-diagonal contagion at the configured gain over contagion with the gain switched off"""
    path = path if isinstance(path, ParameterPath) else ParameterPath.parse(path, aliases)
    with_gain = contagion_matrix(cfg, fundamental_equilibrium(cfg, cash), **contagion_kwargs)
    cfg_off = path.apply(cfg, 0.0)
    without = contagion_matrix(cfg_off, fundamental_equilibrium(cfg_off, cash), **contagion_kwargs)
    if not without.off_diagonal_total > 0:
        raise UndefinedIndexError(f"contagion vanishes with {path.text} = 0")
    return with_gain.off_diagonal_total / without.off_diagonal_total


@dataclass(frozen=True, eq=False)
class WealthSeries:
    """
    Per-group wealth and the terms of its time derivative

    dW/dt = trading + share_value + capital_gain with trading = dM/dt,
    share_value = Σ_i P·dN/dt and capital_gain = Σ_i N·dP/dt.
    """

    times: np.ndarray
    wealth: np.ndarray
    trading: np.ndarray
    share_value: np.ndarray
    capital_gain: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.wealth.sum(axis=1)

    @property
    def derivative(self) -> np.ndarray:
        return self.trading + self.share_value + self.capital_gain

    def finite_difference_error(self) -> float:
        """RMS gap between the decomposition and a numerical dW/dt, relative to RMS dW/dt"""
        numerical = np.gradient(self.wealth, self.times, axis=0, edge_order=2)
        scale = np.sqrt(np.mean(numerical[1:-1] ** 2))
        gap = np.sqrt(np.mean((numerical[1:-1] - self.derivative[1:-1]) ** 2))
        return float(gap / scale) if scale > 0 else float(gap)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({'time': self.times})
        for j in range(self.wealth.shape[1]):
            frame[f"W_{j + 1}"] = self.wealth[:, j]
            frame[f"trading_{j + 1}"] = self.trading[:, j]
            frame[f"share_value_{j + 1}"] = self.share_value[:, j]
            frame[f"capital_gain_{j + 1}"] = self.capital_gain[:, j]
        return frame


def wealth_series(traj: Trajectory) -> WealthSeries:
    cfg = traj.cfg
    layout = cfg.layout
    fun = make_rhs(cfg)
    derivatives = np.array([fun(0.0, x) for x in traj.states])
    dP = derivatives[:, layout.P]
    dM = derivatives[:, layout.M]
    dN = derivatives[:, layout.N].reshape(len(traj), cfg.n, cfg.m)
    prices = traj.prices
    return WealthSeries(
        times=traj.times,
        wealth=traj.wealth(),
        trading=dM,
        share_value=np.einsum('kji,ki->kj', dN, prices),
        capital_gain=np.einsum('kji,ki->kj', traj.shares, dP),
    )
