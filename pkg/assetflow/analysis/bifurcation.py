"""
Bifurcation Analysis
Hopf thresholds by bisection, one-parameter scans and limit-cycle measurements
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from assetflow.analysis.equilibrium import fundamental_equilibrium
from assetflow.analysis.spectral import SpectrumReport, jacobian_full, jacobian_reduced, spectrum_report
from assetflow.common import config
from assetflow.common.errors import (
    AssetFlowError, NonTransversalError, NoSignChangeError, NotHopfError, PreconditionError, WindowTooShortError,
)
from assetflow.common.parallel import run_jobs
from assetflow.integration.integrator import IntegratorSettings, Trajectory, integrate, integrate_to_attractor
from assetflow.model.parameters import ParameterPath
from assetflow.model.types import ModelConfig, StateVector

logger = logging.getLogger(__name__)


def _path(path, aliases: Optional[Dict[str, str]]) -> ParameterPath:
    return path if isinstance(path, ParameterPath) else ParameterPath.parse(path, aliases)


def spectrum_at(cfg: ModelConfig, path: ParameterPath, mu: float, cash=None,
                kind: str = "reduced") -> SpectrumReport:
    """Spectrum at the fundamental equilibrium with the parameter set to mu"""
    cfg_mu = path.apply(cfg, mu)
    eq = fundamental_equilibrium(cfg_mu, cash)
    jac = jacobian_reduced(cfg_mu, eq) if kind == "reduced" else jacobian_full(cfg_mu, eq)
    return spectrum_report(jac)


@dataclass(frozen=True)
class HopfThreshold:
    parameter: str
    mu: float
    eigenvalue: complex
    slope: float  # dRe(λ)/dμ at the crossing
    iterations: int
    bracket: tuple

    @property
    def frequency(self) -> float:
        return abs(self.eigenvalue.imag)

    @property
    def period(self) -> float:
        return 2 * np.pi / self.frequency if self.frequency > 0 else float('inf')

    @property
    def transversal(self) -> bool:
        return bool(np.isfinite(self.slope) and abs(self.slope) > config.TRANSVERSALITY_TOL)

    def to_dict(self) -> Dict:
        return {
            'parameter': self.parameter,
            'threshold': self.mu,
            'eigenvalue': [self.eigenvalue.real, self.eigenvalue.imag],
            'frequency': self.frequency,
            'period': self.period,
            'slope': self.slope,
            'transversal': self.transversal,
            'iterations': self.iterations,
            'bracket': list(self.bracket),
        }


def find_hopf_threshold(cfg: ModelConfig, path, bracket: Sequence[float], tol: float = 1e-4,
                        cash=None, aliases: Optional[Dict[str, str]] = None, kind: str = "reduced",
                        imag_tol: float = config.IMAG_TOL, max_iter: int = 200) -> HopfThreshold:
    """
    Bisect on the leading real part of the Jacobian at the fundamental equilibrium

    Args:
        cfg: base configuration
        path: parameter path or alias
        bracket: (lo, hi) with leading real parts of opposite sign
        tol: bracket width at which bisection stops
        cash: cash split of the fundamental equilibrium
        aliases: preset parameter aliases
        kind: "reduced" or "full" Jacobian

    Returns:
        HopfThreshold at the bracket midpoint

    Raises:
        NoSignChangeError: the bracket does not straddle a crossing
        NotHopfError: the critical eigenvalue is real at the crossing
        NonTransversalError: the leading real part touches zero without crossing it
    """
    path = _path(path, aliases)
    lo, hi = (float(v) for v in bracket)
    if not lo < hi:
        raise PreconditionError(f"bracket must satisfy lo < hi, got [{lo}, {hi}]")
    f_lo = spectrum_at(cfg, path, lo, cash, kind).leading
    f_hi = spectrum_at(cfg, path, hi, cash, kind).leading
    if f_lo * f_hi > 0 or f_lo == f_hi:
        raise NoSignChangeError(f_lo, f_hi)

    iterations = 0
    while hi - lo > tol and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        f_mid = spectrum_at(cfg, path, mid, cash, kind).leading
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        iterations += 1

    mu = 0.5 * (lo + hi)
    report = spectrum_at(cfg, path, mu, cash, kind)
    eigenvalue = report.leading_eigenvalue
    if abs(eigenvalue.imag) < imag_tol:
        raise NotHopfError(mu, eigenvalue)
    delta = max(tol, 1e-6 * max(1.0, abs(mu)))
    slope = (spectrum_at(cfg, path, mu + delta, cash, kind).leading
             - spectrum_at(cfg, path, mu - delta, cash, kind).leading) / (2 * delta)
    threshold = HopfThreshold(parameter=path.text, mu=mu, eigenvalue=eigenvalue, slope=slope,
                              iterations=iterations, bracket=(lo, hi))
    if not threshold.transversal:
        raise NonTransversalError(mu, slope)
    logger.info(f"Hopf threshold for {path.text}: {mu:.6g} (ω={abs(eigenvalue.imag):.4g}, slope={slope:.3g})")
    return threshold


@dataclass(frozen=True)
class CycleMetrics:
    amplitude: float
    period: Optional[float]
    P_max: float
    P_min: float
    peaks: int

    @property
    def oscillating(self) -> bool:
        return self.period is not None

    def to_dict(self) -> Dict:
        return {'amplitude': self.amplitude, 'period': self.period, 'P_max': self.P_max,
                'P_min': self.P_min, 'peaks': self.peaks}


def _refined_peak_times(times: np.ndarray, values: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    refined = []
    for p in peaks:
        if 0 < p < len(values) - 1:
            left, mid, right = values[p - 1], values[p], values[p + 1]
            curvature = left - 2 * mid + right
            offset = 0.5 * (left - right) / curvature if curvature != 0 else 0.0
            dt = times[p + 1] - times[p] if offset >= 0 else times[p] - times[p - 1]
            refined.append(times[p] + offset * dt)
        else:
            refined.append(times[p])
    return np.array(refined)


def signal_metrics(times: np.ndarray, values: np.ndarray, noise_floor: float = config.CYCLE_NOISE_FLOOR,
                   strict: bool = True) -> CycleMetrics:
    """Amplitude and period of a sampled signal"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise PreconditionError("empty signal")
    P_max, P_min = float(values.max()), float(values.min())
    spread = P_max - P_min
    floor = noise_floor * abs(float(values.mean()))
    if spread <= floor:
        return CycleMetrics(amplitude=spread / 2, period=None, P_max=P_max, P_min=P_min, peaks=0)
    peaks, _ = find_peaks(values, prominence=floor)
    if len(peaks) < 3:
        if strict:
            raise WindowTooShortError(len(peaks), spread)
        return CycleMetrics(amplitude=spread / 2, period=None, P_max=P_max, P_min=P_min, peaks=len(peaks))
    peak_times = _refined_peak_times(np.asarray(times, dtype=float), values, peaks)
    return CycleMetrics(amplitude=spread / 2, period=float(np.mean(np.diff(peak_times))),
                        P_max=P_max, P_min=P_min, peaks=len(peaks))


def cycle_metrics(traj: Trajectory, asset: int = 0, noise_floor: float = config.CYCLE_NOISE_FLOOR,
                  strict: bool = True) -> CycleMetrics:
    """
    Limit-cycle amplitude (half peak-to-trough) and mean peak spacing of one price

    Non-oscillatory windows return period None; oscillating windows with
    fewer than three peaks raise WindowTooShortError unless strict is off.
    """
    if not 0 <= asset < traj.cfg.m:
        raise PreconditionError(f"asset index {asset} out of range")
    return signal_metrics(traj.times, traj.prices[:, asset], noise_floor, strict)


def seeded_state(eq_state: StateVector, perturbation: float = config.SEED_PERTURBATION,
                 asset: int = 0) -> StateVector:
    """Equilibrium state with one price raised by a relative perturbation"""
    P = np.array(eq_state.P)
    P[asset] *= 1.0 + perturbation
    return eq_state.with_prices(P)


def scan_horizon(report: SpectrumReport, base_horizon: float,
                 transient_fraction: float = config.TRANSIENT_FRACTION) -> float:
    """Horizon long enough for MIN_CYCLE_PERIODS expected periods after the transient"""
    if report.frequency <= config.IMAG_TOL:
        return base_horizon
    period = 2 * np.pi / report.frequency
    needed = config.MIN_CYCLE_PERIODS * period / (1.0 - transient_fraction)
    return float(min(max(base_horizon, needed), 10 * base_horizon))


@dataclass(frozen=True)
class ScanNode:
    value: float
    leading_re: float = float('nan')
    classification: Optional[str] = None
    amplitude: float = float('nan')
    period: Optional[float] = None
    P_max: float = float('nan')
    P_min: float = float('nan')
    consistent: Optional[bool] = None
    final_state: Optional[StateVector] = field(default=None, compare=False)
    error: Optional[str] = None


@dataclass(frozen=True, eq=False)
class HopfScanResult:
    parameter: str
    grid: np.ndarray
    nodes: List[ScanNode]
    threshold: Optional[HopfThreshold] = None
    note: str = ""

    @property
    def threshold_value(self) -> Optional[float]:
        return None if self.threshold is None else self.threshold.mu

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            'parameter': node.value,
            'leadingRe': node.leading_re,
            'classification': node.classification or "",
            'amplitude': node.amplitude,
            'period': np.nan if node.period is None else node.period,
            'Pmax': node.P_max,
            'Pmin': node.P_min,
            'consistent': '' if node.consistent is None else int(node.consistent),
            'error': node.error or "",
        } for node in self.nodes])

    def threshold_dict(self) -> Dict:
        payload = {'parameter': self.parameter, 'note': self.note}
        if self.threshold is not None:
            payload.update(self.threshold.to_dict())
        else:
            payload['threshold'] = None
        return payload


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise PreconditionError("scan grid must be a non-empty 1-D sequence")
    steps = np.diff(grid)
    if grid.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise PreconditionError("scan grid must be strictly monotone")
    return grid


def bifurcation_scan(cfg: ModelConfig, path, grid, cash=None, horizon: float = config.DEFAULT_SCAN_HORIZON,
                     settings: Optional[IntegratorSettings] = None,
                     perturbation: float = config.SEED_PERTURBATION, asset: int = 0,
                     aliases: Optional[Dict[str, str]] = None, workers: Optional[int] = None,
                     refine: bool = True) -> HopfScanResult:
    """
    One-parameter scan: spectrum, long simulation and cycle metrics per node

    Args:
        cfg: base configuration
        path: parameter path or alias
        grid: monotone parameter values
        cash: cash split of the fundamental equilibrium
        horizon: minimum simulated horizon per node
        settings: integrator settings (sample spacing and tolerances)
        perturbation: relative price seed on the measured asset
        asset: index of the measured asset
        aliases: preset parameter aliases
        workers: concurrent node jobs
        refine: bisect the first sign change of the leading real part

    Returns:
        HopfScanResult in grid order
    """
    path = _path(path, aliases)
    grid = _check_grid(grid)
    base = settings or IntegratorSettings(t_end=horizon)
    total = len(grid)

    def _node(item) -> ScanNode:
        idx, mu = item
        try:
            cfg_mu = path.apply(cfg, mu)
            eq = fundamental_equilibrium(cfg_mu, cash)
            report = spectrum_report(jacobian_reduced(cfg_mu, eq))
        except AssetFlowError as exc:
            logger.warning(f"scan node {idx + 1}/{total} ({path.text}={mu:g}) failed: {exc.message}")
            return ScanNode(value=float(mu), error=exc.message)
        node_settings = base.with_horizon(scan_horizon(report, max(horizon, base.t_end - base.t0)))
        try:
            traj = integrate_to_attractor(cfg_mu, seeded_state(eq.state, perturbation, asset), node_settings)
            metrics = cycle_metrics(traj, asset, strict=False)
        except AssetFlowError as exc:
            logger.warning(f"scan node {idx + 1}/{total} ({path.text}={mu:g}) simulation failed: {exc.message}")
            return ScanNode(value=float(mu), leading_re=report.leading, classification=report.classification,
                            error=exc.message)
        threshold = config.AMPLITUDE_THRESHOLD * cfg_mu.Pa[asset]
        consistent = None
        if report.classification == "Stable":
            consistent = metrics.amplitude < threshold
        elif report.classification == "Unstable":
            consistent = metrics.amplitude > threshold
        logger.info(f"scan node {idx + 1}/{total}: {path.text}={mu:g} {report.classification} "
                    f"amplitude={metrics.amplitude:.4g} period={metrics.period}")
        return ScanNode(value=float(mu), leading_re=report.leading, classification=report.classification,
                        amplitude=metrics.amplitude, period=metrics.period, P_max=metrics.P_max,
                        P_min=metrics.P_min, consistent=consistent, final_state=traj.final_state)

    nodes = run_jobs(_node, list(enumerate(grid)), workers=workers, label="scan node")

    threshold, note = None, "no crossing in range"
    for left, right in zip(nodes, nodes[1:]):
        if not (np.isfinite(left.leading_re) and np.isfinite(right.leading_re)):
            continue
        if np.sign(left.leading_re) != np.sign(right.leading_re):
            lo, hi = sorted((left.value, right.value))
            note = f"sign change between {lo:g} and {hi:g}"
            if refine:
                try:
                    threshold = find_hopf_threshold(cfg, path, (lo, hi), cash=cash)
                except AssetFlowError as exc:
                    note = f"{note}; refinement failed: {exc.message}"
            break
    return HopfScanResult(parameter=path.text, grid=grid, nodes=nodes, threshold=threshold, note=note)


def continuation_scan(cfg: ModelConfig, path, grid, direction: str = "up", cash=None,
                      horizon: float = config.DEFAULT_SCAN_HORIZON, settings: Optional[IntegratorSettings] = None,
                      perturbation: float = config.SEED_PERTURBATION, asset: int = 0,
                      aliases: Optional[Dict[str, str]] = None) -> List[ScanNode]:
    """
    Sequential scan seeding each node from the previous node's final state

    Running it "up" and "down" over the same grid exposes hysteresis,
    which a supercritical Hopf point does not show.
    """
    if direction not in ("up", "down"):
        raise PreconditionError(f"direction must be 'up' or 'down', got {direction!r}")
    path = _path(path, aliases)
    values = np.sort(_check_grid(grid))
    if direction == "down":
        values = values[::-1]
    settings = (settings or IntegratorSettings()).with_horizon(horizon)
    transient = config.TRANSIENT_FRACTION * (settings.t_end - settings.t0)

    nodes: List[ScanNode] = []
    state: Optional[StateVector] = None
    for mu in values:
        try:
            cfg_mu = path.apply(cfg, mu)
            if state is None:
                state = seeded_state(fundamental_equilibrium(cfg_mu, cash).state, perturbation, asset)
            traj = integrate(cfg_mu, state, settings)
            window = traj.window(settings.t0 + transient)
            metrics = cycle_metrics(window, asset, strict=False)
        except AssetFlowError as exc:
            nodes.append(ScanNode(value=float(mu), error=exc.message))
            continue
        state = traj.final_state
        nodes.append(ScanNode(value=float(mu), amplitude=metrics.amplitude, period=metrics.period,
                              P_max=metrics.P_max, P_min=metrics.P_min, final_state=state))
        logger.debug(f"continuation {direction}: {path.text}={mu:g} amplitude={metrics.amplitude:.4g}")
    return nodes


def hysteresis_gap(up: List[ScanNode], down: List[ScanNode]) -> float:
    """Largest amplitude mismatch between up and down scans at shared parameter values"""
    down_by_value = {round(node.value, 12): node for node in down}
    gap = 0.0
    for node in up:
        other = down_by_value.get(round(node.value, 12))
        if other is None or not (np.isfinite(node.amplitude) and np.isfinite(other.amplitude)):
            continue
        gap = max(gap, abs(node.amplitude - other.amplitude))
    return gap
