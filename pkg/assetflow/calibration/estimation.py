"""
Parameter Estimation
Nonlinear least squares and simulated maximum likelihood fits of model prices to observed series
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import expit, logit
from sklearn.neighbors import KernelDensity

from assetflow.common import config
from assetflow.common.errors import (
    AssetFlowError, ConfigError, DensityFloorWarning, EstimationError, PreconditionError,
)
from assetflow.integration.integrator import IntegratorSettings, integrate
from assetflow.model.parameters import ParameterPath
from assetflow.model.types import ModelConfig, StateVector

logger = logging.getLogger(__name__)

LOSSES = ("nls", "sml")


@dataclass(frozen=True)
class FreeParameter:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise PreconditionError(f"bounds of {self.name} must be finite with lo < hi, got [{self.lo}, {self.hi}]")

    def to_unbounded(self, value: float) -> float:
        frac = (value - self.lo) / (self.hi - self.lo)
        return float(np.clip(logit(np.clip(frac, 1e-12, 1 - 1e-12)), -config.LOGIT_CLIP, config.LOGIT_CLIP))

    def to_bounded(self, u: float) -> float:
        u = float(np.clip(u, -config.LOGIT_CLIP, config.LOGIT_CLIP))
        return self.lo + (self.hi - self.lo) * float(expit(u))


@dataclass(frozen=True, eq=False)
class EstimationProblem:
    """
    Observed prices at times t_k and the parameters left free to fit them

    Sentiments of the initial state are fixed at zero.
    """

    cfg: ModelConfig
    initial_state: StateVector
    times: np.ndarray
    observed: np.ndarray
    free: List[FreeParameter]
    loss: str = "nls"
    simulations: int = config.SML_MIN_SIMULATIONS
    noise: float = 0.0  # price units
    aliases: Dict[str, str] = field(default_factory=dict)
    truth: Optional[Dict[str, float]] = None
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        observed = np.asarray(self.observed, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise PreconditionError("observation times must be strictly increasing with at least two entries")
        if times[0] < self.settings.t0:
            raise PreconditionError("observation times must not precede the initial time")
        if observed.shape != (times.size, self.cfg.m):
            raise PreconditionError(f"observed prices must have shape ({times.size}, {self.cfg.m})")
        if self.loss not in LOSSES:
            raise PreconditionError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        state = self.initial_state
        zeros = np.zeros_like(state.N)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'observed', observed)
        object.__setattr__(self, 'initial_state', StateVector(state.P, state.M, state.N, zeros, zeros))
        object.__setattr__(self, 'free', list(self.free))
        object.__setattr__(self, '_paths', [ParameterPath.parse(p.name, self.aliases) for p in self.free])

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.free]

    def configured(self, theta: Sequence[float]) -> ModelConfig:
        cfg = self.cfg
        for path, value in zip(self._paths, theta):
            cfg = path.apply(cfg, value)
        return cfg

    def current_values(self) -> np.ndarray:
        return np.array([path.read(self.cfg) for path in self._paths])

    def bounded(self, u: np.ndarray) -> np.ndarray:
        return np.array([p.to_bounded(v) for p, v in zip(self.free, u)])

    def unbounded(self, theta: np.ndarray) -> np.ndarray:
        return np.array([p.to_unbounded(v) for p, v in zip(self.free, theta)])


def simulate_observables(cfg: ModelConfig, initial_state: StateVector, times: Sequence[float],
                         settings: Optional[IntegratorSettings] = None) -> np.ndarray:
    """Model prices at the observation times, shape (len(times), m)"""
    settings = settings or IntegratorSettings()
    times = np.asarray(times, dtype=float)
    t_eval = times if times[0] == settings.t0 else np.concatenate([[settings.t0], times])
    traj = integrate(cfg, initial_state, settings, t_eval=t_eval)
    prices = traj.prices
    return prices if times[0] == settings.t0 else prices[1:]


def problem_observables(problem: EstimationProblem, theta: Sequence[float]) -> np.ndarray:
    return simulate_observables(problem.configured(theta), problem.initial_state, problem.times, problem.settings)


def sse_loss(problem: EstimationProblem, theta: Sequence[float]) -> float:
    """Σ_k Σ_i (P_obs − P_sim)²; inf when the simulation fails"""
    try:
        simulated = problem_observables(problem, theta)
    except AssetFlowError as exc:
        logger.debug(f"simulation failed at θ={list(theta)}: {exc.message}")
        return np.inf
    return float(np.sum((problem.observed - simulated) ** 2))


def noise_draws(problem: EstimationProblem, seed: int) -> np.ndarray:
    """Observation-noise draws, one stream per simulation index, shape (S, K, m)"""
    shape = problem.observed.shape
    return np.stack([
        np.random.default_rng([seed, s]).standard_normal(shape) * problem.noise
        for s in range(problem.simulations)
    ])


def _slice_log_density(samples: np.ndarray, observation: float, noise: float) -> float:
    S = samples.size
    sigma = float(np.std(samples, ddof=1))
    bandwidth = 1.06 * (sigma if sigma > 0 else noise) * S ** (-0.2)
    floor = np.log(config.SML_DENSITY_FLOOR)
    if np.min(np.abs(samples - observation)) > config.SML_FAR_BANDWIDTHS * bandwidth:
        warnings.warn("observation lies outside every kernel; density floored", DensityFloorWarning, stacklevel=3)
        return floor
    kde = KernelDensity(bandwidth=bandwidth, kernel='gaussian').fit(samples[:, None])
    return max(float(kde.score_samples([[observation]])[0]), floor)


def sml_loglik(problem: EstimationProblem, theta: Sequence[float], draws: np.ndarray) -> float:
    """Mean log kernel density of the observations under S noisy simulations"""
    try:
        base = problem_observables(problem, theta)
    except AssetFlowError as exc:
        logger.debug(f"simulation failed at θ={list(theta)}: {exc.message}")
        return -np.inf
    simulated = base[None, :, :] + draws
    K, m = problem.observed.shape
    total = 0.0
    for k in range(K):
        for i in range(m):
            total += _slice_log_density(simulated[:, k, i], problem.observed[k, i], problem.noise)
    return total / (K * m)


def status_for(relative_error: float) -> str:
    for bound, label in config.ESTIMATE_STATUS_BANDS:
        if relative_error <= bound:
            return label
    return config.ESTIMATE_STATUS_FALLBACK


@dataclass(frozen=True, eq=False)
class EstimationResult:
    names: List[str]
    theta: np.ndarray
    loss: float
    loss_kind: str
    converged: bool
    evaluations: int
    restarts: List[Dict]
    rmse: np.ndarray
    truth: Optional[Dict[str, float]] = None
    seed: Optional[int] = None

    @property
    def estimates(self) -> Dict[str, float]:
        return {name: float(value) for name, value in zip(self.names, self.theta)}

    def relative_errors(self) -> Optional[Dict[str, float]]:
        if not self.truth:
            return None
        errors = {}
        for name, value in self.estimates.items():
            true = self.truth.get(name)
            if true is not None:
                errors[name] = abs(value - true) / abs(true) if true != 0 else abs(value)
        return errors

    def table_rows(self) -> List[Dict]:
        errors = self.relative_errors() or {}
        return [{
            'parameter': name,
            'true': (self.truth or {}).get(name),
            'estimated': value,
            'relative_error': errors.get(name),
            'status': status_for(errors[name]) if name in errors else "",
        } for name, value in self.estimates.items()]

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(self.table_rows())

    def to_dict(self) -> Dict:
        return {
            'loss_kind': self.loss_kind,
            'loss': self.loss,
            'converged': self.converged,
            'evaluations': self.evaluations,
            'seed': self.seed,
            'estimates': self.estimates,
            'rmse': self.rmse.tolist(),
            'restarts': self.restarts,
            'table': self.table_rows(),
        }


def _starting_points(problem: EstimationProblem, restarts: int, seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    starts = [np.zeros(len(problem.free))]
    for _ in range(restarts - 1):
        fractions = rng.uniform(0.05, 0.95, size=len(problem.free))
        starts.append(logit(fractions))
    return starts


def _minimize(problem: EstimationProblem, objective, restarts: int, seed: int, max_iter: int, kind: str):
    if not problem.free:
        raise PreconditionError("estimation needs at least one free parameter")
    if restarts < 1:
        raise PreconditionError("restarts must be ≥ 1")
    evaluations = 0

    def wrapped(u: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        value = objective(problem.bounded(u))
        return value if np.isfinite(value) else np.inf

    history = []
    best_u, best_value = None, np.inf
    for idx, u0 in enumerate(_starting_points(problem, restarts, seed)):
        start_value = wrapped(u0)
        outcome = minimize(wrapped, u0, method='Nelder-Mead',
                           options={'maxiter': max_iter * len(u0), 'xatol': 1e-8, 'fatol': 1e-14})
        improved = bool(np.isfinite(outcome.fun) and outcome.fun < start_value)
        history.append({
            'restart': idx,
            'start': problem.bounded(u0).tolist(),
            'theta': problem.bounded(outcome.x).tolist(),
            'objective': float(outcome.fun),
            'success': bool(outcome.success),
            'improved': improved,
        })
        if not improved:
            logger.warning(f"{kind} restart {idx + 1}/{restarts} did not improve on its start ({outcome.message})")
        logger.info(f"{kind} restart {idx + 1}/{restarts}: objective={outcome.fun:.6g}")
        if outcome.fun < best_value:
            best_u, best_value = outcome.x, float(outcome.fun)
    if best_u is None:
        raise EstimationError(f"every {kind} restart failed to produce a finite objective")
    converged = any(entry['improved'] for entry in history)
    return problem.bounded(best_u), best_value, converged, evaluations, history


def _rmse(problem: EstimationProblem, theta: np.ndarray) -> np.ndarray:
    try:
        simulated = problem_observables(problem, theta)
    except AssetFlowError:
        return np.full(problem.cfg.m, np.inf)
    return np.sqrt(np.mean((problem.observed - simulated) ** 2, axis=0))


def nls_fit(problem: EstimationProblem, restarts: int = config.NLS_RESTARTS, seed: int = 0,
            max_iter: int = config.NLS_MAX_ITER) -> EstimationResult:
    """
    Least-squares fit by Nelder–Mead on logit-transformed bounds

    The first restart starts at the middle of every domain, the others at
    seeded random interior points; the best restart wins.
    """
    theta, value, converged, evaluations, history = _minimize(
        problem, lambda th: sse_loss(problem, th), restarts, seed, max_iter, "nls")
    return EstimationResult(names=problem.names, theta=theta, loss=value, loss_kind="sse",
                            converged=converged, evaluations=evaluations, restarts=history,
                            rmse=_rmse(problem, theta), truth=problem.truth, seed=seed)


def sml_fit(problem: EstimationProblem, seed: int = 0, restarts: int = 1,
            max_iter: int = config.NLS_MAX_ITER) -> EstimationResult:
    """
    Simulated maximum likelihood with Gaussian kernel densities per observation

    Noise draws come from streams seeded by (seed, simulation index) and
    are shared by every θ evaluation, so results are deterministic in seed.
    """
    if problem.simulations < config.SML_MIN_SIMULATIONS:
        raise PreconditionError(f"SML needs at least {config.SML_MIN_SIMULATIONS} simulations")
    if not problem.noise > 0:
        raise PreconditionError("SML needs a positive observation-noise scale")
    draws = noise_draws(problem, seed)
    theta, value, converged, evaluations, history = _minimize(
        problem, lambda th: -sml_loglik(problem, th, draws), restarts, seed, max_iter, "sml")
    return EstimationResult(names=problem.names, theta=theta, loss=-value, loss_kind="loglik",
                            converged=converged, evaluations=evaluations, restarts=history,
                            rmse=_rmse(problem, theta), truth=problem.truth, seed=seed)


def fit(problem: EstimationProblem, seed: int = 0, restarts: Optional[int] = None) -> EstimationResult:
    if problem.loss == "sml":
        return sml_fit(problem, seed=seed, restarts=restarts or 1)
    return nls_fit(problem, restarts=restarts or config.NLS_RESTARTS, seed=seed)


def likelihood_ordering(problem: EstimationProblem, truth: Sequence[float], trials: int = 10,
                        spread: float = 0.2, seed: int = 0) -> int:
    """Number of random perturbations of truth whose SML log-likelihood does not beat truth"""
    draws = noise_draws(problem, seed)
    at_truth = sml_loglik(problem, truth, draws)
    rng = np.random.default_rng([seed, 7919])
    wins = 0
    truth = np.asarray(truth, dtype=float)
    for _ in range(trials):
        factors = 1.0 + spread * rng.choice([-1.0, 1.0], size=truth.size) * rng.uniform(0.5, 1.0, size=truth.size)
        lo = np.array([p.lo for p in problem.free])
        hi = np.array([p.hi for p in problem.free])
        candidate = np.clip(truth * factors, lo + 1e-9, hi - 1e-9)
        if at_truth >= sml_loglik(problem, candidate, draws):
            wins += 1
    return wins


def synthetic_problem(cfg: ModelConfig, initial_state: StateVector, free: List[FreeParameter],
                      times: Sequence[float], noise: float = 0.0, seed: int = 0, loss: str = "nls",
                      simulations: int = config.SML_MIN_SIMULATIONS,
                      aliases: Optional[Dict[str, str]] = None,
                      settings: Optional[IntegratorSettings] = None) -> EstimationProblem:
    """
    Observations simulated from cfg itself plus Gaussian noise

    The configured values of the free parameters become the truth.
    """
    aliases = dict(aliases or {})
    settings = settings or IntegratorSettings()
    truth = {p.name: ParameterPath.parse(p.name, aliases).read(cfg) for p in free}
    for p in free:
        if not p.lo < truth[p.name] < p.hi:
            raise PreconditionError(f"true {p.name}={truth[p.name]} lies outside [{p.lo}, {p.hi}]")
    clean_state = StateVector.from_holdings(initial_state.P, initial_state.M, initial_state.N)
    observed = simulate_observables(cfg, clean_state, times, settings)
    if noise > 0:
        observed = observed + np.random.default_rng(seed).normal(0.0, noise, size=observed.shape)
    return EstimationProblem(cfg=cfg, initial_state=clean_state, times=np.asarray(times, dtype=float),
                             observed=observed, free=free, loss=loss, simulations=simulations,
                             noise=noise if noise > 0 else (config.OBSERVATION_NOISE * float(np.mean(cfg.Pa))),
                             aliases=aliases, truth=truth, settings=settings)


def problem_from_dict(doc: Dict, cfg: ModelConfig, initial_state: StateVector,
                      aliases: Optional[Dict[str, str]] = None) -> EstimationProblem:
    """
    Build a problem from a JSON document

    Keys: free (list of {name, lo, hi}), and either series ({times, prices})
    or csv (path to a file with a time column followed by one column per asset).
    Optional: loss, simulations, noise, truth.
    """
    allowed = {'free', 'series', 'csv', 'loss', 'simulations', 'noise', 'truth'}
    for key in doc:
        if key not in allowed:
            raise ConfigError("unknown field", path=f"$.{key}")
    try:
        free = [FreeParameter(str(item['name']), float(item['lo']), float(item['hi'])) for item in doc['free']]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"each free parameter needs name, lo and hi ({exc})", path="$.free")
    if 'series' in doc:
        times = np.asarray(doc['series']['times'], dtype=float)
        prices = np.asarray(doc['series']['prices'], dtype=float)
    elif 'csv' in doc:
        try:
            frame = pd.read_csv(doc['csv'])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read observations: {exc}", path="$.csv")
        times = frame.iloc[:, 0].to_numpy(dtype=float)
        prices = frame.iloc[:, 1:1 + cfg.m].to_numpy(dtype=float)
    else:
        raise ConfigError("needs 'series' or 'csv'", path="$")
    return EstimationProblem(cfg=cfg, initial_state=initial_state, times=times, observed=prices, free=free,
                             loss=doc.get('loss', 'nls'),
                             simulations=int(doc.get('simulations', config.SML_MIN_SIMULATIONS)),
                             noise=float(doc.get('noise', config.OBSERVATION_NOISE * float(np.mean(cfg.Pa)))),
                             aliases=dict(aliases or {}), truth=doc.get('truth'))
