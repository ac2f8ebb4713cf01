"""
Integrator
Adaptive Dormand-Prince integration of the model onto a uniform sample grid
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Union

import numpy as np
import pandas as pd

from assetflow.common import config
from assetflow.common.errors import (
    InvalidStateError, PreconditionError, SingularSupplyError, StepLimitError, StepUnderflowError,
)
from assetflow.integration.dopri import ERROR_ORDER, DormandPrince
from assetflow.model.dynamics import drift_monitor, make_rhs
from assetflow.model.rates import rate_snapshot
from assetflow.model.types import ModelConfig, StateVector

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

# PI controller exponents
_PI_ALPHA = 0.7 / (ERROR_ORDER + 1)
_PI_BETA = 0.4 / (ERROR_ORDER + 1)

_RECOVERABLE = (InvalidStateError, SingularSupplyError, PreconditionError)


@dataclass(frozen=True)
class IntegratorSettings:
    t0: float = 0.0
    t_end: float = 100.0
    sample_dt: float = 0.1
    abs_tol: float = config.ABS_TOL
    rel_tol: float = config.REL_TOL
    max_steps: int = config.MAX_STEPS
    min_step: float = config.MIN_STEP
    max_step: Optional[float] = None

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise PreconditionError("tolerances must be positive")
        if not self.t_end > self.t0:
            raise PreconditionError(f"t_end ({self.t_end}) must exceed t0 ({self.t0})")
        if self.sample_dt <= 0:
            raise PreconditionError("sample_dt must be positive")

    def sample_times(self) -> np.ndarray:
        span = self.t_end - self.t0
        count = int(np.floor(span / self.sample_dt + 1e-9))
        times = self.t0 + self.sample_dt * np.arange(count + 1)
        if self.t_end - times[-1] > 1e-9 * max(1.0, abs(self.t_end)):
            times = np.append(times, self.t_end)
        else:
            times[-1] = self.t_end
        return times

    def with_horizon(self, horizon: float) -> "IntegratorSettings":
        return replace(self, t_end=self.t0 + horizon)

    def tightened(self, factor: float) -> "IntegratorSettings":
        return replace(self, abs_tol=self.abs_tol / factor, rel_tol=self.rel_tol / factor)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sample times, flat states (K × D) and integration diagnostics"""

    cfg: ModelConfig
    times: np.ndarray
    states: np.ndarray
    diagnostics: Dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) < 2 or len(self.times) != len(self.states):
            raise PreconditionError("trajectory needs at least two samples with matching states")
        if np.any(np.diff(self.times) <= 0):
            raise PreconditionError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def prices(self) -> np.ndarray:
        return self.states[:, self.cfg.layout.P]

    @property
    def cash(self) -> np.ndarray:
        return self.states[:, self.cfg.layout.M]

    def _grouped(self, name: str) -> np.ndarray:
        return self.states[:, getattr(self.cfg.layout, name)].reshape(len(self), self.cfg.n, self.cfg.m)

    @property
    def shares(self) -> np.ndarray:
        return self._grouped('N')

    @property
    def trend(self) -> np.ndarray:
        return self._grouped('Z1')

    @property
    def value(self) -> np.ndarray:
        return self._grouped('Z2')

    def wealth(self) -> np.ndarray:
        """Per-group wealth W[j] at every sample, shape (K, n)"""
        return self.cash + np.einsum('kji,ki->kj', self.shares, self.prices)

    def state_at(self, k: int) -> StateVector:
        return StateVector.from_flat(self.states[k], self.cfg.m, self.cfg.n)

    @property
    def final_state(self) -> StateVector:
        return self.state_at(-1)

    def window(self, t_start: float) -> "Trajectory":
        """Samples with time ≥ t_start"""
        keep = self.times >= t_start - 1e-9 * max(1.0, abs(t_start))
        if keep.sum() < 2:
            keep[-2:] = True
        return Trajectory(self.cfg, self.times[keep], self.states[keep], dict(self.diagnostics))

    def to_frame(self) -> pd.DataFrame:
        layout = self.cfg.layout
        frame = pd.DataFrame(self.states, columns=layout.labels())
        frame.insert(0, 'time', self.times)
        W = self.wealth()
        for j in range(self.cfg.n):
            frame[f"W_{j + 1}"] = W[:, j]
        return frame

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format='%.12g')


def solve_ode(fun: RHS, y0: np.ndarray, t_eval: np.ndarray, abs_tol: float = config.ABS_TOL,
              rel_tol: float = config.REL_TOL, max_steps: int = config.MAX_STEPS,
              min_step: float = config.MIN_STEP, max_step: Optional[float] = None):
    """
    Integrate y' = fun(t, y) from t_eval[0] and sample at every t_eval

    Returns:
        (states with shape (len(t_eval), dim), statistics dict)
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or len(t_eval) < 2 or np.any(np.diff(t_eval) <= 0):
        raise PreconditionError("t_eval must be strictly increasing with at least two entries")
    engine = DormandPrince(fun)
    t, t_end = float(t_eval[0]), float(t_eval[-1])
    y = np.array(y0, dtype=float)
    out = np.empty((len(t_eval), y.size))
    out[0] = y
    next_idx = 1

    f = engine.evaluate(t, y)
    span = t_end - t
    h = engine.initial_step(t, y, f, abs_tol, rel_tol, span)
    h_cap = span if max_step is None else max_step
    err_prev = 1e-4
    accepted = rejected = 0
    last_rejected = False
    last_failure: Optional[Exception] = None

    while next_idx < len(t_eval):
        if accepted + rejected >= max_steps:
            raise StepLimitError(t, max_steps)
        remaining = t_end - t
        h = min(h, h_cap, remaining)
        if h < min_step and remaining > min_step:
            if isinstance(last_failure, SingularSupplyError):
                raise last_failure.at_time(t)
            raise StepUnderflowError(t, h, cause=str(last_failure) if last_failure else None)
        final_step = h >= remaining

        try:
            y_new, f_new, K, error = engine.step(t, y, f, h)
        except _RECOVERABLE as exc:
            last_failure = exc
            rejected += 1
            last_rejected = True
            h *= 0.25
            logger.debug(f"stage failure at t={t:.6g}, h={h:.3e}: {exc}")
            continue

        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(error) / scale))
        if not np.isfinite(err):
            err = np.inf

        if err <= 1.0:
            t_new = t_end if final_step else t + h
            stop = int(np.searchsorted(t_eval, t_new, side='right'))
            if stop > next_idx:
                theta = (t_eval[next_idx:stop] - t) / h
                out[next_idx:stop] = engine.interpolate(y, h, K, theta)
                if final_step:
                    out[-1] = y_new
                next_idx = stop
            if err == 0.0:
                factor = config.STEP_GROWTH_MAX
            else:
                factor = config.STEP_SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA
            factor = min(config.STEP_GROWTH_MAX, max(config.STEP_SHRINK_MIN, factor))
            if last_rejected:
                factor = min(factor, 1.0)
            err_prev = max(err, 1e-4)
            t, y, f = t_new, y_new, f_new
            accepted += 1
            last_rejected = False
            last_failure = None
            h *= factor
        else:
            rejected += 1
            last_rejected = True
            shrink = config.STEP_SAFETY * err ** (-1.0 / (ERROR_ORDER + 1)) if np.isfinite(err) else 0.0
            h *= max(config.STEP_SHRINK_MIN, shrink)

    stats = {'accepted_steps': accepted, 'rejected_steps': rejected, 'rhs_evaluations': engine.evaluations}
    return out, stats


def integrate(cfg: ModelConfig, x0: Union[StateVector, np.ndarray], settings: IntegratorSettings,
              rhs_hook: Optional[RHS] = None, t_eval: Optional[np.ndarray] = None) -> Trajectory:
    """
    Integrate the model from x0 and sample it on the settings' uniform grid

    Args:
        cfg: model configuration
        x0: initial state
        settings: tolerances, horizon and sample spacing
        rhs_hook: replaces the model right-hand side (test problems)
        t_eval: explicit sample instants overriding the uniform grid

    Returns:
        Trajectory with step statistics and, for model runs, a drift report
    """
    if isinstance(x0, StateVector):
        if x0.m != cfg.m or x0.n != cfg.n:
            raise PreconditionError(f"state dimensions ({x0.m}, {x0.n}) do not match config ({cfg.m}, {cfg.n})")
        if rhs_hook is None:
            x0.check()
        y0 = x0.flatten()
    else:
        y0 = np.asarray(x0, dtype=float)
    if y0.shape != (cfg.dimension,):
        raise PreconditionError(f"initial state must have length {cfg.dimension}")

    times = settings.sample_times() if t_eval is None else np.asarray(t_eval, dtype=float)
    fun = rhs_hook if rhs_hook is not None else make_rhs(cfg)
    try:
        states, stats = solve_ode(fun, y0, times, settings.abs_tol, settings.rel_tol,
                                  settings.max_steps, settings.min_step, settings.max_step)
    except SingularSupplyError as exc:
        if exc.time is None:
            raise exc.at_time(float(times[0]))
        raise
    traj = Trajectory(cfg, times, states, dict(stats))
    if rhs_hook is None:
        traj.diagnostics['drift'] = drift_monitor(traj).to_dict()
    logger.debug(f"integrated {cfg.name or 'model'} over [{times[0]}, {times[-1]}]: "
                 f"{stats['accepted_steps']} accepted, {stats['rejected_steps']} rejected")
    return traj


def integrate_to_attractor(cfg: ModelConfig, x0: Union[StateVector, np.ndarray], settings: IntegratorSettings,
                           transient_fraction: float = config.TRANSIENT_FRACTION,
                           rhs_hook: Optional[RHS] = None) -> Trajectory:
    """Integrate the full horizon and keep only the post-transient window"""
    if not 0.0 <= transient_fraction <= 0.9:
        raise PreconditionError(f"transient_fraction must lie in [0, 0.9], got {transient_fraction}")
    traj = integrate(cfg, x0, settings, rhs_hook=rhs_hook)
    if transient_fraction == 0.0:
        return traj
    t_cut = settings.t0 + transient_fraction * (settings.t_end - settings.t0)
    return traj.window(t_cut)


def rate_series(cfg: ModelConfig, traj: Trajectory) -> Dict[str, np.ndarray]:
    """
    Transition rates recomputed at every sample

    Returns:
        dict with k and ktilde of shape (K, n, m) and demand S, supply T of shape (K, m)
    """
    K = len(traj)
    k = np.empty((K, cfg.n, cfg.m))
    ktilde = np.empty_like(k)
    S = np.empty((K, cfg.m))
    T = np.empty_like(S)
    for idx in range(K):
        P, M, N, Z1, Z2 = cfg.layout.unpack(traj.states[idx])
        snap = rate_snapshot(cfg, P, M, N, Z1, Z2)
        k[idx], ktilde[idx], S[idx], T[idx] = snap.k, snap.ktilde, snap.S, snap.T
    return {'k': k, 'ktilde': ktilde, 'S': S, 'T': T}
