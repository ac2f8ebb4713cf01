"""
AssetFlow Errors
Exception and warning hierarchy shared by every component
"""

from typing import Any, Dict, List, Optional


class AssetFlowError(Exception):
    """Base class for every domain error raised by assetflow"""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        payload = {'error': type(self).__name__, 'message': self.message}
        for key, value in self.context.items():
            if hasattr(value, 'tolist'):
                value = value.tolist()
            payload[key] = value
        return payload


class ConfigError(AssetFlowError):
    """Invalid configuration document or field"""

    def __init__(self, message: str, path: str = "$", **context: Any):
        super().__init__(f"{path}: {message}", path=path, **context)
        self.path = path


class UnknownScenarioError(ConfigError):
    def __init__(self, name: str, available: List[str]):
        super().__init__(
            f"unknown scenario '{name}'; available: {', '.join(available)}",
            available=available,
        )
        self.name = name
        self.available = available


class InvalidStateError(AssetFlowError):
    pass


class PreconditionError(AssetFlowError):
    pass


class SingularSupplyError(AssetFlowError):
    def __init__(self, asset: int, supply: float, time: Optional[float] = None):
        where = f" at t={time:.6g}" if time is not None else ""
        super().__init__(
            f"supply of asset {asset} collapsed to {supply:.3e}{where}",
            asset=asset, supply=supply, time=time,
        )
        self.asset = asset
        self.time = time

    def at_time(self, time: float) -> "SingularSupplyError":
        return SingularSupplyError(self.asset, self.context['supply'], time)


class IntegrationError(AssetFlowError):
    pass


class StepUnderflowError(IntegrationError):
    def __init__(self, time: float, step: float, cause: Optional[str] = None):
        message = (
            f"step size {step:.3e} underflowed at t={time:.6g}; the scenario may be stiff, "
            f"reduce sample_dt or tighten parameters"
        )
        if cause:
            message += f" (last stage failure: {cause})"
        super().__init__(message, time=time, step=step)
        self.time = time


class StepLimitError(IntegrationError):
    def __init__(self, time: float, max_steps: int):
        super().__init__(f"max_steps={max_steps} reached at t={time:.6g}", time=time)
        self.time = time


class CalibrationInfeasibleError(AssetFlowError):
    def __init__(self, mismatch):
        super().__init__(
            f"share calibration misses N0 by {list(map(float, mismatch))} per asset",
            mismatch=mismatch,
        )
        self.mismatch = mismatch


class ZeroSellRateError(CalibrationInfeasibleError):
    def __init__(self, group: int, asset: int):
        AssetFlowError.__init__(
            self, f"sell rate of group {group} on asset {asset} is zero at zero sentiment",
            group=group, asset=asset,
        )
        self.mismatch = None


class ConvergenceError(AssetFlowError):
    def __init__(self, message: str, best_residual: float, best_point: Any = None):
        super().__init__(message, best_residual=best_residual)
        self.best_residual = best_residual
        self.best_point = best_point


class EigenvalueConvergenceError(AssetFlowError):
    pass


class NoSignChangeError(AssetFlowError):
    def __init__(self, lo_value: float, hi_value: float):
        super().__init__(
            f"leading real part does not change sign on the bracket "
            f"({lo_value:.4e} at lo, {hi_value:.4e} at hi)",
            lo_value=lo_value, hi_value=hi_value,
        )


class NotHopfError(AssetFlowError):
    def __init__(self, mu: float, eigenvalue: complex):
        super().__init__(
            f"crossing at {mu:.6g} is real (λ={eigenvalue:.4e}); fold, not Hopf",
            mu=mu, eigenvalue=[eigenvalue.real, eigenvalue.imag],
        )


class NonTransversalError(AssetFlowError):
    def __init__(self, mu: float, slope: float):
        super().__init__(
            f"leading real part crosses zero at {mu:.6g} with slope {slope:.3e}; not transversal",
            mu=mu, slope=slope,
        )


class WindowTooShortError(AssetFlowError):
    def __init__(self, peaks: int, spread: float):
        super().__init__(
            f"only {peaks} peaks found with spread {spread:.3e}; window too short",
            peaks=peaks, spread=spread,
        )
        self.spread = spread


class UndefinedIndexError(AssetFlowError):
    pass


class EstimationError(AssetFlowError):
    pass


class RateBudgetWarning(UserWarning):
    """Σ_i k[j][i] exceeded 1 for at least one group"""


class ZeroModeWarning(UserWarning):
    """Zero-eigenvalue count differs from the expected conservation count"""


class DensityFloorWarning(UserWarning):
    """An observation fell outside every kernel of a likelihood slice"""
