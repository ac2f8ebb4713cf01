"""
Dormand-Prince 5(4)
Seven-stage FSAL pair with embedded error estimate and 4th-order dense output
"""

from typing import Callable, Tuple

import numpy as np

from assetflow.common.errors import AssetFlowError

# Butcher tableau (Hairer, Nørsett & Wanner, Solving ODE I, p. 178)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])

# b - b_hat over the seven stages (last stage is the FSAL evaluation)
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# Dense output: y(t + θh) = y + h·Kᵀ·(P·[θ, θ², θ³, θ⁴])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ORDER = 5
ERROR_ORDER = 4

RHS = Callable[[float, np.ndarray], np.ndarray]


class DormandPrince:
    """Single-step engine; step control lives in the integrator"""

    def __init__(self, fun: RHS):
        self.fun = fun
        self.evaluations = 0

    def evaluate(self, t: float, y: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        return self.fun(t, y)

    def step(self, t: float, y: np.ndarray, f0: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Advance one trial step

        Returns:
            (y_new, f_new, K, error) where K holds the seven stage slopes
            and error is the embedded local error estimate per component
        """
        K = np.empty((7, y.size))
        K[0] = f0
        for s in range(1, 6):
            dy = h * (A[s] @ K[:s])
            K[s] = self.evaluate(t + C[s] * h, y + dy)
        y_new = y + h * (B @ K[:6])
        K[6] = self.evaluate(t + h, y_new)
        error = h * (E @ K)
        return y_new, K[6], K, error

    @staticmethod
    def interpolate(y_old: np.ndarray, h: float, K: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Dense output at fractions theta ∈ [0, 1] of the last accepted step"""
        theta = np.atleast_1d(theta)
        powers = np.cumprod(np.tile(theta, (4, 1)), axis=0)  # (4, len(theta))
        Q = K.T @ P  # (dim, 4)
        return y_old[None, :] + h * (Q @ powers).T

    def initial_step(self, t0: float, y0: np.ndarray, f0: np.ndarray, abs_tol: float, rel_tol: float,
                     span: float) -> float:
        """Starting step size (Hairer's heuristic)"""
        scale = abs_tol + rel_tol * np.abs(y0)
        d0 = np.max(np.abs(y0) / scale)
        d1 = np.max(np.abs(f0) / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        try:
            f1 = self.evaluate(t0 + h0, y0 + h0 * f0)
        except AssetFlowError:
            return min(h0, 1e-3 * span)
        d2 = np.max(np.abs(f1 - f0) / scale) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / ORDER)
        return min(100 * h0, h1, span)
