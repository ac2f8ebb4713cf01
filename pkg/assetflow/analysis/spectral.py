"""
Spectral Analysis
Jacobians at equilibria, eigenvalues, stability classification and Hurwitz tests
"""

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from assetflow.analysis.equilibrium import EquilibriumKind, EquilibriumPoint
from assetflow.common import config
from assetflow.common.errors import EigenvalueConvergenceError, PreconditionError, ZeroModeWarning
from assetflow.model.dynamics import rhs_flat
from assetflow.model.types import ModelConfig

logger = logging.getLogger(__name__)


class JacobianKind(str, Enum):
    FULL = "full"
    REDUCED = "reduced"


@dataclass(frozen=True, eq=False)
class Jacobian:
    """Matrix plus the variable blocks its rows and columns are grouped in"""

    matrix: np.ndarray
    kind: JacobianKind
    m: int
    n: int
    blocks: Dict[str, slice] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def block(self, row: str, col: str) -> np.ndarray:
        return self.matrix[self.blocks[row], self.blocks[col]]

    def expected_zero_modes(self) -> int:
        # conservation (m + 1) plus n − 1 manifold directions
        return self.m + self.n if self.kind == JacobianKind.FULL else 0


def _fd_jacobian(cfg: ModelConfig, x: np.ndarray, columns: np.ndarray, rows: np.ndarray,
                 step: float) -> np.ndarray:
    J = np.empty((len(rows), len(columns)))
    for col, k in enumerate(columns):
        h = step * max(1.0, abs(x[k]))
        forward, backward = x.copy(), x.copy()
        forward[k] += h
        backward[k] -= h
        J[:, col] = (rhs_flat(cfg, forward)[rows] - rhs_flat(cfg, backward)[rows]) / (2 * h)
    return J


def _require_equilibrium(eq: EquilibriumPoint, tol: float = 1e-8):
    if not eq.residual < tol:
        raise PreconditionError(f"point is not an equilibrium (residual {eq.residual:.3e} ≥ {tol:g})")


def jacobian_full(cfg: ModelConfig, eq: EquilibriumPoint, step: float = config.FD_STEP) -> Jacobian:
    """Central finite-difference Jacobian of the full right-hand side"""
    _require_equilibrium(eq)
    x = eq.state.flatten()
    idx = np.arange(x.size)
    matrix = _fd_jacobian(cfg, x, idx, idx, step)
    return Jacobian(matrix, JacobianKind.FULL, cfg.m, cfg.n, cfg.layout.blocks())


def jacobian_reduced(cfg: ModelConfig, eq: EquilibriumPoint, step: float = config.FD_STEP) -> Jacobian:
    """Jacobian of the (P, Z1, Z2) sub-dynamics with cash and holdings frozen"""
    _require_equilibrium(eq)
    if eq.kind != EquilibriumKind.FUNDAMENTAL:
        raise PreconditionError("the reduced Jacobian is defined at fundamental equilibria")
    x = eq.state.flatten()
    idx = cfg.layout.reduced_indices()
    matrix = _fd_jacobian(cfg, x, idx, idx, step)
    m, mn = cfg.m, cfg.m * cfg.n
    blocks = {'P': slice(0, m), 'Z1': slice(m, m + mn), 'Z2': slice(m + mn, m + 2 * mn)}
    return Jacobian(matrix, JacobianKind.REDUCED, cfg.m, cfg.n, blocks)


def _sorted(values: np.ndarray) -> np.ndarray:
    order = np.lexsort((-values.imag, -values.real))
    return values[order]


def eigenvalues(matrix: np.ndarray, residual_tol: float = config.EIGEN_RESIDUAL_TOL) -> np.ndarray:
    """
    Eigenvalues sorted by descending real part

    LAPACK's balanced Hessenberg QR does the work; every pair is checked
    against ‖Av − λv‖ ≤ residual_tol·‖A‖.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise PreconditionError("matrix has non-finite entries")
    if A.size == 0:
        return np.array([], dtype=complex)
    try:
        values, vectors = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueConvergenceError(f"QR iteration did not converge: {exc}")
    scale = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    residuals = np.linalg.norm(A @ vectors - vectors * values[None, :], axis=0) / np.linalg.norm(vectors, axis=0)
    if np.any(residuals > residual_tol * scale):
        worst = int(np.argmax(residuals))
        raise EigenvalueConvergenceError(
            f"eigenpair residual {residuals[worst]:.3e} exceeds {residual_tol:g}·‖A‖ for λ={values[worst]:.6g}")
    return _sorted(values.astype(complex))


def _leading(values: np.ndarray, expected_zero_modes: int, zero_tol: float):
    """Eigenvalue with largest real part once zero modes are set aside"""
    zero = np.abs(values) < zero_tol
    if zero.sum() < expected_zero_modes:
        # set aside the expected count of smallest-modulus eigenvalues instead
        zero = np.zeros(len(values), dtype=bool)
        zero[np.argsort(np.abs(values))[:expected_zero_modes]] = True
    rest = values[~zero]
    if rest.size == 0:
        return 0.0 + 0.0j
    return rest[np.argmax(rest.real)]


def _classification(leading: float, margin: float) -> str:
    if leading < -margin:
        return "Stable"
    if abs(leading) <= margin:
        return "Marginal"
    return "Unstable"


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    zero_modes: int
    expected_zero_modes: int
    leading_eigenvalue: complex
    classification: str
    jacobian_kind: JacobianKind

    @property
    def leading(self) -> float:
        return float(self.leading_eigenvalue.real)

    @property
    def frequency(self) -> float:
        return float(abs(self.leading_eigenvalue.imag))

    def to_dict(self) -> Dict:
        return {
            'jacobian_kind': self.jacobian_kind.value,
            'classification': self.classification,
            'leading': self.leading,
            'leading_eigenvalue': [self.leading_eigenvalue.real, self.leading_eigenvalue.imag],
            'zero_modes': self.zero_modes,
            'expected_zero_modes': self.expected_zero_modes,
            'eigenvalues': [[float(v.real), float(v.imag)] for v in self.eigenvalues],
        }


def spectrum_report(jacobian: Jacobian, expected_zero_modes: Optional[int] = None,
                    zero_tol: float = config.ZERO_TOL,
                    margin: float = config.STABILITY_MARGIN) -> SpectrumReport:
    values = eigenvalues(jacobian.matrix)
    expected = jacobian.expected_zero_modes() if expected_zero_modes is None else expected_zero_modes
    zero_modes = int(np.sum(np.abs(values) < zero_tol))
    if zero_modes != expected:
        warnings.warn("zero-eigenvalue count differs from the expected conservation count",
                      ZeroModeWarning, stacklevel=2)
        logger.debug(f"{jacobian.kind.value} Jacobian: {zero_modes} zero modes, expected {expected}")
    lead = _leading(values, expected, zero_tol)
    return SpectrumReport(
        eigenvalues=values,
        zero_modes=zero_modes,
        expected_zero_modes=expected,
        leading_eigenvalue=complex(lead),
        classification=_classification(float(lead.real), margin),
        jacobian_kind=jacobian.kind,
    )


def classify(spectrum: SpectrumReport, expected_zero_modes: Optional[int] = None,
             zero_tol: float = config.ZERO_TOL, margin: float = config.STABILITY_MARGIN) -> str:
    """Stable, Marginal or Unstable from the non-zero eigenvalues"""
    expected = spectrum.expected_zero_modes if expected_zero_modes is None else expected_zero_modes
    if spectrum.zero_modes != expected:
        warnings.warn("zero-eigenvalue count differs from the expected conservation count",
                      ZeroModeWarning, stacklevel=2)
    lead = _leading(spectrum.eigenvalues, expected, zero_tol)
    return _classification(float(lead.real), margin)


def analyze_equilibrium(cfg: ModelConfig, eq: EquilibriumPoint, kind: str = "full") -> SpectrumReport:
    jac = jacobian_full(cfg, eq) if JacobianKind(kind) == JacobianKind.FULL else jacobian_reduced(cfg, eq)
    return spectrum_report(jac)


@dataclass(frozen=True)
class CubicVerdict:
    stable: bool
    hopf_margin: float

    def to_dict(self) -> Dict:
        return {'stable': self.stable, 'hopf_margin': self.hopf_margin}


def routh_hurwitz_cubic(coeffs: Sequence[float]) -> CubicVerdict:
    """
    Routh–Hurwitz test for a3·λ³ + a2·λ² + a1·λ + a0

    Args:
        coeffs: (a3, a2, a1, a0) with a3 > 0

    Returns:
        CubicVerdict with hopf_margin = a2·a1 − a0 on the monic polynomial
    """
    if len(coeffs) != 4:
        raise PreconditionError(f"a cubic needs 4 coefficients, got {len(coeffs)}")
    a3, a2, a1, a0 = (float(c) for c in coeffs)
    if not a3 > 0:
        raise PreconditionError("leading coefficient must be positive")
    a2, a1, a0 = a2 / a3, a1 / a3, a0 / a3
    margin = a2 * a1 - a0
    return CubicVerdict(stable=bool(a2 > 0 and a1 > 0 and a0 > 0 and margin > 0), hopf_margin=margin)


def hurwitz_minors(coeffs: Sequence[float]) -> List[float]:
    """Leading principal minors of the Hurwitz matrix, coefficients highest degree first"""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise PreconditionError("need a polynomial of degree ≥ 1")
    if not c[0] > 0:
        raise PreconditionError("leading coefficient must be positive")
    c = c / c[0]
    degree = c.size - 1
    H = np.zeros((degree, degree))
    for row in range(degree):
        for col in range(degree):
            k = 2 * (col + 1) - (row + 1)
            if 0 <= k <= degree:
                H[row, col] = c[k]
    return [float(np.linalg.det(H[:size, :size])) for size in range(1, degree + 1)]


def hurwitz_stable(coeffs: Sequence[float]) -> bool:
    """True when every root has negative real part"""
    return all(minor > 0 for minor in hurwitz_minors(coeffs))


def characteristic_polynomial(matrix: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients, highest degree first"""
    return np.real(np.poly(np.asarray(matrix, dtype=float)))
