"""
AssetFlow Configuration
Centralized numerical defaults and runtime settings for all components
"""

import os

# Runtime Configuration
ASSETFLOW_THREADS = int(os.getenv('ASSETFLOW_THREADS', str(min(8, os.cpu_count() or 1))))
ASSETFLOW_LOG_LEVEL = os.getenv('ASSETFLOW_LOG_LEVEL', 'INFO')
ASSETFLOW_OUTPUT_DIR = os.getenv('ASSETFLOW_OUTPUT_DIR', 'runs')

# Model Guards
SUPPLY_FLOOR = 1e-12  # supply T below this is treated as singular
RATE_BOUND_SLACK = 1e-12  # tolerance on a ± |b| inside [0, 1]

# Integrator Defaults
ABS_TOL = float(os.getenv('ASSETFLOW_ABS_TOL', '1e-8'))
REL_TOL = float(os.getenv('ASSETFLOW_REL_TOL', '1e-6'))
MAX_STEPS = 2_000_000
MIN_STEP = 1e-12  # time units
STEP_SAFETY = 0.9
STEP_GROWTH_MAX = 5.0
STEP_SHRINK_MIN = 0.2

# Finite Differences and Newton
FD_STEP = 1e-6  # relative step, scaled by max(1, |x|)
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 30
CALIBRATION_TOL = 1e-9  # relative mismatch allowed in share calibration
CASH_TOL = 1e-9  # relative mismatch allowed in Σ M_eq = M0

# Spectral Classification
ZERO_TOL = 1e-7  # |λ| below this counts as a conservation/manifold mode
STABILITY_MARGIN = 1e-7
IMAG_TOL = 1e-6  # |Im λ| below this at a crossing means fold, not Hopf
TRANSVERSALITY_TOL = 1e-6  # |dRe λ/dμ| below this at a crossing is degenerate
EIGEN_RESIDUAL_TOL = 1e-8

# Limit Cycles and Scans
SEED_PERTURBATION = 0.01  # +1% on the first asset's price
CYCLE_NOISE_FLOOR = 1e-6  # relative to mean price
MIN_CYCLE_PERIODS = 25
TRANSIENT_FRACTION = 0.5
DEFAULT_SCAN_HORIZON = 500.0  # time units
AMPLITUDE_THRESHOLD = 1e-3  # relative to Pa

# Market Analysis
CONTAGION_SHOCK = 0.1  # fraction of Pa
CONTAGION_WINDOW = 0.2  # trailing fraction of the horizon
CONTAGION_HORIZON = 100.0
EXCURSION_GRID = [-10.0, -5.0, 0.0, 5.0, 10.0]  # price units
EXCURSION_HORIZON = 500.0

# Calibration
NLS_RESTARTS = 5
NLS_MAX_ITER = 400
SML_MIN_SIMULATIONS = 50
SML_DENSITY_FLOOR = 1e-300
SML_FAR_BANDWIDTHS = 6.0
OBSERVATION_NOISE = 0.01  # fraction of Pa
LOGIT_CLIP = 30.0

# Status bands for estimated-parameter tables (relative error upper bounds)
ESTIMATE_STATUS_BANDS = [
    (0.05, "Excellent"),
    (0.10, "Good"),
    (0.15, "Acceptable"),
]
ESTIMATE_STATUS_FALLBACK = "Moderate"

# Stability Classes
CLASSIFICATIONS = ["Stable", "Marginal", "Unstable"]
