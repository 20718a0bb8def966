"""
Chain Simulation Package
Energy-consistent implicit schemes for damped, boundary-driven
sine-Gordon and Klein-Gordon chains
"""

__version__ = "1.0.0"

from .errors import (
    BandGapError,
    BlowUpError,
    ChainConfigError,
    DegenerateMatrixError,
    SimulationError,
    StepConvergenceError,
)
from .model import (
    ChainConfig,
    DriveSpec,
    PotentialKind,
    ProfileVariant,
    SchemeKind,
    absorbing_profile,
    check_stability,
    damping_profile,
    dispersion,
    evanescent_decay,
    exact_linear_solution,
    threshold_As,
)
from .energy import EnergyReport, discrete_energy, energy_rate_identity, greens_identity_check
from .stepper import ChainState, SimulationResult, discrete_gradient, run, step_linearized, step_newton, step_rk4
