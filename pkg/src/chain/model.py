"""
Chain Model for damped, boundary-driven oscillator chains
Physical parameters, potentials and closed-form linear-theory formulas
"""
import numpy as np
from typing import Dict, Any, Sequence, Tuple, Union
from dataclasses import dataclass, field, replace, asdict
from enum import Enum
import logging

from ..config.settings import (
    DEFAULT_N_SITES,
    DEFAULT_N_PHYSICAL,
    DEFAULT_COUPLING,
    DEFAULT_KAPPA,
    DEFAULT_SIGMA,
    DEFAULT_DT,
    DEFAULT_T_FINAL,
    DEFAULT_FREQUENCY,
    DEFAULT_RAMP_TIME,
    MASS_LEVEL_DENOMINATOR,
)
from .errors import ChainConfigError, BandGapError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class PotentialKind(Enum):
    """On-site potentials V(u)"""
    SINE_GORDON = "sine-gordon"
    KLEIN_GORDON = "klein-gordon"
    HARMONIC = "harmonic"  # u^2/2, the linearization of both chains

    @property
    def code(self) -> int:
        """Integer tag used by the compiled kernels"""
        return _POTENTIAL_CODES[self]

    def energy(self, u: ArrayLike) -> ArrayLike:
        """V(u)"""
        if self is PotentialKind.SINE_GORDON:
            return 1.0 - np.cos(u)
        if self is PotentialKind.KLEIN_GORDON:
            u2 = u * u
            return u2 / 2.0 - u2 * u2 / 24.0 + u2 * u2 * u2 / 720.0
        return 0.5 * u * u

    def force(self, u: ArrayLike) -> ArrayLike:
        """V'(u)"""
        if self is PotentialKind.SINE_GORDON:
            return np.sin(u)
        if self is PotentialKind.KLEIN_GORDON:
            u2 = u * u
            return u - u * u2 / 6.0 + u * u2 * u2 / 120.0
        return 1.0 * u

    def stiffness(self, u: ArrayLike) -> ArrayLike:
        """V''(u)"""
        if self is PotentialKind.SINE_GORDON:
            return np.cos(u)
        if self is PotentialKind.KLEIN_GORDON:
            u2 = u * u
            return 1.0 - u2 / 2.0 + u2 * u2 / 24.0
        return np.ones_like(u, dtype=float) if np.ndim(u) else 1.0


_POTENTIAL_CODES = {
    PotentialKind.SINE_GORDON: 0,
    PotentialKind.KLEIN_GORDON: 1,
    PotentialKind.HARMONIC: 2,
}


class SchemeKind(Enum):
    """Time integrators"""
    NEWTON = "newton"
    LINEARIZED = "linearized"
    RK4 = "rk4"


class ProfileVariant(Enum):
    """Argument of the tanh in the absorbing profile"""
    CORRECTED = "corrected"  # (2n - N0 - N) / (2 sigma): ramps 0 -> 2 kappa across the layer
    SHIFTED = "shifted"      # (2n - N0 + N) / (2 sigma): saturated across the layer


@dataclass(frozen=True)
class DriveSpec:
    """Harmonic boundary forcing psi(t) = A r(t) sin(Omega t)"""
    amplitude: float = 0.0
    frequency: float = DEFAULT_FREQUENCY

    def ramp(self, t: float, ramp_time: float) -> float:
        if ramp_time <= 0.0 or t >= ramp_time:
            return 1.0
        return max(t, 0.0) / ramp_time

    def value(self, t: float, ramp_time: float) -> float:
        return self.amplitude * self.ramp(t, ramp_time) * np.sin(self.frequency * t)

    def velocity(self, t: float, ramp_time: float) -> float:
        """Time derivative of psi; right-continuous at the ramp knee"""
        r = self.ramp(t, ramp_time)
        slope = 1.0 / ramp_time if 0.0 < ramp_time and 0.0 <= t < ramp_time else 0.0
        return self.amplitude * (
            slope * np.sin(self.frequency * t) + r * self.frequency * np.cos(self.frequency * t)
        )


@dataclass(frozen=True)
class StabilityReport:
    """Result of the necessary stability inequality"""
    satisfied: bool
    margin: float
    lhs: float
    rhs: float


@dataclass(frozen=True)
class ChainConfig:
    """All physical and numerical parameters of one simulation"""
    n_sites: int = DEFAULT_N_SITES
    n_physical: int = DEFAULT_N_PHYSICAL
    coupling: float = DEFAULT_COUPLING
    beta: float = 0.0
    gamma: float = 0.0
    mass_squared: float = 0.0
    kappa: float = DEFAULT_KAPPA
    sigma: float = DEFAULT_SIGMA
    dt: float = DEFAULT_DT
    t_final: float = DEFAULT_T_FINAL
    ramp_time: float = DEFAULT_RAMP_TIME
    potential: PotentialKind = PotentialKind.SINE_GORDON
    drive: DriveSpec = field(default_factory=DriveSpec)
    scheme: SchemeKind = SchemeKind.NEWTON
    profile: ProfileVariant = ProfileVariant.CORRECTED
    second_order_start: bool = False
    initial_displacement: Tuple[float, ...] = ()
    initial_velocity: Tuple[float, ...] = ()

    def __post_init__(self):
        # Sequences arrive as lists from config files; keep the dataclass hashable
        object.__setattr__(self, 'initial_displacement', tuple(float(v) for v in self.initial_displacement))
        object.__setattr__(self, 'initial_velocity', tuple(float(v) for v in self.initial_velocity))
        self._validate()

        stability = check_stability(self)
        if not stability.satisfied:
            logger.warning(
                f"Necessary stability condition violated: "
                f"(c^2 - m^2/4) dt^2 = {stability.lhs:.6g} >= {stability.rhs:.6g}"
            )

    def _validate(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ChainConfigError('n_sites', f"must be a positive integer, got {self.n_sites}")
        if int(self.n_physical) != self.n_physical or not 1 <= self.n_physical <= self.n_sites:
            raise ChainConfigError('n_physical', f"must satisfy 1 <= N0 <= N={self.n_sites}, got {self.n_physical}")
        if not self.coupling > 0:
            raise ChainConfigError('coupling', f"must be positive, got {self.coupling}")
        for name in ('beta', 'gamma', 'kappa', 'ramp_time'):
            if not getattr(self, name) >= 0:
                raise ChainConfigError(name, f"must be nonnegative, got {getattr(self, name)}")
        if not self.mass_squared > -1.0:
            raise ChainConfigError('mass_squared', f"must exceed -1 for a band gap to exist, got {self.mass_squared}")
        if not self.sigma > 0:
            raise ChainConfigError('sigma', f"must be positive, got {self.sigma}")
        if not self.dt > 0:
            raise ChainConfigError('dt', f"must be positive, got {self.dt}")
        if not self.t_final >= self.dt:
            raise ChainConfigError('t_final', f"must be at least dt={self.dt}, got {self.t_final}")
        if not self.drive.amplitude >= 0:
            raise ChainConfigError('amplitude', f"must be nonnegative, got {self.drive.amplitude}")
        if not self.drive.frequency > 0:
            raise ChainConfigError('frequency', f"must be positive, got {self.drive.frequency}")
        for name in ('initial_displacement', 'initial_velocity'):
            values = getattr(self, name)
            if values and len(values) != self.n_sites:
                raise ChainConfigError(name, f"needs {self.n_sites} entries, got {len(values)}")
            if values and not np.all(np.isfinite(values)):
                raise ChainConfigError(name, "contains non-finite values")

    # ------------------------------------------------------------------
    # Derived quantities
    # ------------------------------------------------------------------

    @property
    def n_steps(self) -> int:
        """Number of time steps M with M dt ~ T"""
        return max(1, int(round(self.t_final / self.dt)))

    @property
    def gap_edge(self) -> float:
        return float(np.sqrt(self.mass_squared + 1.0))

    @property
    def stability(self) -> StabilityReport:
        return check_stability(self)

    def boundary(self, t: float) -> float:
        return float(self.drive.value(t, self.ramp_time))

    def boundary_velocity(self, t: float) -> float:
        return float(self.drive.velocity(t, self.ramp_time))

    def initial_layers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Initial displacement phi(n) and velocity varphi(n), zero by default"""
        phi = np.array(self.initial_displacement, dtype=float) if self.initial_displacement else np.zeros(self.n_sites)
        varphi = np.array(self.initial_velocity, dtype=float) if self.initial_velocity else np.zeros(self.n_sites)
        return phi, varphi

    def with_updates(self, **changes) -> 'ChainConfig':
        """
        Derive a new configuration

        Args:
            changes: ChainConfig fields, plus `amplitude` / `frequency` for the drive

        Returns:
            Validated copy with the changes applied
        """
        drive_changes = {k: changes.pop(k) for k in ('amplitude', 'frequency') if k in changes}
        if drive_changes:
            changes['drive'] = replace(changes.get('drive', self.drive), **drive_changes)
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Flat, JSON-friendly view used by manifests and config dumps"""
        data = asdict(self)
        drive = data.pop('drive')
        data['amplitude'] = drive['amplitude']
        data['frequency'] = drive['frequency']
        data['potential'] = self.potential.value
        data['scheme'] = self.scheme.value
        data['profile'] = self.profile.value
        data['initial_displacement'] = list(self.initial_displacement)
        data['initial_velocity'] = list(self.initial_velocity)
        return data


# ----------------------------------------------------------------------
# Linear theory
# ----------------------------------------------------------------------

def dispersion(k: ArrayLike, cfg: ChainConfig) -> ArrayLike:
    """Linear dispersion relation omega(k) = sqrt(m^2 + 1 + 2 c^2 (1 - cos k))"""
    c2 = cfg.coupling ** 2
    return np.sqrt(cfg.mass_squared + 1.0 + 2.0 * c2 * (1.0 - np.cos(k)))


def _require_band_gap(frequency: float, cfg: ChainConfig) -> None:
    edge = cfg.gap_edge
    if not 0.0 < frequency < edge:
        raise BandGapError(frequency, edge)


def evanescent_decay(frequency: float, cfg: ChainConfig) -> float:
    """
    Spatial decay rate of the linear evanescent solution

    Args:
        frequency: driving frequency Omega, inside the forbidden band gap
        cfg: chain configuration (coupling and mass)

    Returns:
        lambda = arccosh(1 + (m^2 + 1 - Omega^2) / (2 c^2))
    """
    _require_band_gap(frequency, cfg)
    argument = 1.0 + (cfg.mass_squared + 1.0 - frequency ** 2) / (2.0 * cfg.coupling ** 2)
    return float(np.arccosh(argument))


def threshold_As(frequency: float, cfg: ChainConfig) -> float:
    """Continuum supratransmission threshold A_s = 4 arctan(lambda c / Omega)"""
    if not frequency > 0:
        raise BandGapError(frequency, cfg.gap_edge)
    decay = evanescent_decay(frequency, cfg)
    return float(4.0 * np.arctan(decay * cfg.coupling / frequency))


def exact_linear_solution(sites: ArrayLike, t: ArrayLike, cfg: ChainConfig) -> ArrayLike:
    """Evanescent solution A sin(Omega t) exp(-lambda n) of the harmonic chain"""
    decay = evanescent_decay(cfg.drive.frequency, cfg)
    return cfg.drive.amplitude * np.sin(cfg.drive.frequency * np.asarray(t)) * np.exp(-decay * np.asarray(sites))


def absorbing_profile(n: ArrayLike, cfg: ChainConfig) -> ArrayLike:
    """
    Damping increment gamma'(n) of the absorbing layer on sites N0 < n <= N

    The corrected argument (2n - N0 - N) centres the tanh ramp in the layer;
    the shifted variant keeps (2n - N0 + N).
    """
    n = np.asarray(n, dtype=float)
    if cfg.profile is ProfileVariant.SHIFTED:
        argument = (2.0 * n - cfg.n_physical + cfg.n_sites) / (2.0 * cfg.sigma)
    else:
        argument = (2.0 * n - cfg.n_physical - cfg.n_sites) / (2.0 * cfg.sigma)
    inside = (n > cfg.n_physical) & (n <= cfg.n_sites)
    profile = np.where(inside, cfg.kappa * (1.0 + np.tanh(argument)), 0.0)
    return float(profile) if profile.ndim == 0 else profile


def damping_profile(cfg: ChainConfig) -> np.ndarray:
    """alpha_n = gamma + gamma'(n) for n = 1..N"""
    sites = np.arange(1, cfg.n_sites + 1)
    return cfg.gamma + absorbing_profile(sites, cfg)


def check_stability(cfg: ChainConfig) -> StabilityReport:
    """
    Necessary stability condition (c^2 - m^2/4) dt^2 < 1 + (alpha/4 + beta) dt

    alpha is taken as the uniform external damping gamma; the absorbing
    layer only enlarges the right-hand side.
    """
    lhs = (cfg.coupling ** 2 - cfg.mass_squared / 4.0) * cfg.dt ** 2
    rhs = 1.0 + (cfg.gamma / 4.0 + cfg.beta) * cfg.dt
    return StabilityReport(satisfied=bool(lhs < rhs), margin=float(rhs - lhs), lhs=float(lhs), rhs=float(rhs))


def mass_frequency_shift(mass_squared: float) -> float:
    """Horizontal shift sqrt(1 + m^2) - 1 of a bifurcation diagram"""
    return float(np.sqrt(1.0 + mass_squared) - 1.0)


def mass_squared_for_level(level: int) -> float:
    """m^2 such that sqrt(m^2 + 1) = 1 + level / 40"""
    return float((1.0 + level / MASS_LEVEL_DENOMINATOR) ** 2 - 1.0)


def sites_array(values: Sequence[int], cfg: ChainConfig) -> np.ndarray:
    """Validate 1-based probe sites against the chain length"""
    sites = np.asarray(list(values), dtype=int)
    if sites.size and (sites.min() < 1 or sites.max() > cfg.n_sites):
        raise ChainConfigError('probes', f"sites must lie in 1..{cfg.n_sites}, got {list(values)}")
    return sites
