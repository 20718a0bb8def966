"""
Discrete Energy for the implicit chain scheme
Total energy, boundary flux, dissipation terms and the exact rate identities
"""
import numpy as np
import pandas as pd
from typing import Optional, Sequence, Tuple
from dataclasses import dataclass, asdict
import logging

from ..config.settings import GREENS_RELATIVE_TOLERANCE
from .model import ChainConfig, damping_profile

logger = logging.getLogger(__name__)

BoundaryTriple = Tuple[float, float, float]


@dataclass
class EnergyReport:
    """Energy bookkeeping for time step k (needs layers k-1, k, k+1)"""
    step: int
    t: float
    E_total: float
    E_physical: float
    flux_in: float
    dissipation_gamma: float
    dissipation_beta: float
    identity_residual: float
    E_injected: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class RateTerms:
    """Right-hand side of the discrete energy-rate identity"""
    flux_in: float
    dissipation_gamma: float
    dissipation_beta: float

    @property
    def rate(self) -> float:
        return self.flux_in - self.dissipation_gamma - self.dissipation_beta


@dataclass(frozen=True)
class GreensIdentity:
    """Both sides of the discrete Green's first identity"""
    lhs: float
    rhs: float

    def agrees(self, tolerance: float = GREENS_RELATIVE_TOLERANCE) -> bool:
        return abs(self.lhs - self.rhs) <= tolerance * (1.0 + abs(self.lhs))


def _energy_density(u_next: np.ndarray, u_curr: np.ndarray, cfg: ChainConfig) -> np.ndarray:
    """Per-site energy; entry n-1 holds site n and its bond to n+1 (u_{N+1} = 0)"""
    c2 = cfg.coupling ** 2
    kinetic = 0.5 * ((u_next - u_curr) / cfg.dt) ** 2
    bond_next = np.diff(np.append(u_next, 0.0))
    bond_curr = np.diff(np.append(u_curr, 0.0))
    coupling = 0.5 * c2 * bond_next * bond_curr
    mass = 0.5 * cfg.mass_squared * (u_next ** 2 + u_curr ** 2) / 2.0
    potential = (cfg.potential.energy(u_next) + cfg.potential.energy(u_curr)) / 2.0
    return kinetic + coupling + mass + potential


def _boundary_bond(u_next: np.ndarray, u_curr: np.ndarray, u0_next: float, u0_curr: float,
                   cfg: ChainConfig) -> float:
    return 0.5 * cfg.coupling ** 2 * (u_next[0] - u0_next) * (u_curr[0] - u0_curr)


def discrete_energy(u_next: np.ndarray, u_curr: np.ndarray, u0_next: float, u0_curr: float,
                    cfg: ChainConfig, site_limit: Optional[int] = None) -> float:
    """
    Discrete total energy E_k built from layers k+1 and k

    Args:
        u_next: layer u^{k+1} (sites 1..N)
        u_curr: layer u^k
        u0_next: boundary value u_0^{k+1}
        u0_curr: boundary value u_0^k
        cfg: chain configuration
        site_limit: upper summation site (N0 or N); defaults to N

    Returns:
        E_k summed over sites 1..site_limit plus the boundary bond
    """
    limit = cfg.n_sites if site_limit is None else int(site_limit)
    density = _energy_density(u_next, u_curr, cfg)
    return float(density[:limit].sum() + _boundary_bond(u_next, u_curr, u0_next, u0_curr, cfg))


def energy_pair(u_next: np.ndarray, u_curr: np.ndarray, u0_next: float, u0_curr: float,
                cfg: ChainConfig) -> Tuple[float, float]:
    """(E over all N sites, E over the physical N0 sites) from one density evaluation"""
    density = _energy_density(u_next, u_curr, cfg)
    bond = _boundary_bond(u_next, u_curr, u0_next, u0_curr, cfg)
    return float(density.sum() + bond), float(density[:cfg.n_physical].sum() + bond)


def flux_in(u_curr: np.ndarray, boundary: BoundaryTriple, cfg: ChainConfig) -> float:
    """Boundary power c^2 (u_0^k - u_1^k) delta_t u_0^k / (2 dt)"""
    b_prev, b_curr, b_next = boundary
    return float(cfg.coupling ** 2 * (b_curr - u_curr[0]) * (b_next - b_prev) / (2.0 * cfg.dt))


def _rate_terms(velocity: np.ndarray, boundary_velocity: float, u_curr: np.ndarray, u0_curr: float,
                cfg: ChainConfig, alpha: np.ndarray) -> RateTerms:
    c2 = cfg.coupling ** 2
    flux = c2 * (u0_curr - u_curr[0]) * boundary_velocity
    dissipation_gamma = float(np.dot(alpha, velocity * velocity))

    # differences over n = 1..N+1 with the fixed zero site at N+1
    padded = np.concatenate(([boundary_velocity], velocity, [0.0]))
    jumps = np.diff(padded)
    beta_sum = float(np.dot(jumps, jumps)) + (velocity[0] - boundary_velocity) * boundary_velocity
    return RateTerms(
        flux_in=float(flux),
        dissipation_gamma=dissipation_gamma,
        dissipation_beta=float(cfg.beta * beta_sum),
    )


def energy_rate_terms(u_prev: np.ndarray, u_curr: np.ndarray, u_next: np.ndarray,
                      boundary: BoundaryTriple, cfg: ChainConfig,
                      alpha: Optional[np.ndarray] = None) -> RateTerms:
    """
    Flux and dissipation terms of the discrete energy-rate identity at step k

    The external-damping sum uses the full alpha_n = gamma + gamma'(n), so the
    identity also holds with the absorbing layer switched on.
    """
    alpha = damping_profile(cfg) if alpha is None else alpha
    b_prev, b_curr, b_next = boundary
    velocity = (u_next - u_prev) / (2.0 * cfg.dt)
    boundary_velocity = (b_next - b_prev) / (2.0 * cfg.dt)
    return _rate_terms(velocity, boundary_velocity, u_curr, b_curr, cfg, alpha)


def energy_rate_identity(u_prev: np.ndarray, u_curr: np.ndarray, u_next: np.ndarray,
                         boundary: BoundaryTriple, cfg: ChainConfig,
                         alpha: Optional[np.ndarray] = None) -> float:
    """Residual (E_k - E_{k-1}) / dt - RHS; near machine zero for scheme layers"""
    b_prev, b_curr, b_next = boundary
    e_curr = discrete_energy(u_next, u_curr, b_next, b_curr, cfg)
    e_prev = discrete_energy(u_curr, u_prev, b_curr, b_prev, cfg)
    terms = energy_rate_terms(u_prev, u_curr, u_next, boundary, cfg, alpha)
    return float((e_curr - e_prev) / cfg.dt - terms.rate)


def continuous_rate_reference(u_prev: np.ndarray, u_curr: np.ndarray, u_next: np.ndarray,
                              boundary: BoundaryTriple, cfg: ChainConfig,
                              alpha: Optional[np.ndarray] = None,
                              velocity: Optional[np.ndarray] = None,
                              boundary_velocity: Optional[float] = None) -> float:
    """
    Instantaneous energy rate dE/dt of the continuous-time chain at t_k

    Velocities default to the central differences (u^{k+1} - u^{k-1}) / (2 dt);
    an integrator that carries its own velocity layer (RK4) may pass it instead.
    """
    alpha = damping_profile(cfg) if alpha is None else alpha
    b_prev, b_curr, b_next = boundary
    if velocity is None:
        velocity = (u_next - u_prev) / (2.0 * cfg.dt)
    if boundary_velocity is None:
        boundary_velocity = (b_next - b_prev) / (2.0 * cfg.dt)
    return _rate_terms(velocity, boundary_velocity, u_curr, b_curr, cfg, alpha).rate


def greens_identity_check(a: Sequence[float]) -> GreensIdentity:
    """
    Evaluate both sides of the discrete Green's first identity

    sum_{n>=1} (a_{n+1} - 2 a_n + a_{n-1}) a_n = a_0 (a_0 - a_1) - sum_{n>=1} (a_n - a_{n-1})^2

    Args:
        a: a_0, a_1, ..., a_L; treated as zero beyond its length

    Returns:
        GreensIdentity with the independently summed sides
    """
    values = np.asarray(a, dtype=float)
    if values.size == 0:
        return GreensIdentity(0.0, 0.0)
    padded = np.concatenate((values, [0.0, 0.0]))

    second = padded[2:] - 2.0 * padded[1:-1] + padded[:-2]   # n = 1..L+1
    lhs = float(np.dot(second, padded[1:-1]))

    first = padded[1:] - padded[:-1]                           # n = 1..L+2
    rhs = float(values[0] * (values[0] - padded[1]) - np.sum(first[::-1] ** 2))
    return GreensIdentity(lhs=lhs, rhs=rhs)


def energy_frame(reports: Sequence[EnergyReport]) -> pd.DataFrame:
    """Per-step energy reports as a DataFrame in fixed column order"""
    columns = list(EnergyReport.__dataclass_fields__)
    if not reports:
        return pd.DataFrame(columns=columns)
    return pd.DataFrame([r.to_dict() for r in reports], columns=columns)
