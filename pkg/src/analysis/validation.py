"""
Validation Battery
Built-in checks of the discrete identities, accuracy, stability and the
reference threshold, printed as a pass/fail report
"""
import numpy as np
from typing import Callable, List, Optional
from dataclasses import dataclass
import logging
import time

from ..config.settings import IDENTITY_RELATIVE_TOLERANCE, GREENS_RELATIVE_TOLERANCE
from ..chain.model import ChainConfig, SchemeKind, PotentialKind, check_stability, threshold_As
from ..chain.energy import greens_identity_check
from ..chain.stepper import run
from ..chain.errors import SimulationError
from .experiments import (
    compare_integrators,
    convergence_study,
    evanescent_envelope,
    find_threshold,
    linear_problem,
)

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    """Outcome of one battery entry"""
    name: str
    passed: bool
    measured: str
    expected: str
    seconds: float = 0.0

    def line(self) -> str:
        icon = "✅" if self.passed else "❌"
        return f"{icon} {self.name}: {self.measured} (expected {self.expected}) [{self.seconds:.1f}s]"


def check_greens_identity(samples: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        length = int(rng.integers(1, 64))
        values = rng.normal(size=length)
        identity = greens_identity_check(values)
        scale = 1.0 + float(np.dot(values, values))
        worst = max(worst, abs(identity.lhs - identity.rhs) / scale)

    geometric = greens_identity_check(0.5 ** np.arange(60))
    geometric_error = max(abs(geometric.lhs - 1.0 / 6.0), abs(geometric.rhs - 1.0 / 6.0))
    passed = worst <= GREENS_RELATIVE_TOLERANCE and geometric_error <= 1e-14
    return CheckResult("Green's identity", passed,
                       f"worst rel {worst:.2e}, geometric {geometric_error:.1e}",
                       f"<= {GREENS_RELATIVE_TOLERANCE:g} and 1/6 to 1e-14")


def check_energy_identity(cfg: ChainConfig, t_final: float = 50.0) -> CheckResult:
    worst = 0.0
    for beta in (0.0, 0.1):
        for gamma in (0.0, 0.03):
            trial = cfg.with_updates(beta=beta, gamma=gamma, kappa=0.0, amplitude=1.0, t_final=t_final,
                                     scheme=SchemeKind.NEWTON)
            energy = run(trial).energy
            scale = np.maximum(1.0, energy['E_total'].abs())
            worst = max(worst, float((energy['identity_residual'].abs() / scale).max()))
    return CheckResult("Discrete energy identity", worst <= IDENTITY_RELATIVE_TOLERANCE,
                       f"max scaled residual {worst:.2e}", f"<= {IDENTITY_RELATIVE_TOLERANCE:g}")


def check_convergence(cfg: ChainConfig, t_final: float = 20.0) -> CheckResult:
    base = linear_problem(cfg).with_updates(amplitude=0.5, t_final=t_final, scheme=SchemeKind.NEWTON)
    study = convergence_study(base, (0.05, 0.025, 0.0125), reference='exact')
    orders = study.orders
    passed = bool(np.all((orders >= 1.8) & (orders <= 2.2)))
    return CheckResult("Second-order convergence", passed,
                       "p = " + ", ".join(f"{p:.3f}" for p in orders), "p in [1.8, 2.2]")


def check_rk4_order(cfg: ChainConfig, t_final: float = 10.0) -> CheckResult:
    base = cfg.with_updates(scheme=SchemeKind.RK4, ramp_time=0.0, amplitude=0.5, t_final=t_final)
    study = convergence_study(base, (0.05, 0.025, 0.0125), reference='rk4')
    orders = study.orders
    passed = bool(np.all((orders >= 3.5) & (orders <= 4.5)))
    return CheckResult("RK4 self-test", passed,
                       "p = " + ", ".join(f"{p:.3f}" for p in orders), "p in [3.5, 4.5]")


def _blows_up(cfg: ChainConfig) -> bool:
    try:
        run(cfg, record_energy=False)
    except SimulationError as e:
        logger.info(f"Detected failure: {e}")
        return True
    return False


def check_stability_violation(cfg: ChainConfig, unstable_dt: float = 0.3, t_final: float = 50.0) -> CheckResult:
    trial = cfg.with_updates(amplitude=1.0, t_final=t_final, scheme=SchemeKind.NEWTON)
    stable = trial.with_updates(dt=0.05)
    unstable = trial.with_updates(dt=unstable_dt)
    expect_blowup = not check_stability(unstable).satisfied

    stable_blew = _blows_up(stable)
    unstable_blew = _blows_up(unstable)
    passed = (not stable_blew) and unstable_blew == expect_blowup
    return CheckResult(
        f"Stability (dt={unstable_dt:g})", passed,
        f"dt=0.05 {'blew up' if stable_blew else 'stable'}, dt={unstable_dt:g} "
        f"{'blew up' if unstable_blew else 'stable'}",
        f"dt=0.05 stable, dt={unstable_dt:g} {'blow-up' if expect_blowup else 'stable'}",
    )


def check_evanescent(cfg: ChainConfig) -> CheckResult:
    trial = cfg.with_updates(amplitude=0.01, frequency=0.9, scheme=SchemeKind.NEWTON)
    frame = evanescent_envelope(trial, (20, 40, 60))
    worst = float(frame['relative_error'].max())
    return CheckResult("Evanescent envelope", worst <= 0.05,
                       f"max rel error {worst:.3%} at sites 20, 40, 60", "<= 5%")


def check_threshold(cfg: ChainConfig) -> CheckResult:
    trial = cfg.with_updates(potential=PotentialKind.SINE_GORDON, beta=0.0, gamma=0.0, mass_squared=0.0,
                             scheme=SchemeKind.NEWTON)
    record = find_threshold(trial, 0.9)
    a_s = threshold_As(0.9, trial)
    passed = (not record.flagged) and 1.77 <= record.a_thr <= 1.79 and abs(record.a_thr - a_s) <= 0.05
    return CheckResult("Threshold at Omega=0.9", passed,
                       f"A_thr = {record.a_thr:.4f}, A_s = {a_s:.4f}", "A_thr in [1.77, 1.79], |A_thr - A_s| <= 0.05")


def check_cross_integrator(cfg: ChainConfig) -> CheckResult:
    trial = cfg.with_updates(amplitude=1.0, frequency=0.9, t_final=100.0, scheme=SchemeKind.NEWTON)
    frame = compare_integrators(trial, (0.05, 0.025))
    ratio = float(frame['ratio'].iloc[-1])
    return CheckResult("Newton vs RK4", ratio >= 3.0,
                       f"deviation ratio {ratio:.2f} under halving", ">= 3 (second order)")


def run_battery(cfg: Optional[ChainConfig] = None, quick: bool = False,
                unstable_dt: float = 0.3) -> List[CheckResult]:
    """
    Run the validation battery

    Args:
        cfg: base configuration (defaults to the desk-scale chain); every
            check except the RK4 self-test runs the Newton scheme
        quick: only the identity and stability checks
        unstable_dt: step for the stability case; blow-up is expected
            exactly when it violates the stability inequality

    Returns:
        One CheckResult per check, in execution order
    """
    cfg = cfg or ChainConfig()
    checks: List[Callable[[], CheckResult]] = [
        check_greens_identity,
        lambda: check_energy_identity(cfg, t_final=10.0 if quick else 50.0),
        lambda: check_stability_violation(cfg, unstable_dt),
    ]
    if not quick:
        checks += [
            lambda: check_convergence(cfg),
            lambda: check_rk4_order(cfg),
            lambda: check_evanescent(cfg),
            lambda: check_threshold(cfg),
            lambda: check_cross_integrator(cfg),
        ]

    results = []
    for check in checks:
        started = time.time()
        try:
            result = check()
        except SimulationError as e:
            logger.error(f"Validation check raised: {e}")
            result = CheckResult(getattr(check, '__name__', 'check'), False, str(e), "no simulation error")
        result.seconds = time.time() - started
        logger.info(result.line())
        results.append(result)
    return results


def print_report(results: List[CheckResult]) -> bool:
    """Print one line per check plus a summary; returns True when all passed"""
    for result in results:
        print(result.line())
    passed = sum(r.passed for r in results)
    all_passed = passed == len(results)
    print(f"\n{'✅' if all_passed else '❌'} {passed}/{len(results)} checks passed")
    return all_passed
