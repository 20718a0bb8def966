"""
Exceptions raised by the chain model and integrators
"""
from typing import Optional


class ChainConfigError(ValueError):
    """Invalid chain parameter"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class BandGapError(ValueError):
    """Driving frequency outside the forbidden band gap"""

    def __init__(self, frequency: float, gap_edge: float):
        self.frequency = frequency
        self.gap_edge = gap_edge
        super().__init__(
            f"frequency {frequency:g} is outside the band gap (0, {gap_edge:.12g})"
        )


class SimulationError(RuntimeError):
    """Integrator failure at a given step"""

    def __init__(self, message: str, step: int, time: float):
        self.step = step
        self.time = time
        super().__init__(f"{message} (step {step}, t={time:.6g})")


class StepConvergenceError(SimulationError):
    """Newton iteration did not converge"""

    def __init__(self, step: int, time: float, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Newton did not converge after {iterations} iterations, "
            f"last correction {residual:.3e}",
            step,
            time,
        )


class BlowUpError(SimulationError):
    """Non-finite or runaway layer values"""

    def __init__(self, step: int, time: float, max_abs: Optional[float] = None):
        self.max_abs = max_abs
        detail = "non-finite values" if max_abs is None else f"max |u| = {max_abs:.3e}"
        super().__init__(f"Solution blew up: {detail}", step, time)


class DegenerateMatrixError(SimulationError):
    """Zero pivot in the tridiagonal elimination"""

    def __init__(self, step: int, time: float, row: int):
        self.row = row
        super().__init__(f"Zero pivot in row {row}", step, time)
