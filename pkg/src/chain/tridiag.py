"""
Tridiagonal elimination (Crout / Thomas) without pivoting
"""
import numpy as np
from numba import njit

from .errors import DegenerateMatrixError


@njit(cache=True)
def solve_tridiagonal(lower, diag, upper, rhs, out):
    """
    Solve a tridiagonal system in place using the Thomas algorithm.

    Parameters
    ----------
    lower : ndarray
        Sub-diagonal as a length n array (lower[0] is ignored).
    diag : ndarray
        Main diagonal, length n.
    upper : ndarray
        Super-diagonal as a length n array (upper[n-1] is ignored).
    rhs : ndarray
        Right-hand side, length n.
    out : ndarray
        Receives the solution, length n.

    Returns
    -------
    int
        -1 on success, otherwise the row with a zero pivot.
    """
    n = rhs.shape[0]
    factor = np.empty(n)

    pivot = diag[0]
    if pivot == 0.0:
        return 0
    factor[0] = upper[0] / pivot if n > 1 else 0.0
    out[0] = rhs[0] / pivot

    for i in range(1, n):
        pivot = diag[i] - lower[i] * factor[i - 1]
        if pivot == 0.0:
            return i
        factor[i] = upper[i] / pivot if i < n - 1 else 0.0
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / pivot

    for i in range(n - 2, -1, -1):
        out[i] -= factor[i] * out[i + 1]

    return -1


def thomas_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray,
                 step: int = 0, time: float = 0.0) -> np.ndarray:
    """Python-level wrapper raising DegenerateMatrixError on a zero pivot"""
    out = np.empty_like(rhs, dtype=float)
    row = solve_tridiagonal(
        np.ascontiguousarray(lower, dtype=float),
        np.ascontiguousarray(diag, dtype=float),
        np.ascontiguousarray(upper, dtype=float),
        np.ascontiguousarray(rhs, dtype=float),
        out,
    )
    if row >= 0:
        raise DegenerateMatrixError(step, time, row)
    return out


def is_diagonally_dominant(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray) -> bool:
    """Strict row diagonal dominance |b_n| > |a_n| + |c_n|"""
    off = np.abs(lower).copy()
    off[0] = 0.0
    up = np.abs(upper).copy()
    up[-1] = 0.0
    return bool(np.all(np.abs(diag) > off + up))
