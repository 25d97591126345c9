"""Dense SPD linear algebra shared by every learner.

All covariance/design matrices in this package are lambda*I-regularized and
therefore symmetric positive definite by construction. Everything goes through
Cholesky; a factorization failure signals a bug upstream and is raised, never
silently repaired. Matrices are tiny (d <= 64), so factors are recomputed per
call instead of cached.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular


class NotPositiveDefinite(Exception):
    """Cholesky failed: the matrix is not (numerically) positive definite."""


class DimensionMismatch(Exception):
    """Operands have incompatible shapes."""


def cholesky_lower(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix.

    Raises NotPositiveDefinite when a pivot is non-positive.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b for SPD `a` via Cholesky."""
    b = np.asarray(b, dtype=float)
    lo = cholesky_lower(a)
    if b.shape[0] != lo.shape[0]:
        raise DimensionMismatch(f"matrix dim {lo.shape[0]} vs vector dim {b.shape[0]}")
    y = solve_triangular(lo, b, lower=True)
    return solve_triangular(lo.T, y, lower=False)


def quad_norm(a: np.ndarray, x: np.ndarray) -> float:
    """Inverse-matrix norm sqrt(x^T a^{-1} x) for SPD `a`."""
    x = np.asarray(x, dtype=float)
    lo = cholesky_lower(a)
    if x.shape[0] != lo.shape[0]:
        raise DimensionMismatch(f"matrix dim {lo.shape[0]} vs vector dim {x.shape[0]}")
    y = solve_triangular(lo, x, lower=True)
    return float(np.sqrt(y @ y))


def quad_norm_many(a: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Row-wise sqrt(x^T a^{-1} x) for a stack of vectors, one factorization."""
    xs = np.asarray(xs, dtype=float)
    lo = cholesky_lower(a)
    if xs.ndim != 2 or xs.shape[1] != lo.shape[0]:
        raise DimensionMismatch(f"matrix dim {lo.shape[0]} vs rows of shape {xs.shape}")
    y = solve_triangular(lo, xs.T, lower=True)
    return np.sqrt(np.einsum("ij,ij->j", y, y))


def logdet(a: np.ndarray) -> float:
    """Log determinant of an SPD matrix via the Cholesky diagonal."""
    lo = cholesky_lower(a)
    return float(2.0 * np.sum(np.log(np.diag(lo))))
