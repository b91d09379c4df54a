"""Cyclic Jacobi eigenvalues for small symmetric matrices."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["NumericError", "jacobi_eigenvalues", "lambda_max", "spectral_norm"]


class NumericError(ArithmeticError):
    pass


def jacobi_eigenvalues(S, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending.

    Sweeps rotate away every off-diagonal entry in turn until the
    off-diagonal Frobenius mass drops below ``tol`` times the total.
    """
    a = np.array(S, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries")
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise NumericError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    total = math.sqrt(float(np.sum(a * a)))
    if total == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)) * 2.0)
        if off <= tol * total:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) <= 1e-300 * max(abs(diff), 1.0):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = diff / (2.0 * apq)
                if abs(theta) > 1e150:
                    # theta^2 would overflow; t -> 1/(2 theta) in this limit
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
    raise NumericError("Jacobi iteration did not converge")


def lambda_max(S) -> float:
    return float(jacobi_eigenvalues(S)[-1])


def spectral_norm(M) -> float:
    """Largest singular value, ``sqrt(lambda_max(M^T M))``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return math.sqrt(max(lambda_max(M.T @ M), 0.0))
