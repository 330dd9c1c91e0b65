"""Numpy fallback for the dense information-form kernels.

Same contract as the compiled backend in ``_dense.pyx``: factor a symmetric
positive-definite precision matrix, solve against the factor, and recover the
diagonal of its inverse. Kept free of any compiled code from this package so
an environment without a C toolchain still runs everything.
"""

import numpy as np
from scipy.linalg import solve_triangular

BACKEND = "python"

# Same relative pivot floor as the compiled backend; keeps the two in
# agreement about what counts as loss of positive definiteness.
PIVOT_RTOL = 1e-12


def chol_lower(H: np.ndarray) -> tuple[np.ndarray, int]:
    """Lower Cholesky factor of H.

    Returns (L, -1) on success or (garbage, k) where k is the index of the
    first failing pivot. No jitter is ever added; failure is the
    positive-definiteness check.
    """
    H = np.ascontiguousarray(H, dtype=np.float64)
    # Cheap pre-pass: a variable touched by no factor shows up as an all-zero
    # row, and should be named rather than whatever pivot the factorization
    # happens to break on first.
    diag = np.einsum("ii->i", H)
    bad = np.flatnonzero(~(diag > 0.0))
    if bad.size:
        return H, int(bad[0])
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return H, _failing_pivot(H)
    # LAPACK only requires pivots > 0; apply the shared relative floor.
    weak = np.flatnonzero(~(np.einsum("ii->i", L) ** 2 > PIVOT_RTOL * diag))
    if weak.size:
        return L, int(weak[0])
    return L, -1


def _failing_pivot(H: np.ndarray) -> int:
    """Index of the first failing pivot of a failed factorization."""
    n = H.shape[0]
    L = H.astype(np.float64, copy=True)
    for j in range(n):
        pivot = L[j, j] - np.dot(L[j, :j], L[j, :j])
        if not pivot > PIVOT_RTOL * L[j, j]:
            return j
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1 :, j] = (L[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return n - 1  # unreachable unless numpy and the loop disagree on roundoff


def chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L Lᵀ) x = b given the lower factor L."""
    y = solve_triangular(L, b, lower=True)
    return solve_triangular(L, y, lower=True, trans="T")


def marginal_variances(L: np.ndarray) -> np.ndarray:
    """diag((L Lᵀ)⁻¹) via one triangular solve per column.

    (H⁻¹)_ii = ‖L⁻¹ e_i‖², so the columns of L⁻¹ are enough; never forms H⁻¹.
    """
    n = L.shape[0]
    Linv = solve_triangular(L, np.eye(n), lower=True)
    return np.einsum("ij,ij->j", Linv, Linv)
