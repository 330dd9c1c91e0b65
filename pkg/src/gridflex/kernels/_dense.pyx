# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense kernels for information-form Gaussian inference.

Hand-rolled Cholesky, triangular solves and inverse-diagonal recovery. Sized
for the graphs this package builds (tens to a few hundred variables), where
tight C loops beat BLAS dispatch overhead.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "compiled"

# Relative pivot floor: a pivot this far below the original diagonal entry is
# treated as loss of positive definiteness, not as a valid (garbage) factor.
cdef double PIVOT_RTOL = 1e-12


def chol_lower(H):
    """Lower Cholesky factor of H. Returns (L, -1) or (partial, fail_index)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] L = np.array(H, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = L.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s, pivot, diag

    for j in range(n):
        s = 0.0
        for k in range(j):
            s += L[j, k] * L[j, k]
        diag = L[j, j]
        pivot = diag - s
        if not pivot > PIVOT_RTOL * diag:  # catches <= 0 and NaN
            return L, j
        pivot = sqrt(pivot)
        L[j, j] = pivot
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j):
                s += L[i, k] * L[j, k]
            L[i, j] = (L[i, j] - s) / pivot
    # zero the strict upper triangle so both backends return identical shapes
    for i in range(n):
        for j in range(i + 1, n):
            L[i, j] = 0.0
    return L, -1


def chol_solve(L, b):
    """Solve (L Lᵀ) x = b by forward then backward substitution."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Lm = np.ascontiguousarray(L, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.array(b, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = Lm.shape[0]
    cdef Py_ssize_t i, k
    cdef double s

    for i in range(n):
        s = x[i]
        for k in range(i):
            s -= Lm[i, k] * x[k]
        x[i] = s / Lm[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= Lm[k, i] * x[k]
        x[i] = s / Lm[i, i]
    return x


def marginal_variances(L):
    """diag((L Lᵀ)⁻¹): one forward solve L y = e_i per column, then ‖y‖²."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Lm = np.ascontiguousarray(L, dtype=np.float64)
    cdef Py_ssize_t n = Lm.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double s, acc

    for i in range(n):
        # y = L⁻¹ e_i is zero below... above row i, so start the solve there.
        acc = 0.0
        for j in range(i, n):
            if j == i:
                s = 1.0
            else:
                s = 0.0
            for k in range(i, j):
                s -= Lm[j, k] * y[k]
            y[j] = s / Lm[j, j]
            acc += y[j] * y[j]
        out[i] = acc
    return out
