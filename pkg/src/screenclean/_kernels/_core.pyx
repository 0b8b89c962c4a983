# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot kernels in ``pynative.py``.

Same contracts, loop-level C implementations. The pairwise statistic
exploits symmetry (i < j twice plus n diagonal units); coordinate descent
runs on a Fortran-ordered design so column access is contiguous.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


def hz_pair_stat(tx, ty, double beta):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(tx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(ty, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("tx and ty must be 1-d arrays of equal length")
    cdef Py_ssize_t n = x.shape[0]
    cdef double b2 = beta * beta
    cdef double c_pair = -0.5 * b2
    cdef double c_single = -0.5 * b2 / (1.0 + b2)
    cdef double s_pair = 0.0, s_single = 0.0
    cdef double dx, dy
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            s_pair += exp(c_pair * (dx * dx + dy * dy))
        s_single += exp(c_single * (x[i] * x[i] + y[i] * y[i]))
    cdef double term1 = (2.0 * s_pair + n) / (<double>n * n)
    cdef double term2 = 2.0 / (n * (1.0 + b2)) * s_single
    cdef double term3 = 1.0 / (1.0 + 2.0 * b2)
    return term1 - term2 + term3


def hz_stats_matrix(tx, ty, double beta):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.asarray(tx, dtype=np.float64, order="F")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(ty, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    if y.shape[0] != n:
        raise ValueError("ty length must match rows of tx")
    cdef double b2 = beta * beta
    cdef double c_pair = -0.5 * b2
    cdef double c_single = -0.5 * b2 / (1.0 + b2)
    cdef double term3 = 1.0 / (1.0 + 2.0 * b2)
    # response part of the pairwise kernel is shared across features
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ey = np.empty(n * (n - 1) // 2, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ey1 = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, k, idx
    cdef double dy, dx, s_pair, s_single, xi
    idx = 0
    for i in range(n):
        for j in range(i + 1, n):
            dy = y[i] - y[j]
            ey[idx] = c_pair * dy * dy
            idx += 1
        ey1[i] = c_single * y[i] * y[i]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(p, dtype=np.float64)
    for k in range(p):
        s_pair = 0.0
        s_single = 0.0
        idx = 0
        for i in range(n):
            xi = x[i, k]
            for j in range(i + 1, n):
                dx = xi - x[j, k]
                s_pair += exp(c_pair * dx * dx + ey[idx])
                idx += 1
            s_single += exp(c_single * xi * xi + ey1[i])
        out[k] = (2.0 * s_pair + n) / (<double>n * n) \
            - 2.0 / (n * (1.0 + b2)) * s_single + term3
    return out


def cd_solve(a, b, double lam, beta, long max_iter, double tol):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] af = np.asarray(a, dtype=np.float64, order="F")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.asarray(beta, dtype=np.float64)
    cdef Py_ssize_t n = af.shape[0]
    cdef Py_ssize_t m = af.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] col_nrm2 = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] resid = bv - af @ np.asarray(w)
    cdef Py_ssize_t i, j
    cdef double s, rho, old, new, max_delta, scale, diff
    cdef long it = 0
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += af[i, j] * af[i, j]
        col_nrm2[j] = s / n
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(m):
            if col_nrm2[j] <= 0.0:
                continue
            old = w[j]
            rho = 0.0
            for i in range(n):
                rho += af[i, j] * resid[i]
            rho = rho / n + col_nrm2[j] * old
            if rho > lam:
                new = (rho - lam) / col_nrm2[j]
            elif rho < -lam:
                new = (rho + lam) / col_nrm2[j]
            else:
                new = 0.0
            if new != old:
                diff = old - new
                for i in range(n):
                    resid[i] += af[i, j] * diff
                w[j] = new
                if fabs(diff) > max_delta:
                    max_delta = fabs(diff)
        scale = 1.0
        for j in range(m):
            if fabs(w[j]) > scale:
                scale = fabs(w[j])
        if max_delta <= tol * scale:
            break
    if w is not beta:
        beta[...] = w
    return it
