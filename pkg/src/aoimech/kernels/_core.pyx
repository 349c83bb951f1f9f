# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled allocation kernel for the power AoI cost ``g(age) = age**alpha``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, INFINITY

cnp.import_array()


cdef inline double _reduction_at_rate(double F, double alpha) nogil:
    # M(1/F) = alpha/(alpha+1) * F**-(alpha+1)
    if F <= 0.0:
        return INFINITY
    if F == INFINITY:
        return 0.0
    return alpha / (alpha + 1.0) * pow(F, -(alpha + 1.0))


cdef inline double _rate_for_virtual_cost(double v, double alpha) nogil:
    if v <= 0.0:
        return INFINITY
    return 1.0 / pow((1.0 + 1.0 / alpha) * v, 1.0 / (1.0 + alpha))


def waterfill_power(double[:, ::1] phi, double[::1] fmax, double alpha, double tol=1e-12):
    """Same contract as ``_fallback.waterfill`` with a power AoI cost."""
    cdef Py_ssize_t n = phi.shape[0]
    cdef Py_ssize_t I = phi.shape[1]
    f_arr = np.zeros((n, I), dtype=np.float64)
    F_arr = np.zeros(n, dtype=np.float64)
    m_arr = np.full(n, -1, dtype=np.int64)
    cdef double[:, ::1] f = f_arr
    cdef double[::1] Fout = F_arr
    cdef long long[::1] marg = m_arr
    cdef Py_ssize_t[::1] order = np.empty(I, dtype=np.intp)
    cdef double[::1] B = np.empty(I + 1, dtype=np.float64)
    cdef Py_ssize_t r, k, j, t
    cdef double hb, nxt, F, cand, v, rest
    with nogil:
        for r in range(n):
            # stable insertion sort of source indices by virtual cost
            for k in range(I):
                order[k] = k
            for k in range(1, I):
                t = order[k]
                v = phi[r, t]
                j = k - 1
                while j >= 0 and phi[r, order[j]] > v:
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = t
            B[0] = 0.0
            for k in range(I):
                B[k + 1] = B[k] + fmax[order[k]]
            F = 0.0
            for k in range(I):
                hb = _reduction_at_rate(B[k + 1], alpha)
                v = phi[r, order[k]]
                if v > hb + tol:
                    cand = _rate_for_virtual_cost(v, alpha)
                    if cand < B[k]:
                        cand = B[k]
                    if cand > B[k + 1]:
                        cand = B[k + 1]
                    F = cand
                    marg[r] = order[k]
                    break
                if k + 1 < I:
                    nxt = phi[r, order[k + 1]]
                else:
                    nxt = INFINITY
                if hb <= nxt + tol:
                    F = B[k + 1]
                    break
            Fout[r] = F
            for k in range(I):
                rest = F - B[k]
                if rest < 0.0:
                    rest = 0.0
                if rest > fmax[order[k]]:
                    rest = fmax[order[k]]
                f[r, order[k]] = rest
    return f_arr, F_arr, m_arr
