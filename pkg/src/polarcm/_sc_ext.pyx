# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SC kernels. Same interface and decisions as ``_sc_py``.

The batch is held position-major, ``(N, B)``, so every tree node works on
one contiguous run of ``h * B`` values and the check-node loop vectorises.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.string cimport memcpy, memset

cdef extern from "_boxplus.h" nogil:
    void pcm_boxplus_exact(const double *a, const double *b, double *out, long n)

cnp.import_array()

cdef double LLR_MAX = 40.0


cdef inline double _sat(double v) nogil:
    if v > LLR_MAX:
        return LLR_MAX
    if v < -LLR_MAX:
        return -LLR_MAX
    return v


cdef inline double _minsum(double a, double b) nogil:
    cdef double aa = fabs(a), bb = fabs(b)
    cdef double m = aa if aa < bb else bb
    return -m if (a < 0.0) != (b < 0.0) else m


cdef void _node(const double* alpha, Py_ssize_t s, Py_ssize_t B, unsigned char* beta,
                double* scratch, Py_ssize_t offset, const unsigned char* frozen,
                const unsigned char* fvals, const unsigned char* genie,
                unsigned char* out, int exact) nogil:
    cdef Py_ssize_t h, n, k
    cdef unsigned char* row
    cdef const unsigned char* truth
    if s == 1:
        row = out + offset * B
        if genie == NULL:
            if frozen[offset]:
                memset(beta, fvals[offset], B)
            else:
                for k in range(B):
                    beta[k] = alpha[k] < 0.0
            memcpy(row, beta, B)
        else:
            truth = genie + offset * B
            for k in range(B):
                beta[k] = truth[k]
                row[k] = (alpha[k] < 0.0) ^ truth[k]
        return
    h = s // 2
    n = h * B
    if exact:
        pcm_boxplus_exact(alpha, alpha + n, scratch, n)
    else:
        for k in range(n):
            scratch[k] = _minsum(alpha[k], alpha[n + k])
    _node(scratch, h, B, beta, scratch + n, offset, frozen, fvals, genie, out, exact)
    for k in range(n):
        scratch[k] = _sat(alpha[n + k] + (1.0 - 2.0 * beta[k]) * alpha[k])
    _node(scratch, h, B, beta + n, scratch + n, offset + h, frozen, fvals, genie, out, exact)
    for k in range(n):
        beta[k] ^= beta[n + k]


def _position_major(llr):
    return np.ascontiguousarray(np.clip(np.asarray(llr, dtype=np.float64), -LLR_MAX, LLR_MAX).T)


def sc_decode_batch(llr, frozen_mask, frozen_values, exact=True):
    cdef double[:, ::1] L = _position_major(llr)
    cdef const unsigned char[::1] fm = np.ascontiguousarray(frozen_mask, dtype=np.uint8)
    cdef const unsigned char[::1] fv = np.ascontiguousarray(frozen_values, dtype=np.uint8)
    cdef Py_ssize_t N = L.shape[0], B = L.shape[1]
    u_np = np.zeros((N, B), dtype=np.uint8)
    x_np = np.zeros((N, B), dtype=np.uint8)
    if B == 0 or N == 0:
        return u_np.T.copy(), x_np.T.copy()
    scratch_np = np.empty(N * B, dtype=np.float64)
    cdef unsigned char[:, ::1] U = u_np
    cdef unsigned char[:, ::1] X = x_np
    cdef double[::1] scr = scratch_np
    cdef int ex = 1 if exact else 0
    with nogil:
        _node(&L[0, 0], N, B, &X[0, 0], &scr[0], 0, &fm[0], &fv[0], NULL, &U[0, 0], ex)
    return np.ascontiguousarray(u_np.T), np.ascontiguousarray(x_np.T)


def sc_genie_batch(llr, u_true, exact=True):
    cdef double[:, ::1] L = _position_major(llr)
    cdef const unsigned char[:, ::1] T = np.ascontiguousarray(np.asarray(u_true, dtype=np.uint8).T)
    cdef Py_ssize_t N = L.shape[0], B = L.shape[1]
    err_np = np.zeros((N, B), dtype=np.uint8)
    if B == 0 or N == 0:
        return err_np.T.copy()
    beta_np = np.empty(N * B, dtype=np.uint8)
    scratch_np = np.empty(N * B, dtype=np.float64)
    cdef unsigned char[:, ::1] E = err_np
    cdef unsigned char[::1] beta = beta_np
    cdef double[::1] scr = scratch_np
    cdef int ex = 1 if exact else 0
    with nogil:
        _node(&L[0, 0], N, B, &beta[0], &scr[0], 0, NULL, NULL, &T[0, 0], &E[0, 0], ex)
    return np.ascontiguousarray(err_np.T)
