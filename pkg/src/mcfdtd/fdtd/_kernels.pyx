# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled stencil kernel; mirrors ``_fallback.apply_term`` operation order."""

import numpy as np

from ..multicomplex import sign_table

cdef enum:
    MAXC = 256


def apply_term(double[:, :, :, ::1] tgt, t0, double[:, :, :, ::1] src, s0,
               int axis, double sign, coef):
    cdef const double[:, :, ::1] re = coef.re
    cdef const int[:, :, ::1] pid = coef.pid
    cdef const double[:, ::1] pval = coef.pval
    cdef Py_ssize_t ni = re.shape[0], nj = re.shape[1], nk = re.shape[2]
    cdef Py_ssize_t nc = tgt.shape[3]
    cdef Py_ssize_t ti0 = t0[0], tj0 = t0[1], tk0 = t0[2]
    cdef Py_ssize_t si0 = s0[0], sj0 = s0[1], sk0 = s0[2]
    cdef Py_ssize_t di = 1 if axis == 0 else 0
    cdef Py_ssize_t dj = 1 if axis == 1 else 0
    cdef Py_ssize_t dk = 1 if axis == 2 else 0
    cdef double d[MAXC]
    cdef double tmp[MAXC]
    cdef Py_ssize_t i, j, k, c, s, t, p
    cdef double r, cs
    cdef const double[:, ::1] sg = np.ascontiguousarray(sign_table(nc), dtype=np.float64)
    with nogil:
        for i in range(ni):
            for j in range(nj):
                for k in range(nk):
                    for c in range(nc):
                        d[c] = src[si0 + i + di, sj0 + j + dj, sk0 + k + dk, c] - src[si0 + i, sj0 + j, sk0 + k, c]
                    r = re[i, j, k]
                    for c in range(nc):
                        tmp[c] = r * d[c]
                    p = pid[i, j, k]
                    if p >= 0:
                        for s in range(1, nc):
                            cs = pval[p, s]
                            for t in range(nc):
                                tmp[s ^ t] += (sg[s, t] * cs) * d[t]
                    for c in range(nc):
                        tgt[ti0 + i, tj0 + j, tk0 + k, c] += sign * tmp[c]
