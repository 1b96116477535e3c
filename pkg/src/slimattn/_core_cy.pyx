# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-wise kernel core.

Single-pass loops over each row avoid the temporaries the NumPy fallback
allocates (masked softmax in particular touches its input ~6 times there).
Contracts match ``_core_py``; callers validate inputs and count ops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def softmax_rows(double[:, ::1] scores, mask=None):
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t c = scores.shape[1]
    out_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef cnp.uint8_t[:, ::1] mk
    cdef Py_ssize_t i, j
    cdef double hi, total, e

    if mask is None:
        for i in range(n):
            hi = scores[i, 0]
            for j in range(1, c):
                if scores[i, j] > hi:
                    hi = scores[i, j]
            total = 0.0
            for j in range(c):
                e = exp(scores[i, j] - hi)
                out[i, j] = e
                total += e
            for j in range(c):
                out[i, j] /= total
    else:
        mk = np.ascontiguousarray(mask, dtype=np.uint8)
        for i in range(n):
            hi = -np.inf
            for j in range(c):
                if mk[i, j] and scores[i, j] > hi:
                    hi = scores[i, j]
            total = 0.0
            for j in range(c):
                if mk[i, j]:
                    e = exp(scores[i, j] - hi)
                    out[i, j] = e
                    total += e
                else:
                    out[i, j] = 0.0
            for j in range(c):
                if mk[i, j]:
                    out[i, j] /= total
    return out_arr


def mean_pool_rows(double[:, ::1] m, Py_ssize_t block):
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t cols = m.shape[1]
    cdef Py_ssize_t nb = (rows + block - 1) // block
    out_arr = np.zeros((nb, cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, lo, hi
    cdef double inv

    for b in range(nb):
        lo = b * block
        hi = lo + block
        if hi > rows:
            hi = rows
        for i in range(lo, hi):
            for j in range(cols):
                out[b, j] += m[i, j]
        inv = 1.0 / (hi - lo)
        for j in range(cols):
            out[b, j] *= inv
    return out_arr


def kurtosis(double[::1] v):
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i
    cdef double mu = 0.0, m2 = 0.0, m4 = 0.0, d, d2

    for i in range(n):
        mu += v[i]
    mu /= n
    for i in range(n):
        d = v[i] - mu
        d2 = d * d
        m2 += d2
        m4 += d2 * d2
    m2 /= n
    m4 /= n
    if m2 == 0.0:
        return 0.0
    return m4 / (m2 * m2)


def colsum(double[:, ::1] m):
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t cols = m.shape[1]
    out_arr = np.zeros(cols, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j

    for i in range(rows):
        for j in range(cols):
            out[j] += m[i, j]
    return out_arr
