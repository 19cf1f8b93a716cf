# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring entrag.core._numpy_impl.

Single-pass fused loops over vocabulary-length vectors; these dominate the
per-token cost of ensemble decoding, so they are worth compiling.  Inputs are
validated float64 C-contiguous arrays (see entrag.core wrappers); -inf marks
masked tokens and must flow through without generating NaN.
"""

from libc.math cimport exp, log, INFINITY

import numpy as np

BACKEND_NAME = "compiled"


cdef double _vmax(const double[::1] x) noexcept nogil:
    cdef double m = -INFINITY
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        if x[i] > m:
            m = x[i]
    return m


cdef double _lse(const double[::1] x, double m) noexcept nogil:
    # m = max(x), finite by caller contract; exp(-inf - m) underflows to 0.
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        s += exp(x[i] - m)
    return m + log(s)


def log_softmax(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double lse = _lse(x, _vmax(x))
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = x[i] - lse
    return out_arr


def softmax(const double[::1] x, double temperature):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double m = -INFINITY
    cdef double s = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = x[i] / temperature
            if out[i] > m:
                m = out[i]
        for i in range(n):
            out[i] = exp(out[i] - m)
            s += out[i]
        for i in range(n):
            out[i] /= s
    return out_arr


def entropy(const double[::1] p):
    cdef double h = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(p.shape[0]):
            if p[i] > 0.0:
                h -= p[i] * log(p[i])
    return h


def entropy_from_logprobs(const double[::1] lp):
    cdef double h = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(lp.shape[0]):
            if lp[i] != -INFINITY:
                h -= exp(lp[i]) * lp[i]
    return h


def log_softmax_with_entropy(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double lse = _lse(x, _vmax(x))
    cdef double h = 0.0
    cdef double y
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            y = x[i] - lse
            out[i] = y
            if y != -INFINITY:
                h -= exp(y) * y
    return out_arr, h


def jsd(const double[::1] p, const double[::1] q):
    cdef double a = 0.0
    cdef double b = 0.0
    cdef double m
    cdef Py_ssize_t i
    with nogil:
        for i in range(p.shape[0]):
            m = 0.5 * (p[i] + q[i])
            if p[i] > 0.0:
                a += p[i] * log(p[i] / m)
            if q[i] > 0.0:
                b += q[i] * log(q[i] / m)
    return 0.5 * (a + b)


def weighted_sum(const double[:, ::1] mat, const double[::1] w):
    # Fixed ascending-row accumulation order; zero-weight rows are skipped so
    # masked (-inf) entries of ignored members cannot poison the sum.
    cdef Py_ssize_t rows = mat.shape[0]
    cdef Py_ssize_t n = mat.shape[1]
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef double wk
    cdef Py_ssize_t k, i
    with nogil:
        for k in range(rows):
            wk = w[k]
            if wk != 0.0:
                for i in range(n):
                    out[i] += wk * mat[k, i]
    return out_arr
