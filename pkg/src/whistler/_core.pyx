# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: sparse valid cross-correlation and sliding CFAR noise estimates.

OS and TM keep the 2N noise cells in a sorted buffer that is updated
incrementally (two replacements per step) instead of
re-sorting every window.
"""

import numpy as np
cimport numpy as cnp
from libc.string cimport memmove
from libc.math cimport NAN

from .errors import InvalidArgument

cnp.import_array()


def _check(Py_ssize_t n, Py_ssize_t g, Py_ssize_t a=0, Py_ssize_t b=1):
    if n < 1 or g < 0:
        raise InvalidArgument("need n >= 1 and g >= 0")
    if not 0 <= a < b <= 2 * n:
        raise InvalidArgument("order statistic or trim outside the noise window")


def xcorr_valid(spec, kernel):
    cdef const double[:, ::1] s = np.ascontiguousarray(spec, dtype=np.float64)
    cdef const double[:, ::1] kmat = np.ascontiguousarray(kernel, dtype=np.float64)
    if kmat.shape[0] != s.shape[0] or kmat.shape[1] > s.shape[1]:
        raise InvalidArgument("kernel must have the spectrogram's rows and fit in its length")
    cdef Py_ssize_t n_out = s.shape[1] - kmat.shape[1] + 1
    out_arr = np.zeros(n_out)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, tau, j
    cdef double w
    for r in range(kmat.shape[0]):
        for tau in range(kmat.shape[1]):
            w = kmat[r, tau]
            if w == 0.0:
                continue
            for j in range(n_out):
                out[j] += w * s[r, tau + j]
    return out_arr


cdef inline Py_ssize_t _lower_bound(double* buf, Py_ssize_t size, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = size, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if buf[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline void _replace(double* buf, Py_ssize_t size, double old, double new) noexcept nogil:
    # overwrite one copy of ``old`` with ``new`` and restore order by shifting
    cdef Py_ssize_t i = _lower_bound(buf, size, old)
    if new > old:
        while i + 1 < size and buf[i + 1] < new:
            buf[i] = buf[i + 1]
            i += 1
    else:
        while i > 0 and buf[i - 1] > new:
            buf[i] = buf[i - 1]
            i -= 1
    buf[i] = new


cdef inline void _insert(double* buf, Py_ssize_t size, double v) noexcept nogil:
    cdef Py_ssize_t i = _lower_bound(buf, size, v)
    memmove(buf + i + 1, buf + i, (size - i) * sizeof(double))
    buf[i] = v


cdef void _sorted_sweep(const double[::1] p, Py_ssize_t n, Py_ssize_t g, int mode,
                        Py_ssize_t a, Py_ssize_t b, double[::1] out, double[::1] buf) noexcept nogil:
    # mode 0: order statistic buf[a]; mode 1: mean of buf[a:b]
    cdef Py_ssize_t half = n + g, size = 2 * n
    cdef Py_ssize_t i, m, first = half, last = p.shape[0] - half
    cdef double acc
    if last <= first:
        return
    m = 0
    for i in range(first - half, first - g):
        _insert(&buf[0], m, p[i])
        m += 1
    for i in range(first + g + 1, first + half + 1):
        _insert(&buf[0], m, p[i])
        m += 1
    i = first
    while True:
        if mode == 0:
            out[i] = buf[a]
        else:
            acc = 0.0
            for m in range(a, b):
                acc += buf[m]
            out[i] = acc / (b - a)
        if i + 1 >= last:
            break
        _replace(&buf[0], size, p[i - half], p[i - g])
        _replace(&buf[0], size, p[i + g + 1], p[i + half + 1])
        i += 1


def cfar_ca(power, Py_ssize_t n, Py_ssize_t g):
    _check(n, g)
    cdef const double[::1] p = np.ascontiguousarray(power, dtype=np.float64)
    out_arr = np.full(p.shape[0], np.nan)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t half = n + g, i, m
    cdef double acc
    with nogil:
        for i in range(half, p.shape[0] - half):
            acc = 0.0
            for m in range(i - half, i - g):
                acc += p[m]
            for m in range(i + g + 1, i + half + 1):
                acc += p[m]
            out[i] = acc / (2 * n)
    return out_arr


def cfar_os(power, Py_ssize_t n, Py_ssize_t g, Py_ssize_t k):
    _check(n, g, k - 1, k)
    cdef const double[::1] p = np.ascontiguousarray(power, dtype=np.float64)
    out_arr = np.full(p.shape[0], np.nan)
    cdef double[::1] out = out_arr
    cdef double[::1] buf = np.empty(2 * n)
    with nogil:
        _sorted_sweep(p, n, g, 0, k - 1, k, out, buf)
    return out_arr


def cfar_tm(power, Py_ssize_t n, Py_ssize_t g, Py_ssize_t t_s, Py_ssize_t t_l):
    _check(n, g, t_s, 2 * n - t_l)
    cdef const double[::1] p = np.ascontiguousarray(power, dtype=np.float64)
    out_arr = np.full(p.shape[0], np.nan)
    cdef double[::1] out = out_arr
    cdef double[::1] buf = np.empty(2 * n)
    with nogil:
        _sorted_sweep(p, n, g, 1, t_s, 2 * n - t_l, out, buf)
    return out_arr
