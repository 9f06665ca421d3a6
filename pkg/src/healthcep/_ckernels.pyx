# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as ``healthcep._pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def sosfilt(const double[:, ::1] sos, const double[::1] x, const double[:, ::1] zi):
    cdef Py_ssize_t n_sec = sos.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, s
    cdef double xn, yn
    y_arr = np.empty(n, dtype=np.float64)
    z_arr = np.array(zi, dtype=np.float64, copy=True)
    cdef double[::1] y = y_arr
    cdef double[:, ::1] z = z_arr
    with nogil:
        for i in range(n):
            xn = x[i]
            for s in range(n_sec):
                yn = sos[s, 0] * xn + z[s, 0]
                z[s, 0] = sos[s, 1] * xn - sos[s, 4] * yn + z[s, 1]
                z[s, 1] = sos[s, 2] * xn - sos[s, 5] * yn
                xn = yn
            y[i] = xn
    return y_arr, z_arr


def zero_crossing_extrema(const double[::1] d):
    cdef Py_ssize_t n = d.shape[0]
    maxima_arr = np.empty(n, dtype=np.int64)
    minima_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] maxima = maxima_arr
    cdef cnp.int64_t[::1] minima = minima_arr
    cdef Py_ssize_t n_max = 0, n_min = 0, i, idx
    cdef Py_ssize_t plateau_start = -1
    cdef int prev = 0, s
    cdef double v
    with nogil:
        for i in range(n):
            v = d[i]
            s = (v > 0) - (v < 0)
            if s == 0:
                if plateau_start < 0:
                    plateau_start = i
                continue
            if prev != 0 and s != prev:
                idx = plateau_start if plateau_start >= 0 else i
                if prev > 0:
                    maxima[n_max] = idx
                    n_max += 1
                else:
                    minima[n_min] = idx
                    n_min += 1
            prev = s
            plateau_start = -1
    return maxima_arr[:n_max].copy(), minima_arr[:n_min].copy()


def select_peaks(const double[::1] x, const cnp.int64_t[::1] order, Py_ssize_t refractory):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k = order.shape[0]
    cdef Py_ssize_t j, i, lo, hi, m
    cdef Py_ssize_t n_acc = 0
    blocked_arr = np.zeros(n, dtype=np.uint8)
    acc_arr = np.empty(k, dtype=np.int64)
    cdef cnp.uint8_t[::1] blocked = blocked_arr
    cdef cnp.int64_t[::1] acc = acc_arr
    with nogil:
        for j in range(k):
            i = order[j]
            if blocked[i]:
                continue
            acc[n_acc] = i
            n_acc += 1
            lo = i - refractory + 1
            if lo < 0:
                lo = 0
            hi = i + refractory
            if hi > n:
                hi = n
            for m in range(lo, hi):
                blocked[m] = 1
    out = acc_arr[:n_acc].copy()
    out.sort()
    return out
