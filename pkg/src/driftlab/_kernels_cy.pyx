# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Euler-Maruyama stepping and Haar accumulation.

Arithmetic (op order, no FP contraction) matches the numpy fallback in
``_kernels_py`` so both backends are bitwise-interchangeable.
"""

from libc.math cimport floor, isfinite, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def em_chunk(double[::1] x, double[:, ::1] noise, double delta,
             double noise_scale, cnp.ndarray table, int mode,
             double[:, ::1] out):
    """See driftlab._kernels_py.em_chunk for the contract."""
    cdef Py_ssize_t n = noise.shape[0]
    cdef Py_ssize_t d = noise.shape[1]
    cdef Py_ssize_t m = table.shape[0]
    cdef double[:, ::1] tab = np.ascontiguousarray(table).reshape(-1, d)
    cdef double sq = noise_scale * sqrt(delta)
    cdef double xs[3]
    cdef Py_ssize_t iw[3]
    cdef double fw[3]
    cdef Py_ssize_t i, j, i0, flat, corner, cj
    cdef double w, u, bv, wgt
    cdef double acc[3]
    cdef bint ok

    for j in range(d):
        xs[j] = x[j]
    for i in range(n):
        for j in range(d):
            w = xs[j] - floor(xs[j])
            if w >= 1.0:
                w = 0.0
            u = w * m
            i0 = <Py_ssize_t> u
            if i0 >= m:
                i0 = m - 1
            iw[j] = i0
            fw[j] = u - i0
        if mode == 0:
            flat = 0
            for j in range(d):
                flat = flat * m + iw[j]
            for j in range(d):
                xs[j] = xs[j] + tab[flat, j] * delta + sq * noise[i, j]
        else:
            for j in range(d):
                acc[j] = 0.0
            for corner in range(1 << d):
                wgt = 1.0
                flat = 0
                for j in range(d):
                    if (corner >> j) & 1:
                        wgt *= fw[j]
                        cj = iw[j] + 1
                        if cj == m:
                            cj = 0
                    else:
                        wgt *= 1.0 - fw[j]
                        cj = iw[j]
                    flat = flat * m + cj
                for j in range(d):
                    acc[j] += wgt * tab[flat, j]
            for j in range(d):
                xs[j] = xs[j] + acc[j] * delta + sq * noise[i, j]
        ok = True
        for j in range(d):
            if not isfinite(xs[j]):
                ok = False
            out[i, j] = xs[j]
        if not ok:
            return i
    for j in range(d):
        x[j] = xs[j]
    return -1


def haar_chunk(long long[::1] idx, double[:, ::1] inc, Py_ssize_t v,
               long long[::1] counts, double[:, ::1] msum):
    """See driftlab._kernels_py.haar_chunk for the contract."""
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t d = inc.shape[1]
    cdef Py_ssize_t i, j, k
    for i in range(n):
        k = <Py_ssize_t> idx[i]
        counts[k] += 1
    for j in range(d):
        for i in range(n):
            k = <Py_ssize_t> idx[i]
            msum[j, k] += inc[i, j]
