"""Pure-Python/numpy fallback for the hot kernels.

Semantics (op order, rounding) match ``_kernels_cy`` exactly; the
compiled twin is built with FP contraction disabled so both backends
produce bitwise-identical output.
"""

import math

import numpy as np


def em_chunk(x, noise, delta, noise_scale, table, mode, out):
    """Euler-Maruyama steps with tabulated drift.

    x           : (d,) current unwrapped state, updated in place
    noise       : (n, d) standard normals for this chunk
    table       : (m,)*d + (d,) drift values on the periodic grid
    mode        : 0 nearest-cell lookup, 1 multilinear interpolation
    out         : (n, d) positions after each step, written in place

    Returns the index of the first step producing a non-finite state,
    or -1 on success.
    """
    n, d = noise.shape
    m = table.shape[0]
    tab = table.reshape(-1, d)
    sq = noise_scale * math.sqrt(delta)
    xs = [float(x[j]) for j in range(d)]
    with np.errstate(over="ignore", invalid="ignore"):
        return _em_loop(xs, x, noise, delta, sq, tab, m, mode, out)


def _em_loop(xs, x, noise, delta, sq, tab, m, mode, out):
    n, d = noise.shape
    for i in range(n):
        # wrapped coordinates and per-axis cell data
        iw = []
        fw = []
        for j in range(d):
            w = xs[j] - math.floor(xs[j])
            if w >= 1.0:
                w = 0.0
            u = w * m
            i0 = int(u)
            if i0 >= m:
                i0 = m - 1
            iw.append(i0)
            fw.append(u - i0)
        if mode == 0:
            flat = 0
            for j in range(d):
                flat = flat * m + iw[j]
            bv = tab[flat]
            for j in range(d):
                xs[j] = xs[j] + bv[j] * delta + sq * noise[i, j]
        else:
            acc = [0.0] * d
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
                bv = tab[flat]
                for j in range(d):
                    acc[j] += wgt * bv[j]
            for j in range(d):
                xs[j] = xs[j] + acc[j] * delta + sq * noise[i, j]
        ok = True
        for j in range(d):
            if not math.isfinite(xs[j]):
                ok = False
            out[i, j] = xs[j]
        if not ok:
            return i
    for j in range(d):
        x[j] = xs[j]
    return -1


def haar_chunk(idx, inc, v, counts, msum):
    """Accumulate Haar sufficient statistics for one path chunk.

    idx    : (n,) flat box index of each wrapped point
    inc    : (n, d) unwrapped increments
    counts : (v,) int64 box occupancy, accumulated in place
    msum   : (d, v) raw increment sums per box, accumulated in place
    """
    counts += np.bincount(idx, minlength=v).astype(np.int64)
    for j in range(inc.shape[1]):
        msum[j] += np.bincount(idx, weights=inc[:, j], minlength=v)
