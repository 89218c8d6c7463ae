"""Girsanov log-likelihood and its sufficient statistics.

All stochastic integrals are left-point (Ito) sums over the uniformly
discretized path: the empirical Gram uses wrapped positions, the
integral vectors use unwrapped increments.  Accumulation is chunked in
a fixed order so results are bit-reproducible.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from . import kernels
from .basis import (MULTIRES, BasisSpec, CoefficientField, active_columns,
                    box_index, transform)
from .errors import ShapeError
from .sde import CHUNK_STEPS, as_drift_callable, wrap


def basis_hash(spec):
    return hashlib.sha256(repr(spec.header_tuple()).encode()).hexdigest()


@dataclass
class SufficientStatistics:
    """Empirical Gram and stochastic-integral summaries of a path."""

    spec: BasisSpec
    T: float
    delta: float
    gram: np.ndarray   # (v_J, v_J), ScalingLevelJ coordinates
    m: np.ndarray      # (d, v_J)
    basis_hash: str
    path_hash: str = ""


def _scaling_coefs(b, spec):
    """Coefficients of b over spec in scaling coords, shaped (d, v_J)."""
    if not isinstance(b, CoefficientField):
        raise ShapeError("expected a CoefficientField drift")
    if b.spec != spec:
        raise ShapeError("drift field does not match the statistics' basis")
    c = transform(b, "inv") if b.coords == MULTIRES else b
    vals = c.values
    return vals[None, :] if vals.ndim == 1 else vals


def sufficient_stats(path, spec, chunk=CHUNK_STEPS, path_hash=""):
    """Empirical Gram and Ito-sum vectors of a path over a basis.

    gram[a, b] = (1/T) sum_i Phi_a(X~_i) Phi_b(X~_i) delta
    m[j][a]    =       sum_i Phi_a(X~_i) (X^j_{i+1} - X^j_i)
    """
    if spec.d != path.d:
        raise ShapeError(f"basis d={spec.d} does not match path d={path.d}")
    n = path.n_steps
    v = spec.v_J
    d = spec.d
    if spec.family == "haar":
        counts = np.zeros(v, dtype=np.int64)
        msum = np.zeros((d, v))
        for i in range(0, n, chunk):
            j = min(i + chunk, n)
            pts = wrap(path.positions[i:j])
            inc = path.positions[i + 1:j + 1] - path.positions[i:j]
            kernels.haar_chunk(box_index(spec, pts), inc, v, counts, msum)
        scale = 2.0 ** (spec.J * d / 2.0)
        gram = np.diag(counts * (scale**2 * path.delta / path.T))
        m = msum * scale
    else:
        gram_flat = np.zeros(v * v)
        m = np.zeros((d, v))
        for i in range(0, n, chunk):
            j = min(i + chunk, n)
            pts = wrap(path.positions[i:j])
            inc = path.positions[i + 1:j + 1] - path.positions[i:j]
            cols, vals = active_columns(spec, pts)
            for p in range(cols.shape[1]):
                for q in range(cols.shape[1]):
                    gram_flat += np.bincount(cols[:, p] * v + cols[:, q],
                                             weights=vals[:, p] * vals[:, q],
                                             minlength=v * v)
                for jj in range(d):
                    m[jj] += np.bincount(cols[:, p], weights=vals[:, p] * inc[:, jj],
                                         minlength=v)
        gram = gram_flat.reshape(v, v) * (path.delta / path.T)
    return SufficientStatistics(spec=spec, T=path.T, delta=path.delta,
                                gram=gram, m=m, basis_hash=basis_hash(spec),
                                path_hash=path_hash)


def _eval_drift(b, pts, d):
    return as_drift_callable(b, d)(pts)


def log_likelihood(path, b, chunk=CHUNK_STEPS):
    """Girsanov log-likelihood of drift b along the path.

    l_T(b) = -1/2 sum_i ||b(X~_i)||^2 delta + sum_i b(X~_i).(X_{i+1}-X_i)
    """
    if isinstance(b, CoefficientField) and b.spec.d != path.d:
        raise ShapeError(f"drift field d={b.spec.d} does not match path d={path.d}")
    n = path.n_steps
    quad = 0.0
    lin = 0.0
    for i in range(0, n, chunk):
        j = min(i + chunk, n)
        pts = wrap(path.positions[i:j])
        inc = path.positions[i + 1:j + 1] - path.positions[i:j]
        bv = _eval_drift(b, pts, path.d)
        quad += float(np.sum(bv * bv))
        lin += float(np.sum(bv * inc))
    return -0.5 * quad * path.delta + lin


def quadratic_form_likelihood(stats, b):
    """l_T(b) recomputed from sufficient statistics (exact identity)."""
    theta = _scaling_coefs(b, stats.spec)
    quad = sum(float(th @ stats.gram @ th) for th in theta)
    lin = float(np.sum(theta * stats.m))
    return -0.5 * stats.T * quad + lin


def hellinger_distance(stats, b1, b2):
    """Random Hellinger distance h_T(b1, b2) through the empirical Gram."""
    t1 = _scaling_coefs(b1, stats.spec)
    t2 = _scaling_coefs(b2, stats.spec)
    if t1.shape != t2.shape:
        raise ShapeError("drift fields have different shapes")
    dth = t1 - t2
    h2 = sum(float(row @ stats.gram @ row) for row in dth)
    return float(np.sqrt(max(h2, 0.0)))


def lan_residual(path, b0, h, chunk=CHUNK_STEPS):
    """Defect of the exact discrete LAN identity.

    | l_T(b0 + h/sqrt(T)) - l_T(b0) - W_T(h) + (1/2T) sum ||h||^2 delta |
    with W_T(h) = (1/sqrt(T)) sum h(X~_i).(X_{i+1} - X_i - b0(X~_i) delta).
    """
    sqT = np.sqrt(path.T)
    fb0 = as_drift_callable(b0, path.d)
    fh = as_drift_callable(h, path.d)

    def perturbed(pts):
        return fb0(pts) + fh(pts) / sqT

    ell1 = log_likelihood(path, perturbed, chunk)
    ell0 = log_likelihood(path, fb0, chunk)
    n = path.n_steps
    w = 0.0
    quad = 0.0
    for i in range(0, n, chunk):
        j = min(i + chunk, n)
        pts = wrap(path.positions[i:j])
        inc = path.positions[i + 1:j + 1] - path.positions[i:j]
        hv = fh(pts)
        w += float(np.sum(hv * (inc - fb0(pts) * path.delta)))
        quad += float(np.sum(hv * hv))
    w_T = w / sqT
    return abs(ell1 - ell0 - w_T + quad * path.delta / (2.0 * path.T))
