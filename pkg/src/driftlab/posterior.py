"""The exactly-Gaussian posterior over the wavelet space.

Per coordinate j the posterior is N(theta_hat_j, P^{-1}) in
multiresolution coordinates with precision P = T Gamma_w + D, where
Gamma_w is the empirical Gram rotated by the orthogonal wavelet
transform and D the diagonal prior precision.  D > 0 makes P SPD for
any path, so the solve is well-posed even when the empirical Gram is
singular; the MAP equals the posterior mean by Gaussian conjugacy.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import rng
from .basis import (MULTIRES, BasisSpec, CoefficientField, PriorSpec,
                    prior_sigma_vector, scaling_values, quadrature_grid,
                    transform_matrix)
from .errors import (ConfigurationError, NumericalError, ShapeError,
                     StatisticsError)


@dataclass
class GaussianPosterior:
    spec: BasisSpec
    prior: PriorSpec
    T: float
    precision: np.ndarray  # (v, v), multires coords
    chol: np.ndarray       # lower triangular factor of precision
    mean: np.ndarray       # (d, v) MAP coefficients, multires coords
    stats_hash: str = ""

    def mean_field(self):
        return CoefficientField(self.spec, MULTIRES, self.mean.copy())

    def field(self, theta):
        """Wrap one (d, v) coefficient block as a CoefficientField."""
        return CoefficientField(self.spec, MULTIRES, np.asarray(theta))


def fit(stats, prior, stats_hash=""):
    """Solve the penalized normal equations; MAP = posterior mean."""
    spec = stats.spec
    if prior.J != spec.J or prior.d != spec.d:
        raise ShapeError(f"prior (J={prior.J}, d={prior.d}) does not match "
                         f"basis (J={spec.J}, d={spec.d})")
    W = transform_matrix(spec)
    gram_w = W @ stats.gram @ W.T
    gram_w = 0.5 * (gram_w + gram_w.T)
    D = prior_sigma_vector(prior, spec) ** -2.0
    P = stats.T * gram_w
    P[np.diag_indices_from(P)] += D
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        cond = np.linalg.cond(P)
        raise NumericalError(
            f"precision Cholesky failed (condition estimate {cond:.3e})") from None
    m_w = stats.m @ W.T
    theta = sla.cho_solve((L, True), m_w.T).T
    # one step of iterative refinement, then verify the normal equations
    theta += sla.cho_solve((L, True), (m_w - theta @ P).T).T
    for j in range(m_w.shape[0]):
        ref = max(np.linalg.norm(m_w[j]), 1.0)
        res = np.linalg.norm(P @ theta[j] - m_w[j])
        if res > 1e-9 * ref:
            raise NumericalError(
                f"normal-equation residual {res:.3e} exceeds tolerance for "
                f"coordinate {j} (condition estimate {np.linalg.cond(P):.3e})")
    return GaussianPosterior(spec=spec, prior=prior, T=stats.T, precision=P,
                             chol=L, mean=theta, stats_hash=stats_hash)


def sample(post, n, seed, xi=None):
    """Draw n posterior coefficient blocks, shape (n, d, v_J) (multires).

    theta = mean + L^{-T} xi per coordinate, xi iid standard normal;
    deterministic given seed.  ``xi`` overrides the noise (test hook):
    an array of shape (n, d, v_J).
    """
    if n < 1:
        raise StatisticsError("need at least one draw")
    v = post.spec.v_J
    d = post.spec.d
    if xi is None:
        xi = np.empty((n, d, v))
        for j in range(d):
            z = rng.normals(rng.derive_seed(seed, 77, j), 0, n * v)
            xi[:, j, :] = z.reshape(n, v)
    else:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (n, d, v):
            raise ShapeError(f"xi must have shape {(n, d, v)}")
    draws = np.empty((n, d, v))
    for j in range(d):
        y = sla.solve_triangular(post.chol, xi[:, j, :].T, lower=True, trans="T")
        draws[:, j, :] = post.mean[j] + y.T
    return draws


def functional_moments(post, phi, j):
    """Posterior mean and variance of <b_j, phi> for phi in V_J.

    phi: multiresolution coefficient vector (v,) or a scalar
    CoefficientField in multires coordinates.
    """
    if isinstance(phi, CoefficientField):
        if phi.coords != MULTIRES or phi.is_vector:
            raise ShapeError("phi must be a scalar field in multires coordinates")
        if phi.spec != post.spec:
            raise ShapeError("phi does not match the posterior basis")
        phi = phi.values
    phi = np.asarray(phi, dtype=float)
    mean = float(phi @ post.mean[j])
    y = sla.solve_triangular(post.chol, phi, lower=True)
    return mean, float(y @ y)


def _band_eval_matrix(post, extra_depth=4):
    pts, _ = quadrature_grid(post.spec, extra_depth)
    W = transform_matrix(post.spec)
    return scaling_values(post.spec, pts) @ W.T


def credible_band(post, draws, level=0.9, extra_depth=4, chunk=2048):
    """Empirical level-quantile of sup-norm distance draws -> MAP.

    Distances are evaluated on a fine tensor grid with 2^(J+extra)
    points per axis, maximized over grid and coordinates.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 3 or draws.shape[0] < 100:
        raise StatisticsError("credible_band needs at least 100 draws of shape (n, d, v)")
    E = _band_eval_matrix(post, extra_depth)
    dists = np.empty(draws.shape[0])
    for i in range(0, draws.shape[0], chunk):
        blk = draws[i:i + chunk] - post.mean[None, :, :]
        vals = np.einsum("gv,njv->njg", E, blk)
        dists[i:i + chunk] = np.max(np.abs(vals), axis=(1, 2))
    return float(np.quantile(dists, level))


def sup_distance(post, theta, b_ref, extra_depth=4):
    """Sup-norm distance on the band grid between coefficients and a field."""
    E = _band_eval_matrix(post, extra_depth)
    pts, _ = quadrature_grid(post.spec, extra_depth)
    ref = np.asarray(b_ref(pts), dtype=float)
    if ref.ndim == 1:
        ref = ref[:, None]
    vals = np.einsum("gv,jv->jg", E, np.atleast_2d(theta))
    return float(np.max(np.abs(vals - ref.T)))


def isometry_gap(stats, gram_mu):
    """Relative operator-norm gap between empirical and target Gram.

    sup_u |u'(Gram_hat - Gamma)u| / u'Gamma u, i.e. the largest
    magnitude eigenvalue of the symmetric-definite pencil.
    """
    gram_mu = np.asarray(gram_mu, dtype=float)
    if gram_mu.shape != stats.gram.shape:
        raise ShapeError("target Gram has wrong shape")
    try:
        np.linalg.cholesky(gram_mu)
    except np.linalg.LinAlgError:
        raise ConfigurationError("target Gram must be symmetric positive definite") from None
    w = sla.eigh(stats.gram - gram_mu, gram_mu, eigvals_only=True)
    return float(np.max(np.abs(w)))
