"""Pseudospectral solvers on the torus for the diffusion generator.

Fields are truncated Fourier series (modes -K..K per axis, centered
layout).  Derivatives are diagonal multipliers; coefficient products
are formed on a collocation grid of 2*oversample*K points per axis,
which with the default oversample=2 represents quadratic products of
band-K fields exactly (no aliasing).  Linear systems are solved by
dense LU at small mode counts and by Laplacian-preconditioned GMRES
above that, both behind the same verified residual gate.

Drift inputs given as wavelet fields are resampled onto the collocation
grid via synthesize; their unresolved roughness is truncated there and
the approximation is accepted (and surfaced through the residual gate,
which always measures the truncated system).
"""

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .basis import quadrature_grid, quadrature_gram
from .errors import (ConfigurationError, NumericalError, ResolutionError,
                     ShapeError)
from .sde import as_drift_callable

_DIRECT_LIMIT = 1500
_RESIDUAL_TOL = 1e-8
_SOLVABILITY_TOL = 1e-8


# ---------------------------------------------------------------------------
# Truncated Fourier representation


@dataclass
class FourierField:
    """Real scalar field as a centered cube of Fourier coefficients."""

    d: int
    K: int
    coeffs: np.ndarray  # complex, shape (2K+1,)*d; index i <-> mode i-K
    grid_values: np.ndarray = dc_field(default=None, repr=False)

    def __post_init__(self):
        shape = (2 * self.K + 1,) * self.d
        self.coeffs = np.asarray(self.coeffs, dtype=complex).reshape(shape)

    @property
    def mean(self):
        return float(np.real(self.coeffs[(self.K,) * self.d]))

    def norm_l2(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def sobolev(self, s):
        k2 = _mode_norm2(self.K, self.d)
        return float(np.sqrt(np.sum((1.0 + k2) ** s * np.abs(self.coeffs) ** 2)))

    def conj_symmetry_defect(self):
        flipped = np.conj(self.coeffs[(slice(None, None, -1),) * self.d])
        return float(np.max(np.abs(self.coeffs - flipped)))


def _axis_modes(K):
    return np.arange(-K, K + 1)


def _mode_norm2(K, d):
    k = _axis_modes(K).astype(float)
    if d == 1:
        return k**2
    grids = np.meshgrid(*([k] * d), indexing="ij")
    return sum(gr**2 for gr in grids)


def _grid_size(K, oversample):
    return 2 * oversample * K


def _embed(coeffs, K, d, M):
    """Centered cube -> zero-padded numpy fft layout of size M per axis."""
    out = np.zeros((M,) * d, dtype=complex)
    idx = np.ix_(*([_axis_modes(K) % M] * d))
    out[idx] = coeffs
    return out


def _extract(fftcube, K, d):
    """Numpy fft layout -> centered cube of modes -K..K."""
    M = fftcube.shape[0]
    idx = np.ix_(*([_axis_modes(K) % M] * d))
    return fftcube[idx]


def to_grid(f, M=None, oversample=2):
    """Real collocation values of a FourierField."""
    M = _grid_size(f.K, oversample) if M is None else M
    return np.real(np.fft.ifftn(_embed(f.coeffs, f.K, f.d, M)) * M**f.d)


def from_grid(values, K, enforce_real=True):
    """Truncated Fourier coefficients of real values on a uniform grid."""
    values = np.asarray(values, dtype=float)
    d = values.ndim
    M = values.shape[0]
    if 2 * K + 1 > M:
        raise ConfigurationError(f"grid of {M} points cannot carry modes up to K={K}")
    cube = _extract(np.fft.fftn(values) / M**d, K, d)
    if enforce_real:
        cube = 0.5 * (cube + np.conj(cube[(slice(None, None, -1),) * d]))
    return FourierField(d=d, K=K, coeffs=cube)


def field_from_callable(fn, K, d, oversample=2):
    M = _grid_size(K, oversample)
    vals = fn(_grid_points(d, M))
    return from_grid(np.asarray(vals, dtype=float).reshape((M,) * d), K)


def _grid_points(d, M):
    x1 = np.arange(M) / M
    if d == 1:
        return x1[:, None]
    grids = np.meshgrid(*([x1] * d), indexing="ij")
    return np.stack([gr.ravel() for gr in grids], axis=1)


def evaluate_midpoint_grid(f, n):
    """Field values on the midpoint grid ((i+0.5)/n per axis)."""
    if n < 2 * f.K + 1:
        raise ConfigurationError("midpoint grid too coarse for the field's modes")
    emb = _embed(f.coeffs, f.K, f.d, n)
    shift = np.exp(1j * np.pi * (np.fft.fftfreq(n) * n) / n)
    for ax in range(f.d):
        sh = [1] * f.d
        sh[ax] = n
        emb *= shift.reshape(sh)
    return np.real(np.fft.ifftn(emb) * n**f.d)


def inner_l2(f, g):
    """Integral of f*g over the torus from coefficients."""
    if f.K != g.K or f.d != g.d:
        raise ShapeError("fields have different truncations")
    return float(np.real(np.sum(f.coeffs * np.conj(g.coeffs))))


@dataclass
class InvariantMeasure:
    """Stationary density: unit-mass FourierField plus a positivity check."""

    density: FourierField
    min_grid_value: float

    def __post_init__(self):
        center = (self.density.K,) * self.density.d
        if abs(self.density.coeffs[center] - 1.0) > 1e-10:
            raise ShapeError("invariant density must have unit mass (c_0 = 1)")
        self.density.coeffs[center] = 1.0


# ---------------------------------------------------------------------------
# Drift handling


def _drift_grids(b, d, M):
    """Drift values on the collocation grid, shape (d,) + (M,)*d."""
    if isinstance(b, (list, tuple)) and b and isinstance(b[0], FourierField):
        return np.stack([to_grid(comp, M) for comp in b])
    fn = as_drift_callable(b, d)
    vals = fn(_grid_points(d, M))
    return np.moveaxis(vals.reshape((M,) * d + (d,)), -1, 0)


# ---------------------------------------------------------------------------
# Generator and adjoint application (matrix-free)


def _spectral_gradient(coeffs, K, d, M):
    """Gradient components on the M-grid from a centered cube."""
    emb = _embed(coeffs, K, d, M)
    freqs = np.fft.fftfreq(M) * M
    out = []
    for ax in range(d):
        sh = [1] * d
        sh[ax] = M
        mult = (2j * np.pi * freqs).reshape(sh)
        out.append(np.real(np.fft.ifftn(emb * mult) * M**d))
    return out


def apply_generator(b, u, oversample=2):
    """L u = (1/2) Laplace u + b . grad u, dealiased at the given K."""
    K, d = u.K, u.d
    M = _grid_size(K, oversample)
    bg = _drift_grids(b, d, M)
    grads = _spectral_gradient(u.coeffs, K, d, M)
    prod = sum(bg[ax] * grads[ax] for ax in range(d))
    conv = from_grid(prod, K).coeffs
    lap = -2.0 * np.pi**2 * _mode_norm2(K, d) * u.coeffs
    return FourierField(d=d, K=K, coeffs=lap + conv)


def apply_adjoint(b, u, oversample=2):
    """L* u = (1/2) Laplace u - div(b u), in conservative form."""
    K, d = u.K, u.d
    M = _grid_size(K, oversample)
    bg = _drift_grids(b, d, M)
    ug = to_grid(u, M)
    freqs = np.fft.fftfreq(M) * M
    div = np.zeros((2 * K + 1,) * d, dtype=complex)
    for ax in range(d):
        sh = [1] * d
        sh[ax] = M
        mult = (2j * np.pi * freqs).reshape(sh)
        div += _extract(np.fft.fftn(bg[ax] * ug) / M**d * mult, K, d)
    lap = -2.0 * np.pi**2 * _mode_norm2(K, d) * u.coeffs
    return FourierField(d=d, K=K, coeffs=lap - div)


# ---------------------------------------------------------------------------
# Linear solves


def _mode_vectors(K, d):
    ax = _axis_modes(K)
    if d == 1:
        return ax[:, None]
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([gr.ravel() for gr in grids], axis=1)


def _assemble_dense(bhat, K, d, adjoint):
    """Dense operator matrix on the centered mode cube.

    Generator rows: A[k, m] = -2 pi^2 |k|^2 delta + 2 pi i sum_ax m_ax bhat_ax[k-m];
    adjoint rows use -2 pi i k_ax (conservative form).
    """
    modes = _mode_vectors(K, d)
    n = len(modes)
    A = np.zeros((n, n), dtype=complex)
    A[np.diag_indices(n)] = -2.0 * np.pi**2 * np.sum(modes.astype(float) ** 2, axis=1)
    idx = tuple(modes[:, None, a] - modes[None, :, a] + 2 * K for a in range(d))
    for ax in range(d):
        conv = bhat[ax][idx]
        if adjoint:
            A += -2j * np.pi * modes[:, ax].astype(float)[:, None] * conv
        else:
            A += 2j * np.pi * modes[None, :, ax].astype(float) * conv
    return A


class EllipticOperator:
    """L or L* for a fixed drift at truncation K, with solve machinery."""

    def __init__(self, b, K, d, adjoint=False, oversample=2):
        if K < 4:
            raise ConfigurationError("truncation K must be at least 4")
        self.K, self.d, self.adjoint, self.oversample = K, d, adjoint, oversample
        self.M = _grid_size(K, oversample)
        self.bgrid = _drift_grids(b, d, self.M)
        self.n = (2 * K + 1) ** d
        self._lu = None

    def apply(self, f):
        return FourierField(d=self.d, K=self.K, coeffs=self._apply_cube(f.coeffs))

    def _apply_cube(self, cube):
        K, d, M = self.K, self.d, self.M
        if self.adjoint:
            ug = np.real(np.fft.ifftn(_embed(cube, K, d, M)) * M**d)
            freqs = np.fft.fftfreq(M) * M
            div = np.zeros((2 * K + 1,) * d, dtype=complex)
            for ax in range(d):
                sh = [1] * d
                sh[ax] = M
                mult = (2j * np.pi * freqs).reshape(sh)
                div += _extract(np.fft.fftn(self.bgrid[ax] * ug) / M**d * mult, K, d)
            return -2.0 * np.pi**2 * _mode_norm2(K, d) * cube - div
        grads = _spectral_gradient(cube, K, d, M)
        prod = sum(self.bgrid[ax] * grads[ax] for ax in range(d))
        conv = _extract(np.fft.fftn(prod) / M**d, K, d)
        return -2.0 * np.pi**2 * _mode_norm2(K, d) * cube + conv

    def _bhat(self):
        return [_extract(np.fft.fftn(self.bgrid[ax]) / self.M**self.d, 2 * self.K, self.d)
                for ax in range(self.d)]

    def solve_zero_mean(self, rhs_cube, residual_tol=_RESIDUAL_TOL):
        """Solve (projected) A u = rhs with u_0 = 0; verified residual.

        The k = 0 row is replaced by the gauge u_0 = 0 and the residual
        of the truncated system (excluding that row) is checked against
        residual_tol relative to ||rhs||.
        """
        K, d, n = self.K, self.d, self.n
        center = (K,) * d
        rhs = rhs_cube.copy()
        rhs_norm = np.sqrt(np.sum(np.abs(rhs) ** 2))
        if rhs_norm == 0.0:
            return FourierField(d=d, K=K, coeffs=np.zeros_like(rhs))
        cflat = np.ravel_multi_index(center, rhs.shape)
        if n <= _DIRECT_LIMIT:
            u = self._solve_dense(rhs, cflat)
        else:
            u = self._solve_gmres(rhs, center)
        res = self._apply_cube(u)
        res -= rhs_cube
        res[center] = 0.0  # replaced row
        rel = np.sqrt(np.sum(np.abs(res) ** 2)) / rhs_norm
        if not np.isfinite(rel) or rel > residual_tol:
            raise ResolutionError(
                f"solve residual {rel:.3e} exceeds {residual_tol:.1e} at K={K}; "
                "increase the truncation")
        return FourierField(d=d, K=K, coeffs=u)

    def _solve_dense(self, rhs, cflat):
        if self._lu is None:
            A = _assemble_dense(self._bhat(), self.K, self.d, self.adjoint)
            A[cflat, :] = 0.0
            A[cflat, cflat] = 1.0
            try:
                self._lu = sla.lu_factor(A)
            except (sla.LinAlgError, ValueError) as exc:
                raise NumericalError(
                    f"dense factorization failed (cond~{np.linalg.cond(A):.3e})"
                ) from exc
        b = rhs.ravel().copy()
        b[cflat] = 0.0
        u = sla.lu_solve(self._lu, b)
        if not np.all(np.isfinite(u)):
            raise NumericalError("dense solve produced non-finite values")
        return u.reshape(rhs.shape)

    def _solve_gmres(self, rhs, center):
        K, d = self.K, self.d
        shape = rhs.shape
        k2 = _mode_norm2(K, d)
        pre = -2.0 * np.pi**2 * k2
        pre[center] = 1.0

        def matvec(x):
            cube = x.reshape(shape).copy()
            cube[center] = 0.0
            out = self._apply_cube(cube)
            out[center] = x.reshape(shape)[center]
            return out.ravel()

        def psolve(x):
            return (x.reshape(shape) / pre).ravel()

        n = rhs.size
        A = spla.LinearOperator((n, n), matvec=matvec, dtype=complex)
        Mop = spla.LinearOperator((n, n), matvec=psolve, dtype=complex)
        b = rhs.ravel().copy()
        b[np.ravel_multi_index(center, shape)] = 0.0
        u, info = spla.gmres(A, b, M=Mop, rtol=1e-13, atol=0.0,
                             restart=200, maxiter=40)
        if info != 0:
            raise ResolutionError(
                f"GMRES failed to converge (info={info}) at K={K}; "
                "increase the truncation or check the drift amplitude")
        return u.reshape(shape)


def solve_poisson(b, f, mu, residual_tol=_RESIDUAL_TOL,
                  solvability_tol=_SOLVABILITY_TOL, oversample=2):
    """Unique zero-mean u with L_b u = f, for f orthogonal to mu.

    Callers must center f against mu first (f -> f - int f dmu); a
    violation raises with the offending inner product reported.
    """
    fbar = inner_l2(f, _mu_field(mu, f.K))
    if abs(fbar) >= solvability_tol * max(f.norm_l2(), 1e-300):
        raise ConfigurationError(
            f"solvability violated: <f, mu> = {fbar:.3e}; center f first")
    op = EllipticOperator(b, f.K, f.d, adjoint=False, oversample=oversample)
    return op.solve_zero_mean(f.coeffs, residual_tol)


def solve_adjoint(b, f, residual_tol=_RESIDUAL_TOL,
                  solvability_tol=_SOLVABILITY_TOL, oversample=2):
    """Unique zero-mean u with L*_b u = f, for f with zero integral."""
    if abs(f.mean) >= solvability_tol * max(f.norm_l2(), 1e-300):
        raise ConfigurationError(
            f"solvability violated: int f dx = {f.mean:.3e}; center f first")
    op = EllipticOperator(b, f.K, f.d, adjoint=True, oversample=oversample)
    rhs = f.coeffs.copy()
    rhs[(f.K,) * f.d] = 0.0
    return op.solve_zero_mean(rhs, residual_tol)


def _mu_field(mu, K):
    f = mu.density if isinstance(mu, InvariantMeasure) else mu
    if f.K == K:
        return f
    if f.K > K:
        sl = tuple([slice(f.K - K, f.K + K + 1)] * f.d)
        return FourierField(d=f.d, K=K, coeffs=f.coeffs[sl])
    out = np.zeros((2 * K + 1,) * f.d, dtype=complex)
    sl = tuple([slice(K - f.K, K + f.K + 1)] * f.d)
    out[sl] = f.coeffs
    return FourierField(d=f.d, K=K, coeffs=out)


def invariant_measure(b, K, d=None, oversample=2, residual_tol=_RESIDUAL_TOL):
    """Stationary density as the kernel of L*: solve L*(1 + w) = 0, c_0 = 1.

    The k = 0 row is replaced by the normalization; a min-grid-value
    <= 0 triggers a positivity warning (resolution too low).
    """
    if d is None:
        if isinstance(b, (list, tuple)) and b and isinstance(b[0], FourierField):
            d = b[0].d
        elif hasattr(b, "spec"):
            d = b.spec.d
        else:
            raise ConfigurationError("pass d explicitly for callable drifts")
    op = EllipticOperator(b, K, d, adjoint=True, oversample=oversample)
    # L* w = div(b) since L* 1 = -div(b)
    freqs = np.fft.fftfreq(op.M) * op.M
    rhs = np.zeros((2 * K + 1,) * d, dtype=complex)
    for ax in range(d):
        sh = [1] * d
        sh[ax] = op.M
        mult = (2j * np.pi * freqs).reshape(sh)
        rhs += _extract(np.fft.fftn(op.bgrid[ax]) / op.M**d * mult, K, d)
    rhs[(K,) * d] = 0.0
    w = op.solve_zero_mean(rhs, residual_tol)
    coeffs = w.coeffs.copy()
    coeffs[(K,) * d] = 1.0
    dens = FourierField(d=d, K=K, coeffs=coeffs)
    grid = to_grid(dens, op.M)
    mn = float(grid.min())
    if mn <= 0.0:
        warnings.warn(f"invariant density min grid value {mn:.3e} <= 0; "
                      "resolution K too low for this drift", RuntimeWarning)
    dens.grid_values = grid
    return InvariantMeasure(density=dens, min_grid_value=mn)


def gradient_oracle(B, d=1, K=32, n_grid=None):
    """Closed-form stationary density exp(2B)/Z for gradient drift grad B.

    Z is computed by the periodic rectangle rule on a fine grid (2^14
    points per axis for d=1), spectrally accurate for smooth B.
    """
    if n_grid is None:
        n_grid = {1: 1 << 14, 2: 1 << 9, 3: 1 << 6}[d]
    pts = _grid_points(d, n_grid)
    Bv = np.asarray(B(pts), dtype=float).reshape((n_grid,) * d)
    dens = np.exp(2.0 * Bv)
    dens /= dens.mean()
    f = from_grid(dens, K)
    f.grid_values = dens
    f.coeffs[(K,) * d] = 1.0
    return InvariantMeasure(density=f, min_grid_value=float(dens.min()))


# ---------------------------------------------------------------------------
# One-dimensional constructions (constant-flux ODE, Green kernel)


def _cumtrapz(vals):
    """Cumulative trapezoid of n+1 node values over x = 0, 1/n, ..., 1."""
    n = len(vals) - 1
    out = np.zeros(n + 1)
    out[1:] = np.cumsum(0.5 / n * (vals[:-1] + vals[1:]))
    return out


def _trapz(vals):
    n = len(vals) - 1
    return (vals.sum() - 0.5 * (vals[0] + vals[-1])) / n


def _integrating_factor(b, n):
    """Node values (0..n inclusive) of B, e^{2B}, e^{-2B} for 1-d drift b.

    The integrands below are not periodic when int_0^1 b != 0, so every
    array carries the right endpoint explicitly.
    """
    fn = as_drift_callable(b, 1)
    nodes = np.arange(n + 1) / n
    bv = fn((nodes % 1.0)[:, None]).ravel()
    B = _cumtrapz(bv)
    B -= _trapz(B)  # conditioning only; the linear solves absorb shifts
    return nodes, bv, B, np.exp(2.0 * B), np.exp(-2.0 * B)


def invariant_1d_flux(b, K=32, n_grid=1 << 15):
    """d=1 stationary density via the constant-flux first-order ODE.

    Solves (1/2) mu' - b mu = c with periodicity and unit mass through
    the integrating factor exp(2B), B(x) = int_0^x b; handles drifts
    with nonzero circulation int_0^1 b != 0.
    """
    n = n_grid
    _, _, B, e2B, em2B = _integrating_factor(b, n)
    beta2 = 2.0 * (B[-1] - B[0])
    C1 = _cumtrapz(em2B)           # int_0^x e^{-2B}
    A0 = _trapz(e2B)               # int e^{2B}
    A1 = _trapz(e2B * C1)          # int e^{2B} C1
    # periodicity: (e^{2beta}-1) mu0 + 2 e^{2beta} C1(1) c = 0
    # mass:        A0 mu0 + 2 A1 c = 1
    M = np.array([[np.exp(beta2) - 1.0, 2.0 * np.exp(beta2) * C1[-1]],
                  [A0, 2.0 * A1]])
    mu0, c = np.linalg.solve(M, np.array([0.0, 1.0]))
    dens = (e2B * (mu0 + 2.0 * c * C1))[:-1]
    f = from_grid(dens, K)
    f.grid_values = dens
    f.coeffs[(K,)] = 1.0
    return InvariantMeasure(density=f, min_grid_value=float(dens.min()))


def _green_kernel_grid(b, x, n_grid):
    """Green kernel K_x = (L*)^{-1}[delta_x - 1] on nodes i/n, d=1.

    x is snapped to the nearest node so the Heaviside jump is handled
    exactly; returns (nodes, x_used, values, derivative_values).
    """
    n = n_grid
    nodes01, bv, B, e2B, em2B = _integrating_factor(b, n)
    ix = int(np.rint((x - np.floor(x)) * n)) % n
    x_used = ix / n
    beta2 = 2.0 * (B[-1] - B[0])
    # F0(y) = H(y - x) - y ; F = F0 + c1
    C1 = _cumtrapz(em2B)
    ramp = _cumtrapz(em2B * nodes01)                # int e^{-2B} s ds
    heav = np.zeros(n + 1)
    heav[ix:] = C1[ix:] - C1[ix]                    # int_x^y e^{-2B}
    C0 = heav - ramp
    D0 = _trapz(e2B * C0)
    D1 = _trapz(e2B * C1)
    A0 = _trapz(e2B)
    # periodicity: e^{2beta}[v0 + 2(C0(1) + c1 C1(1))] = v0
    # zero mean:   A0 v0 + 2 (D0 + c1 D1) = 0
    M = np.array([[np.exp(beta2) - 1.0, 2.0 * np.exp(beta2) * C1[-1]],
                  [A0, 2.0 * D1]])
    r = np.array([-2.0 * np.exp(beta2) * C0[-1], -2.0 * D0])
    v0, c1 = np.linalg.solve(M, r)
    v = (e2B * (v0 + 2.0 * (C0 + c1 * C1)))[:-1]
    F = (nodes01[:-1] >= x_used).astype(float) - nodes01[:-1] + c1
    dv = 2.0 * (bv[:-1] * v + F)   # from (1/2) v' - b v = F
    return nodes01[:-1], x_used, v, dv


def green_kernel_1d(b, x, K=32, n_grid=1 << 14):
    """Periodic Green kernel y -> G_b(y, x) with zero mean (d=1).

    Satisfies int G_b(y, x) g(y) dy = L_b^{-1}[g - int g dmu_b](x) for
    test functions g; constructed as the adjoint delta problem
    L* G = delta_x - 1 by double quadrature with integrating factor.
    The returned field carries the un-truncated construction grid in
    ``grid_values`` (the kernel has a kink at x, so quadrature against
    it should use the grid, not the truncated modes).
    """
    nodes, x_used, v, dv = _green_kernel_grid(b, x, n_grid)
    f = from_grid(v, K)
    f.grid_values = v
    return f


def poisson_delta_1d(b, x, n_grid=1 << 14):
    """Forward delta solve: psi with L_b psi = delta_x - mu_b(x), d=1.

    This is the kernel slot whose y-derivative enters the pointwise
    invariant-measure CLT covariance int (d/dy G(y,x))^2 dmu_b(y).
    Returns (nodes, x_used, psi, psi', mu_grid); x snaps to the grid.
    """
    n = n_grid
    nodes01, bv, B, e2B, em2B = _integrating_factor(b, n)
    ix = int(np.rint((x - np.floor(x)) * n)) % n
    x_used = ix / n
    mu = invariant_1d_flux(b, K=4, n_grid=n)
    mu_grid = mu.density.grid_values
    mu_x = mu_grid[ix]
    # (1/2)(e^{2B} psi')' = e^{2B} (delta_x - mu(x)):
    # F(y) = int_0^y e^{2B} rho = e^{2B(x)} 1_{y>=x} - mu(x) E(y)
    E = _cumtrapz(e2B)
    F = -mu_x * E
    F[ix:] += e2B[ix]
    dpsi_raw = em2B * 2.0 * F          # psi' = e^{-2B}(kappa + 2F)
    em_int = _trapz(em2B)
    kappa = -_trapz(em2B * 2.0 * F) / em_int
    dpsi = em2B * kappa + dpsi_raw
    # solvability <rho, mu> = 0 makes psi' periodic; verify
    defect = abs(dpsi[-1] - dpsi[0]) / max(np.max(np.abs(dpsi)), 1e-300)
    if defect > 1e-6:
        raise NumericalError(
            f"delta-source solve lost periodicity (defect {defect:.2e}); "
            "increase n_grid")
    psi = _cumtrapz(dpsi)
    psi -= _trapz(psi)
    return nodes01[:-1], x_used, psi[:-1], dpsi[:-1], mu_grid


# ---------------------------------------------------------------------------
# Invariant-measure linearization and CLT variances


def linearize_invariant(b, h, mu, oversample=2):
    """First-order response of the stationary density to drift change h.

    v = (L*)^{-1}[f_h] with f_h = -sum_j d/dx_j (h_j mu_b); int v = 0.
    """
    dens = mu.density if isinstance(mu, InvariantMeasure) else mu
    K, d = dens.K, dens.d
    M = _grid_size(K, oversample)
    hg = _drift_grids(h, d, M)
    mug = to_grid(dens, M)
    freqs = np.fft.fftfreq(M) * M
    rhs = np.zeros((2 * K + 1,) * d, dtype=complex)
    for ax in range(d):
        sh = [1] * d
        sh[ax] = M
        mult = (2j * np.pi * freqs).reshape(sh)
        rhs -= _extract(np.fft.fftn(hg[ax] * mug) / M**d * mult, K, d)
    rhs[(K,) * d] = 0.0
    return solve_adjoint(b, FourierField(d=d, K=K, coeffs=rhs),
                         oversample=oversample)


def clt_variance(b, g, mu, oversample=2):
    """Asymptotic variance of ergodic averages of g under drift b.

    ||grad L_b^{-1}[g - int g dmu]||^2_{mu}: one Poisson solve, spectral
    gradient, weighted grid quadrature.
    """
    dens = mu.density if isinstance(mu, InvariantMeasure) else mu
    K, d = dens.K, dens.d
    gg = g if isinstance(g, FourierField) else field_from_callable(g, K, d, oversample)
    gbar = inner_l2(gg, _mu_field(dens, gg.K))
    cen = gg.coeffs.copy()
    cen[(gg.K,) * d] -= gbar
    u = solve_poisson(b, FourierField(d=d, K=gg.K, coeffs=cen), mu,
                      oversample=oversample)
    M = _grid_size(K, oversample)
    grads = _spectral_gradient(u.coeffs, K, d, M)
    mug = to_grid(dens, M)
    return float(sum((gr**2 * mug).mean() for gr in grads))


def weighted_gram(spec, weight, reciprocal=False, extra_depth=6):
    """Quadrature Gram of the wavelet basis under a positive weight.

    weight: callable on points, FourierField, or InvariantMeasure; with
    reciprocal=True the weight 1/w is used (e.g. the BvM covariance
    weight 1/mu_0).
    """
    pts, _ = quadrature_grid(spec, extra_depth)
    n1 = 2 ** (spec.J + extra_depth)
    if isinstance(weight, InvariantMeasure):
        weight = weight.density
    if isinstance(weight, FourierField):
        vals = evaluate_midpoint_grid(weight, n1).ravel()
    elif callable(weight):
        vals = np.asarray(weight(pts), dtype=float).ravel()
    else:
        vals = np.asarray(weight, dtype=float).ravel()
    if reciprocal:
        vals = 1.0 / vals
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0.0):
        raise ConfigurationError("weight must be positive and finite on the grid")
    return quadrature_gram(spec, weight=vals, extra_depth=extra_depth)
