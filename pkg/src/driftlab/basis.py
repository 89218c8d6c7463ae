"""Periodized tensor-product wavelet bases of L2 on the d-torus.

A basis is represented in one of two coordinate systems over the same
space of dimension ``2**(J*d)``:

* ``"scaling"``  -- level-J scaling functions ``phi_{J,k}``; compact
  supports (disjoint for Haar), used for Gram assembly and pointwise
  evaluation.
* ``"multires"`` -- father function plus wavelet levels ``0..J-1``; the
  prior is diagonal here.  Flat layout: father first, then the level-l
  detail blocks in increasing ``l``, each ordered by orientation mask
  then C-order of the translate index.

An orthogonal fast wavelet transform converts between the two.
Daubechies scaling functions are materialized by the cascade algorithm
on a dyadic grid and evaluated by linear interpolation on that grid.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .errors import ConfigurationError, ShapeError

_SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Daubechies filters and cascade tables


def daubechies_filter(S):
    """Orthonormal Daubechies lowpass filter with S vanishing moments.

    Built by spectral factorization of the half-band polynomial; the
    filter has length 2S and sums to sqrt(2).
    """
    if S < 1:
        raise ConfigurationError("vanishing-moment count S must be >= 1")
    if S == 1:
        c = 1.0 / _SQRT2
        return np.array([c, c])
    if S >= 35:
        raise ConfigurationError("S >= 35 is numerically unstable via root finding")
    # roots of P(y) = sum_k C(S-1+k, k) y^k
    P = [comb(S - 1 + k, k, exact=True) for k in range(S)][::-1]
    yj = np.roots(np.asarray(P, dtype=float))
    q = np.poly1d([1.0])
    for y in yj:
        # z solves y = 1/2 - (z + 1/z)/4; keep the root inside the unit disk
        part = 2.0 * np.sqrt(y * (y - 1.0) + 0j)
        const = 1.0 - 2.0 * y
        z1 = const + part
        if abs(z1) > 1.0:
            z1 = const - part
        q = q * np.poly1d([1.0, -z1])
    q = np.poly1d([1.0, 1.0]) ** S * np.real(q)
    h = q.c
    return h / h.sum() * _SQRT2


def highpass_from_lowpass(h):
    """Quadrature-mirror highpass: g[n] = (-1)^n h[L-1-n]."""
    L = len(h)
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


def cascade_table(h, depth):
    """Scaling-function values on the dyadic grid k/2**depth over [0, 2S-1].

    Integer values come from the eigenvector of the two-scale transfer
    matrix at eigenvalue 1; finer levels are filled by the refinement
    relation phi(t) = sqrt(2) * sum_n h[n] phi(2t - n).
    """
    L = len(h) - 1  # support is [0, L]
    vals = np.zeros(L + 1)
    if L >= 2:
        n = L - 1
        M = np.zeros((n, n))
        for i in range(1, L):
            for j in range(1, L):
                k = 2 * i - j
                if 0 <= k <= L:
                    M[i - 1, j - 1] = _SQRT2 * h[k]
        w, v = np.linalg.eig(M)
        col = np.real(v[:, np.argmin(np.abs(w - 1.0))])
        vals[1:L] = col / col.sum()
    else:  # Haar: indicator, left-continuous convention phi(0)=1
        vals[0] = 1.0
    for m in range(1, depth + 1):
        half = 2 ** (m - 1)
        new = np.zeros(L * 2**m + 1)
        new[::2] = vals
        odd = np.arange(1, len(new), 2)
        acc = np.zeros(len(odd))
        for j in range(len(h)):
            p = odd - j * half
            ok = (p >= 0) & (p < len(vals))
            acc[ok] += _SQRT2 * h[j] * vals[p[ok]]
        new[1::2] = acc
        vals = new
    return vals


# ---------------------------------------------------------------------------
# Basis specification


@dataclass
class BasisSpec:
    """Periodized wavelet basis of L2(T^d) truncated at resolution J.

    Immutable after construction; all evaluation helpers are pure.
    """

    family: str
    J: int
    d: int
    S: int = 1
    cascade_depth: int = 0
    h: np.ndarray = field(repr=False, default=None)
    g: np.ndarray = field(repr=False, default=None)
    phi_table: np.ndarray = field(repr=False, default=None)

    @property
    def v_J(self):
        return 2 ** (self.J * self.d)

    @property
    def n_per_axis(self):
        return 2**self.J

    @property
    def support_len(self):
        """Per-axis count of scaling functions active at a point."""
        return 1 if self.family == "haar" else 2 * self.S - 1

    def header_tuple(self):
        return (self.family, self.S, self.J, self.d, self.cascade_depth)

    def __eq__(self, other):
        return isinstance(other, BasisSpec) and self.header_tuple() == other.header_tuple()


def build_basis(family, J, d, S=None, cascade_depth=None):
    """Construct a BasisSpec; Daubechies tables are materialized here."""
    family = family.lower()
    if family not in ("haar", "daubechies"):
        raise ConfigurationError(f"unsupported wavelet family {family!r}")
    if J < 0:
        raise ConfigurationError("resolution level J must be >= 0")
    if not 1 <= d <= 3:
        raise ConfigurationError("dimension d must be 1, 2 or 3")
    if family == "haar":
        S = 1
    else:
        if S is None or S < 2:
            raise ConfigurationError("Daubechies requires vanishing moments S >= 2")
    if cascade_depth is None:
        cascade_depth = max(J + 10, 15)
    h = daubechies_filter(S)
    g = highpass_from_lowpass(h)
    table = None if family == "haar" else cascade_table(h, cascade_depth)
    return BasisSpec(family=family, J=J, d=d, S=S, cascade_depth=cascade_depth,
                     h=h, g=g, phi_table=table)


# ---------------------------------------------------------------------------
# Coefficient fields

SCALING = "scaling"
MULTIRES = "multires"


@dataclass
class CoefficientField:
    """Scalar or vector field as coefficients over a BasisSpec.

    ``values`` has shape (v_J,) for a scalar field or (d, v_J) for a
    vector field.
    """

    spec: BasisSpec
    coords: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        v = self.spec.v_J
        if self.coords not in (SCALING, MULTIRES):
            raise ShapeError(f"unknown coordinate system {self.coords!r}")
        if self.values.shape not in ((v,), (self.spec.d, v)):
            raise ShapeError(
                f"coefficient array shape {self.values.shape} does not match "
                f"v_J={v}, d={self.spec.d}")

    @property
    def is_vector(self):
        return self.values.ndim == 2

    def copy_with(self, values=None, coords=None):
        return CoefficientField(self.spec,
                                self.coords if coords is None else coords,
                                self.values if values is None else values)


def _check_same_spec(c1, c2):
    if c1.spec != c2.spec:
        raise ShapeError("coefficient fields live over different basis specs")


# ---------------------------------------------------------------------------
# Pointwise evaluation in scaling coordinates


def _phi_values(spec, t):
    """phi(t) for t in [0, 2S-1], by table interpolation (exact for Haar)."""
    if spec.family == "haar":
        return np.ones_like(t)
    table = spec.phi_table
    u = t * 2**spec.cascade_depth
    i0 = np.floor(u).astype(np.int64)
    np.clip(i0, 0, len(table) - 2, out=i0)
    f = u - i0
    return table[i0] * (1.0 - f) + table[i0 + 1] * f


def _axis_eval(spec, x):
    """Active per-axis scaling functions at points x in [0, 1).

    Returns (k, vals), both of shape (n, support_len): translate index
    and value of each scaling function that is nonzero at x.
    """
    nper = spec.n_per_axis
    L = spec.support_len
    u = x * nper
    i0 = np.floor(u).astype(np.int64)
    i0 = np.minimum(i0, nper - 1)  # guard x == 1.0 after roundoff
    f = u - i0
    scale = 2.0 ** (spec.J / 2.0)
    k = np.empty((len(x), L), dtype=np.int64)
    vals = np.empty((len(x), L))
    for j in range(L):
        k[:, j] = (i0 - j) % nper
        vals[:, j] = scale * _phi_values(spec, f + j)
    return k, vals


def box_index(spec, pts):
    """Flat index of the dyadic box containing each wrapped point."""
    pts = np.atleast_2d(pts)
    nper = spec.n_per_axis
    i = np.minimum(np.floor(pts * nper).astype(np.int64), nper - 1)
    idx = i[:, 0]
    for ax in range(1, spec.d):
        idx = idx * nper + i[:, ax]
    return idx


def active_columns(spec, pts):
    """Nonzero scaling functions at each point.

    Returns (cols, vals) of shape (n, m) with m = support_len**d: flat
    column index into the v_J scaling coordinates and function value.
    """
    pts = np.atleast_2d(pts)
    n, d = pts.shape
    if d != spec.d:
        raise ShapeError(f"points have dimension {d}, basis has d={spec.d}")
    nper = spec.n_per_axis
    per_axis = [_axis_eval(spec, pts[:, ax]) for ax in range(d)]
    L = spec.support_len
    m = L**d
    cols = np.empty((n, m), dtype=np.int64)
    vals = np.empty((n, m))
    for t in range(m):
        rem = t
        idx = None
        val = None
        for ax in range(d):
            j = rem % L
            rem //= L
            kj, vj = per_axis[ax]
            idx = kj[:, j] if idx is None else idx * nper + kj[:, j]
            val = vj[:, j] if val is None else val * vj[:, j]
        cols[:, t] = idx
        vals[:, t] = val
    return cols, vals


def scaling_values(spec, pts):
    """Dense (n, v_J) matrix of all scaling-function values at pts."""
    cols, vals = active_columns(spec, pts)
    n = cols.shape[0]
    out = np.zeros((n, spec.v_J))
    rows = np.arange(n)
    if spec.n_per_axis >= spec.support_len:
        for t in range(cols.shape[1]):
            out[rows, cols[:, t]] += vals[:, t]
    else:  # short-period wraps can collide; rare, small J
        for t in range(cols.shape[1]):
            np.add.at(out, (rows, cols[:, t]), vals[:, t])
    return out


def synthesize(c, x):
    """Evaluate the field at torus points (reduced mod 1 first).

    x is one point (d,) or an array (n, d); returns scalars of shape
    (n,) or vectors (n, d) accordingly (squeezed for a single point).
    """
    single = np.asarray(x, dtype=float).ndim == 1
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != c.spec.d:
        raise ShapeError(f"points have dimension {pts.shape[1]}, field has d={c.spec.d}")
    pts = pts - np.floor(pts)
    theta = c.values if c.coords == SCALING else transform(c, "inv").values
    cols, vals = active_columns(c.spec, pts)
    if theta.ndim == 1:
        out = np.einsum("nm,nm->n", vals, theta[cols])
    else:
        out = np.einsum("nm,jnm->nj", vals, theta[:, cols])
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Fast orthogonal wavelet transform (periodic)


def _analysis_axis(a, h, g, axis):
    N = a.shape[axis]
    n2 = N // 2
    base = 2 * np.arange(n2)
    sh = list(a.shape)
    sh[axis] = n2
    approx = np.zeros(sh)
    detail = np.zeros(sh)
    for n in range(len(h)):
        sl = np.take(a, (base + n) % N, axis=axis)
        approx += h[n] * sl
        detail += g[n] * sl
    return np.concatenate([approx, detail], axis=axis)


def _synthesis_axis(c, h, g, axis):
    N = c.shape[axis]
    n2 = N // 2
    approx = np.take(c, np.arange(n2), axis=axis)
    detail = np.take(c, np.arange(n2, N), axis=axis)
    out = np.zeros(c.shape)
    base = 2 * np.arange(n2)
    moved = np.moveaxis(out, axis, 0)
    ap = np.moveaxis(approx, axis, 0)
    de = np.moveaxis(detail, axis, 0)
    for n in range(len(h)):
        moved[(base + n) % N] += h[n] * ap + g[n] * de
    return out


def _level_blocks(spec):
    """(offset, size) of each multires level block; father is index 0."""
    d = spec.d
    out = []
    off = 1
    for l in range(spec.J):
        size = (2**d - 1) * 2 ** (l * d)
        out.append((off, size))
        off += size
    return out


def level_of_index(spec):
    """Prior level of every multiresolution coordinate (father -> 0)."""
    lev = np.zeros(spec.v_J, dtype=np.int64)
    for l, (off, size) in enumerate(_level_blocks(spec)):
        lev[off:off + size] = l
    return lev


def _forward_1field(spec, flat):
    d, J = spec.d, spec.J
    h, g = spec.h, spec.g
    out = np.empty(spec.v_J)
    cube = flat.reshape((2**J,) * d)
    blocks = _level_blocks(spec)
    for l in range(J - 1, -1, -1):
        for ax in range(d):
            cube = _analysis_axis(cube, h, g, ax)
        n2 = 2**l
        off, _ = blocks[l]
        pos = off
        for mask in range(1, 2**d):
            sl = tuple(slice(n2, 2 * n2) if (mask >> ax) & 1 else slice(0, n2)
                       for ax in range(d))
            out[pos:pos + n2**d] = cube[sl].ravel()
            pos += n2**d
        cube = cube[(slice(0, n2),) * d]
    out[0] = cube.ravel()[0]
    return out


def _inverse_1field(spec, flat):
    d, J = spec.d, spec.J
    h, g = spec.h, spec.g
    blocks = _level_blocks(spec)
    cube = np.array([flat[0]]).reshape((1,) * d)
    for l in range(J):
        n2 = 2**l
        big = np.zeros((2 * n2,) * d)
        big[(slice(0, n2),) * d] = cube
        off, _ = blocks[l]
        pos = off
        for mask in range(1, 2**d):
            sl = tuple(slice(n2, 2 * n2) if (mask >> ax) & 1 else slice(0, n2)
                       for ax in range(d))
            big[sl] = flat[pos:pos + n2**d].reshape((n2,) * d)
            pos += n2**d
        for ax in range(d - 1, -1, -1):
            big = _synthesis_axis(big, h, g, ax)
        cube = big
    return cube.ravel()


def transform(c, direction):
    """Orthogonal fast transform between coordinate systems.

    direction "fwd": ScalingLevelJ -> Multiresolution; "inv" reverses.
    Euclidean norm of the coefficients is preserved.
    """
    if direction not in ("fwd", "inv"):
        raise ShapeError(f"unknown transform direction {direction!r}")
    src = SCALING if direction == "fwd" else MULTIRES
    dst = MULTIRES if direction == "fwd" else SCALING
    if c.coords != src:
        raise ShapeError(f"transform {direction!r} expects {src} coordinates, "
                         f"got {c.coords}")
    fn = _forward_1field if direction == "fwd" else _inverse_1field
    vals = c.values if c.is_vector else c.values[None, :]
    out = np.stack([fn(c.spec, row) for row in vals])
    return CoefficientField(c.spec, dst, out if c.is_vector else out[0])


def transform_matrix(spec):
    """Dense orthogonal matrix W mapping scaling -> multires coordinates."""
    v = spec.v_J
    W = np.empty((v, v))
    eye = np.eye(v)
    for j in range(v):
        W[:, j] = _forward_1field(spec, eye[j])
    return W


# ---------------------------------------------------------------------------
# Prior weights and coefficient-space norms


@dataclass
class PriorSpec:
    """Gaussian-series prior: per-level weights sigma_l = 2^{-l(alpha+d/2)}."""

    alpha: float
    a: float
    J: int
    d: int

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("prior regularity alpha must be >= 0")
        if self.a <= 0:
            raise ConfigurationError("truncation regularity a must be > 0")
        if self.J < 0:
            raise ConfigurationError("prior level J must be >= 0")

    @classmethod
    def from_horizon(cls, T, a, d, alpha=0.0):
        """Level rule J = round(log2 T / (2a + d))."""
        J = max(int(np.rint(np.log2(T) / (2.0 * a + d))), 0)
        return cls(alpha=alpha, a=a, J=J, d=d)


def prior_sigma(prior, l):
    """Weight sigma_l = 2^{-l(alpha + d/2)}; the father uses l = 0."""
    l = max(int(l), 0)
    if l > prior.J:
        raise ConfigurationError(f"level {l} exceeds prior level J={prior.J}")
    return 2.0 ** (-l * (prior.alpha + prior.d / 2.0))


def prior_sigma_vector(prior, spec):
    """sigma per multiresolution coordinate."""
    if prior.J != spec.J or prior.d != spec.d:
        raise ShapeError("prior (J, d) does not match basis spec")
    lev = level_of_index(spec)
    return 2.0 ** (-lev * (prior.alpha + prior.d / 2.0))


def rkhs_inner(c1, c2, prior):
    """Prior RKHS inner product: sum sigma_l^{-2} c1 c2 over coordinates."""
    _check_same_spec(c1, c2)
    if c1.coords != MULTIRES or c2.coords != MULTIRES:
        raise ShapeError("rkhs_inner requires multiresolution coordinates")
    if c1.values.shape != c2.values.shape:
        raise ShapeError("fields have different shapes")
    w = prior_sigma_vector(prior, c1.spec) ** -2.0
    return float(np.sum(w * c1.values * c2.values))


def sobolev_norm(c, s):
    """Wavelet Sobolev norm (sum 2^{2ls} |c_{l,r}|^2)^{1/2}."""
    if c.coords != MULTIRES:
        raise ShapeError("sobolev_norm requires multiresolution coordinates")
    w = 4.0 ** (level_of_index(c.spec) * s)
    return float(np.sqrt(np.sum(w * c.values**2)))


# ---------------------------------------------------------------------------
# Quadrature: projections and weighted Gram matrices


def quadrature_grid(spec, extra_depth=6):
    """Midpoint tensor grid with 2^(J+extra_depth) cells per axis.

    Returns (pts, vol): points of shape (n_cells**d, d) and the cell
    volume. Exact for integrands piecewise constant on level-(J+extra)
    dyadic boxes, hence for all Haar basis products.
    """
    n1 = 2 ** (spec.J + extra_depth)
    x1 = (np.arange(n1) + 0.5) / n1
    if spec.d == 1:
        pts = x1[:, None]
    else:
        grids = np.meshgrid(*([x1] * spec.d), indexing="ij")
        pts = np.stack([gr.ravel() for gr in grids], axis=1)
    return pts, n1 ** (-spec.d)


def quadrature_gram(spec, weight=None, extra_depth=None, chunk=1 << 16):
    """Gram matrix <phi_a, phi_b>_weight in scaling coordinates.

    weight: None (Lebesgue), a callable on (n, d) points, or an array of
    values on the quadrature grid.  The default grid is 2^(J+6) cells
    per axis (exact for Haar); Daubechies uses 2^(J+8) because the
    midpoint rule only sees the scaling function's limited smoothness.
    """
    if extra_depth is None:
        extra_depth = 6 if spec.family == "haar" else {1: 12, 2: 8, 3: 6}[spec.d]
    pts, vol = quadrature_grid(spec, extra_depth)
    n = len(pts)
    if weight is None:
        w = np.full(n, vol)
    elif callable(weight):
        w = np.empty(n)
        for i in range(0, n, chunk):
            w[i:i + chunk] = np.asarray(weight(pts[i:i + chunk]), dtype=float).ravel()
        w *= vol
    else:
        w = np.asarray(weight, dtype=float).ravel() * vol
        if len(w) != n:
            raise ShapeError("weight grid does not match the quadrature grid")
    v = spec.v_J
    if spec.family == "haar":
        idx = box_index(spec, pts)
        diag = np.bincount(idx, weights=w, minlength=v) * (2.0 ** (spec.J * spec.d))
        return np.diag(diag)
    G = np.zeros((v, v))
    for i in range(0, n, chunk):
        Phi = scaling_values(spec, pts[i:i + chunk])
        G += Phi.T @ (Phi * w[i:i + chunk, None])
    return 0.5 * (G + G.T)


def analyze(f, spec, extra_depth=6, chunk=1 << 16):
    """L2 projection onto V_J by midpoint quadrature (scaling coords).

    f: callable on (n, d) points returning scalars (n,) or vectors
    (n, d).  Returns a CoefficientField in scaling coordinates.
    """
    pts, vol = quadrature_grid(spec, extra_depth)
    n = len(pts)
    probe = np.asarray(f(pts[:1]), dtype=float)
    vector = probe.ndim == 2
    coefs = np.zeros((spec.d, spec.v_J)) if vector else np.zeros(spec.v_J)
    for i in range(0, n, chunk):
        Phi = scaling_values(spec, pts[i:i + chunk])
        fv = np.asarray(f(pts[i:i + chunk]), dtype=float)
        if vector:
            coefs += vol * (fv.T @ Phi)
        else:
            coefs += vol * (fv @ Phi)
    return CoefficientField(spec, SCALING, coefs)
