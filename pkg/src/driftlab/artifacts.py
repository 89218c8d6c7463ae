"""Binary artifact files.

Every artifact starts with an 8-byte magic, a uint32 format version and
a type-specific header; all integers and floats are little-endian and
arrays are float64 (complex stored as re/im pairs).  Headers carry
SHA-256 digests of upstream artifacts so `describe` can surface the
provenance chain (stats -> path, posterior -> stats).
"""

import hashlib
import struct

import numpy as np

from .basis import CoefficientField, PriorSpec, build_basis
from .elliptic import FourierField
from .errors import ArtifactError
from .likelihood import SufficientStatistics, basis_hash
from .posterior import GaussianPosterior
from .sde import DiffusionPath

VERSION = 1
MAGIC_PATH = b"DLPATH01"
MAGIC_COEF = b"DLCOEF01"
MAGIC_STAT = b"DLSTAT01"
MAGIC_POST = b"DLPOST01"
MAGIC_FOUR = b"DLFOUR01"
MAGIC_DRAW = b"DLDRAW01"

_FAMILY_CODE = {"haar": 0, "daubechies": 1}
_FAMILY_NAME = {v: k for k, v in _FAMILY_CODE.items()}
_COORD_CODE = {"scaling": 0, "multires": 1}
_COORD_NAME = {v: k for k, v in _COORD_CODE.items()}


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for blk in iter(lambda: fh.read(1 << 20), b""):
            h.update(blk)
    return h.digest()


class _Reader:
    """Byte reader that reports the offset of a truncated read."""

    def __init__(self, data, name):
        self.data = data
        self.name = name
        self.off = 0

    def take(self, n):
        if self.off + n > len(self.data):
            raise ArtifactError(
                f"{self.name}: truncated at byte offset {self.off} "
                f"(needed {n} more, file has {len(self.data)})")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def array(self, count, dtype=np.float64):
        raw = self.take(count * np.dtype(dtype).itemsize)
        return np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)

    def done(self):
        if self.off != len(self.data):
            raise ArtifactError(
                f"{self.name}: {len(self.data) - self.off} trailing bytes "
                f"after offset {self.off}")


def _open(path, magic):
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data, str(path))
    got = r.take(8)
    if got != magic:
        raise ArtifactError(f"{path}: bad magic {got!r}, expected {magic!r}")
    (ver,) = r.unpack("I")
    if ver != VERSION:
        raise ArtifactError(f"{path}: unsupported version {ver}")
    return r


def _spec_header(spec):
    return struct.pack("<BHHHI", _FAMILY_CODE[spec.family], spec.S, spec.J,
                       spec.d, spec.cascade_depth)


def _read_spec(r):
    fam, S, J, d, depth = r.unpack("BHHHI")
    return build_basis(_FAMILY_NAME[fam], J, d,
                       S=None if fam == 0 else S, cascade_depth=depth)


def _le(a):
    return np.ascontiguousarray(a, dtype=np.float64).astype("<f8").tobytes()


# -- diffusion paths --------------------------------------------------------


def write_path(path_obj, fname):
    with open(fname, "wb") as fh:
        fh.write(MAGIC_PATH)
        fh.write(struct.pack("<IHdQQ", VERSION, path_obj.d, path_obj.delta,
                             path_obj.n_steps, path_obj.seed & (2**64 - 1)))
        fh.write(_le(path_obj.x0))
        fh.write(_le(path_obj.positions))


def read_path(fname):
    r = _open(fname, MAGIC_PATH)
    d, delta, n_steps, seed = r.unpack("HdQQ")
    x0 = r.array(d)
    positions = r.array((n_steps + 1) * d).reshape(n_steps + 1, d)
    r.done()
    return DiffusionPath(d=d, delta=delta, n_steps=n_steps,
                         positions=positions, seed=seed, x0=x0)


# -- coefficient fields ------------------------------------------------------


def write_field(field, fname):
    vals = field.values if field.is_vector else field.values[None, :]
    with open(fname, "wb") as fh:
        fh.write(MAGIC_COEF)
        fh.write(struct.pack("<I", VERSION))
        fh.write(_spec_header(field.spec))
        fh.write(struct.pack("<BBH", _COORD_CODE[field.coords],
                             int(field.is_vector), vals.shape[0]))
        fh.write(_le(vals))


def read_field(fname):
    r = _open(fname, MAGIC_COEF)
    spec = _read_spec(r)
    coord, is_vector, nrow = r.unpack("BBH")
    vals = r.array(nrow * spec.v_J).reshape(nrow, spec.v_J)
    r.done()
    return CoefficientField(spec, _COORD_NAME[coord],
                            vals if is_vector else vals[0])


# -- sufficient statistics ---------------------------------------------------


def write_stats(stats, fname, path_digest=b""):
    pd = (path_digest or b"\x00" * 32)[:32].ljust(32, b"\x00")
    with open(fname, "wb") as fh:
        fh.write(MAGIC_STAT)
        fh.write(struct.pack("<I", VERSION))
        fh.write(_spec_header(stats.spec))
        fh.write(struct.pack("<dd", stats.T, stats.delta))
        fh.write(pd)
        fh.write(_le(stats.gram))
        fh.write(_le(stats.m))


def read_stats(fname):
    r = _open(fname, MAGIC_STAT)
    spec = _read_spec(r)
    T, delta = r.unpack("dd")
    pd = r.take(32)
    v = spec.v_J
    gram = r.array(v * v).reshape(v, v)
    m = r.array(spec.d * v).reshape(spec.d, v)
    r.done()
    return SufficientStatistics(spec=spec, T=T, delta=delta, gram=gram, m=m,
                                basis_hash=basis_hash(spec),
                                path_hash=pd.hex())


# -- posteriors --------------------------------------------------------------


def write_posterior(post, fname, stats_digest=b""):
    sd = (stats_digest or b"\x00" * 32)[:32].ljust(32, b"\x00")
    with open(fname, "wb") as fh:
        fh.write(MAGIC_POST)
        fh.write(struct.pack("<I", VERSION))
        fh.write(_spec_header(post.spec))
        fh.write(struct.pack("<ddHd", post.prior.alpha, post.prior.a,
                             post.prior.J, post.T))
        fh.write(sd)
        fh.write(_le(post.precision))
        fh.write(_le(post.chol))
        fh.write(_le(post.mean))


def read_posterior(fname):
    r = _open(fname, MAGIC_POST)
    spec = _read_spec(r)
    alpha, a, J, T = r.unpack("ddHd")
    sd = r.take(32)
    v = spec.v_J
    precision = r.array(v * v).reshape(v, v)
    chol = r.array(v * v).reshape(v, v)
    mean = r.array(spec.d * v).reshape(spec.d, v)
    r.done()
    prior = PriorSpec(alpha=alpha, a=a, J=J, d=spec.d)
    return GaussianPosterior(spec=spec, prior=prior, T=T, precision=precision,
                             chol=chol, mean=mean, stats_hash=sd.hex())


# -- Fourier fields ----------------------------------------------------------


def write_fourier(field, fname):
    with open(fname, "wb") as fh:
        fh.write(MAGIC_FOUR)
        fh.write(struct.pack("<IHI", VERSION, field.d, field.K))
        inter = np.empty(field.coeffs.size * 2)
        inter[0::2] = np.real(field.coeffs).ravel()
        inter[1::2] = np.imag(field.coeffs).ravel()
        fh.write(_le(inter))


def read_fourier(fname):
    r = _open(fname, MAGIC_FOUR)
    d, K = r.unpack("HI")
    n = (2 * K + 1) ** d
    inter = r.array(2 * n)
    r.done()
    return FourierField(d=d, K=K, coeffs=inter[0::2] + 1j * inter[1::2])


# -- posterior draw blocks ---------------------------------------------------


def write_draws(draws, fname, post_digest=b""):
    draws = np.asarray(draws, dtype=float)
    pd = (post_digest or b"\x00" * 32)[:32].ljust(32, b"\x00")
    with open(fname, "wb") as fh:
        fh.write(MAGIC_DRAW)
        fh.write(struct.pack("<IQHI", VERSION, draws.shape[0], draws.shape[1],
                             draws.shape[2]))
        fh.write(pd)
        fh.write(_le(draws))


def read_draws(fname):
    r = _open(fname, MAGIC_DRAW)
    n, d, v = r.unpack("QHI")
    pd = r.take(32)
    out = r.array(n * d * v).reshape(n, d, v)
    r.done()
    return out, pd.hex()


# -- describe ----------------------------------------------------------------


def describe(fname):
    """Human-readable one-artifact summary; raises ArtifactError on damage."""
    with open(fname, "rb") as fh:
        magic = fh.read(8)
    if magic == MAGIC_PATH:
        p = read_path(fname)
        return (f"path d={p.d} T={p.T:g} delta={p.delta:g} seed={p.seed} "
                f"n_steps={p.n_steps} x0={np.array2string(p.x0, precision=4)}")
    if magic == MAGIC_COEF:
        c = read_field(fname)
        s = c.spec
        kind = "vector" if c.is_vector else "scalar"
        return (f"coefficients {kind} family={s.family} S={s.S} J={s.J} "
                f"d={s.d} coords={c.coords} v_J={s.v_J}")
    if magic == MAGIC_STAT:
        st = read_stats(fname)
        w = np.linalg.eigvalsh(st.gram)
        s = st.spec
        return (f"stats family={s.family} J={s.J} d={s.d} v_J={s.v_J} "
                f"T={st.T:g} delta={st.delta:g} "
                f"gram_eig=[{w.min():.4g}, {w.max():.4g}] "
                f"path_sha256={st.path_hash}")
    if magic == MAGIC_POST:
        po = read_posterior(fname)
        return (f"posterior family={po.spec.family} J={po.spec.J} "
                f"d={po.spec.d} v_J={po.spec.v_J} T={po.T:g} "
                f"alpha={po.prior.alpha:g} a={po.prior.a:g} "
                f"stats_sha256={po.stats_hash}")
    if magic == MAGIC_FOUR:
        f = read_fourier(fname)
        return f"fourier d={f.d} K={f.K} mean={f.mean:.6g}"
    if magic == MAGIC_DRAW:
        dr, pd = read_draws(fname)
        return (f"draws n={dr.shape[0]} d={dr.shape[1]} v_J={dr.shape[2]} "
                f"posterior_sha256={pd}")
    raise ArtifactError(f"{fname}: unknown magic {magic!r}")
