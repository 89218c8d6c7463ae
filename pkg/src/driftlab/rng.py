"""Counter-based random numbers.

Generator: splitmix64 used as a pure counter-based generator.  Output
word ``i`` of stream ``seed`` is ``mix64(seed + (i + 1) * GAMMA)`` with
the standard splitmix64 finalizer and gamma; every word is therefore
addressable by ``(seed, i)`` alone, is identical across platforms
(uint64 arithmetic only) and independent of chunking.

Normal variates use the Box-Muller transform on the open unit interval:
the pair ``(z_{2p}, z_{2p+1})`` is built from uniforms ``2p`` and
``2p + 1`` of the stream, so any slice of the normal stream can be
regenerated without producing its prefix.
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0**-53


def mix64(z):
    """splitmix64 finalizer on uint64 scalars or arrays (modular)."""
    z = np.uint64(z) if np.isscalar(z) else z.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_seed(seed, *tags):
    """Derive an independent stream seed from integer tags.

    Used to give replications, posterior draws and pipeline stages
    disjoint streams: ``derive_seed(seed, rep)``,
    ``derive_seed(seed, stage, rep)``, ...
    """
    s = np.uint64(seed)
    with np.errstate(over="ignore"):
        for t in tags:
            s = mix64(s + np.uint64(1) + mix64(np.uint64(t) * GAMMA))
    return int(s)


def uniforms(seed, start, count):
    """``count`` uniforms in (0, 1) at counters ``start..start+count-1``."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        words = mix64(np.uint64(seed) + (idx + np.uint64(1)) * GAMMA)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def normals(seed, start, count):
    """Standard normals ``start..start+count-1`` of stream ``seed``.

    Slices of the stream agree with a single full generation, so chunked
    consumers (the path simulator) are reproducible for any chunk size.
    """
    if count == 0:
        return np.empty(0)
    p0 = start // 2
    p1 = (start + count - 1) // 2
    npairs = p1 - p0 + 1
    u = uniforms(seed, 2 * p0, 2 * npairs)
    u1 = u[0::2]
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * npairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    lo = start - 2 * p0
    return z[lo:lo + count]
