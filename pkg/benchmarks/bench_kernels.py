"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs the Euler-Maruyama stepping kernel and the Haar accumulation
kernel through both backends on identical inputs, reports throughput,
and asserts bitwise-identical results (the two backends implement the
same arithmetic).

Usage: python benchmarks/bench_kernels.py [--steps N]
"""

import argparse
import time

import numpy as np

from driftlab import _kernels_py
from driftlab.basis import box_index, build_basis
from driftlab.rng import normals

try:
    from driftlab import _kernels_cy
except ImportError:
    _kernels_cy = None


def bench_em(impl, noise, table, mode, reps=3):
    d = noise.shape[1]
    out = np.empty_like(noise)
    best = np.inf
    for _ in range(reps):
        x = np.full(d, 0.25)
        t0 = time.perf_counter()
        err = impl.em_chunk(x, noise, 1e-3, 1.0, table, mode, out)
        best = min(best, time.perf_counter() - t0)
        assert err == -1
    return best, out.copy()


def bench_haar(impl, idx, inc, v, reps=3):
    best = np.inf
    for _ in range(reps):
        counts = np.zeros(v, dtype=np.int64)
        msum = np.zeros((inc.shape[1], v))
        t0 = time.perf_counter()
        impl.haar_chunk(idx, inc, v, counts, msum)
        best = min(best, time.perf_counter() - t0)
    return best, counts, msum


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=500_000)
    args = ap.parse_args()
    n = args.steps

    print(f"kernel benchmark: {n} steps per case")
    print(f"{'case':<28}{'python':>12}{'cython':>12}{'speedup':>10}  agreement")
    for d in (1, 2):
        gen = np.random.default_rng(11 + d)
        table = np.ascontiguousarray(gen.standard_normal((64,) * d + (d,)))
        noise = normals(7, 0, n * d).reshape(n, d)
        for mode, name in ((0, "nearest"), (1, "linear")):
            t_py, out_py = bench_em(_kernels_py, noise, table, mode)
            if _kernels_cy is None:
                print(f"em d={d} {name:<18}{t_py:>11.3f}s{'n/a':>12}")
                continue
            t_cy, out_cy = bench_em(_kernels_cy, noise, table, mode)
            same = np.array_equal(out_py, out_cy)
            print(f"em d={d} {name:<18}{t_py:>11.3f}s{t_cy:>11.3f}s"
                  f"{t_py / t_cy:>9.1f}x  bitwise={same}")
            assert same, "backends disagree"

    spec = build_basis("haar", 3, 1)
    gen = np.random.default_rng(3)
    pts = gen.random((n, 1))
    idx = box_index(spec, pts)
    inc = 0.03 * gen.standard_normal((n, 1))
    t_py, c_py, m_py = bench_haar(_kernels_py, idx, inc, spec.v_J)
    if _kernels_cy is not None:
        t_cy, c_cy, m_cy = bench_haar(_kernels_cy, idx, inc, spec.v_J)
        same = np.array_equal(c_py, c_cy) and np.array_equal(m_py, m_cy)
        print(f"{'haar accumulate':<28}{t_py:>11.3f}s{t_cy:>11.3f}s"
              f"{t_py / t_cy:>9.1f}x  bitwise={same}")
        assert same, "backends disagree"
    else:
        print(f"{'haar accumulate':<28}{t_py:>11.3f}s{'n/a':>12}")


if __name__ == "__main__":
    main()
