import numpy as np
import pytest

from driftlab.basis import CoefficientField, build_basis, transform
from driftlab.errors import ShapeError
from driftlab.likelihood import (hellinger_distance, lan_residual,
                                 log_likelihood, quadratic_form_likelihood,
                                 sufficient_stats)
from driftlab.sde import simulate, wrap


def _random_field(spec, seed, scale=1.0):
    gen = np.random.default_rng(seed)
    vals = scale * gen.standard_normal((spec.d, spec.v_J))
    return CoefficientField(spec, "scaling", vals)


def test_frozen_point_single_box():
    # zero-noise path with b(x0) = 0 stays at one point
    spec = build_basis("haar", 2, 1)
    b = lambda pts: -np.sin(2 * np.pi * (pts - 0.375))
    path = simulate(b, [0.375], 1.0, 1e-2, seed=0, noise_scale=0.0)
    stats = sufficient_stats(path, spec)
    v = spec.v_J
    box = int(0.375 * 4)
    expected = np.zeros((v, v))
    expected[box, box] = 2.0 ** (spec.J * spec.d)  # Phi^2 = 2^{Jd}
    assert np.allclose(stats.gram, expected, atol=1e-12)
    assert np.all(stats.m == 0.0)


def test_gram_identity_long_uniform_path():
    spec = build_basis("haar", 2, 1)
    path = simulate(None, [0.0], 2000.0, 1e-3, seed=21)
    stats = sufficient_stats(path, spec)
    assert np.max(np.abs(stats.gram - np.eye(4))) < 0.15


def test_unvisited_box_zero_column():
    spec = build_basis("haar", 2, 1)
    path = simulate(None, [0.125], 0.05, 1e-3, seed=2, noise_scale=0.0)
    stats = sufficient_stats(path, spec)  # frozen at x=0.125, box 0
    for k in range(1, 4):
        assert np.all(stats.gram[k] == 0.0)
        assert np.all(stats.gram[:, k] == 0.0)


def test_gram_chunk_invariance():
    spec = build_basis("haar", 2, 1)
    path = simulate(lambda p: np.sin(2 * np.pi * p), [0.2], 5.0, 1e-3, seed=9)
    s1 = sufficient_stats(path, spec, chunk=1 << 20)
    s2 = sufficient_stats(path, spec, chunk=997)
    assert np.array_equal(s1.gram, s2.gram)
    assert np.array_equal(s1.m, s2.m)


def test_gram_daubechies_psd_and_symmetry():
    spec = build_basis("daubechies", 2, 1, S=2)
    path = simulate(None, [0.3], 50.0, 1e-3, seed=4)
    stats = sufficient_stats(path, spec)
    assert np.array_equal(stats.gram, stats.gram.T)
    w = np.linalg.eigvalsh(stats.gram)
    assert w.min() >= -1e-10 * np.trace(stats.gram)


def test_dimension_mismatch():
    spec = build_basis("haar", 2, 2)
    path = simulate(None, [0.0], 1.0, 1e-3, seed=1)
    with pytest.raises(ShapeError):
        sufficient_stats(path, spec)


def test_log_likelihood_zero_drift():
    path = simulate(None, [0.0], 1.0, 1e-3, seed=5)
    spec = build_basis("haar", 2, 1)
    zero = CoefficientField(spec, "scaling", np.zeros((1, spec.v_J)))
    assert log_likelihood(path, zero) == 0.0


def test_quadratic_form_identity():
    spec = build_basis("haar", 3, 1)
    path = simulate(lambda p: np.cos(2 * np.pi * p), [0.1], 20.0, 1e-3, seed=8)
    stats = sufficient_stats(path, spec)
    b = _random_field(spec, 13)
    direct = log_likelihood(path, b)
    quad = quadratic_form_likelihood(stats, b)
    assert abs(direct - quad) <= 1e-10 * max(1.0, abs(direct))


def test_quadratic_form_identity_2d():
    spec = build_basis("haar", 1, 2)
    path = simulate(None, [0.0, 0.25], 10.0, 1e-3, seed=3)
    stats = sufficient_stats(path, spec)
    b = _random_field(spec, 14)
    direct = log_likelihood(path, b)
    quad = quadratic_form_likelihood(stats, b)
    assert abs(direct - quad) <= 1e-10 * max(1.0, abs(direct))


def test_likelihood_bilinearity_in_drift():
    spec = build_basis("haar", 2, 1)
    path = simulate(None, [0.4], 5.0, 1e-3, seed=6)
    b = _random_field(spec, 15)
    b2 = b.copy_with(values=2.0 * b.values)
    stats = sufficient_stats(path, spec)
    lin = float(np.sum(b.values * stats.m))
    quad = stats.T * float(b.values[0] @ stats.gram @ b.values[0])
    l2 = log_likelihood(path, b2)
    assert l2 == pytest.approx(2.0 * lin - 4.0 * 0.5 * quad, rel=1e-9)


def test_hellinger_properties():
    spec = build_basis("haar", 2, 1)
    path = simulate(None, [0.7], 10.0, 1e-3, seed=7)
    stats = sufficient_stats(path, spec)
    b1 = _random_field(spec, 16)
    b2 = _random_field(spec, 17)
    assert hellinger_distance(stats, b1, b1) == 0.0
    # scaling around b1
    b_mix = b1.copy_with(values=b1.values + 3.0 * (b2.values - b1.values))
    assert hellinger_distance(stats, b1, b_mix) == pytest.approx(
        3.0 * hellinger_distance(stats, b1, b2), rel=1e-12)
    # identity Gram reduces to the coefficient L2 distance
    stats.gram = np.eye(spec.v_J)
    assert hellinger_distance(stats, b1, b2) == pytest.approx(
        np.linalg.norm(b1.values - b2.values), rel=1e-12)


def test_multires_fields_accepted():
    spec = build_basis("haar", 2, 1)
    path = simulate(None, [0.7], 2.0, 1e-3, seed=7)
    stats = sufficient_stats(path, spec)
    b = _random_field(spec, 18)
    bm = transform(b, "fwd")
    assert hellinger_distance(stats, b, bm) < 1e-12


def test_lan_residual_identity():
    spec = build_basis("haar", 2, 1)
    path = simulate(lambda p: 0.5 * np.sin(2 * np.pi * p), [0.0], 10.0, 1e-3, seed=19)
    b0 = _random_field(spec, 20, scale=0.5)
    h = _random_field(spec, 21)
    ell0 = log_likelihood(path, b0)
    assert lan_residual(path, b0, h) < 1e-9 * (1.0 + abs(ell0))


def test_lan_residual_zero_direction():
    spec = build_basis("haar", 1, 1)
    path = simulate(None, [0.0], 1.0, 1e-3, seed=22)
    b0 = _random_field(spec, 23)
    zero = CoefficientField(spec, "scaling", np.zeros((1, spec.v_J)))
    assert lan_residual(path, b0, zero) == 0.0


def test_stats_concatenation_linearity():
    # stats of a concatenated path = T-weighted combination of halves
    spec = build_basis("haar", 2, 1)
    b = lambda p: np.sin(2 * np.pi * p)
    path = simulate(b, [0.2], 4.0, 1e-3, seed=30)
    n2 = path.n_steps // 2
    from driftlab.sde import DiffusionPath
    first = DiffusionPath(1, path.delta, n2, path.positions[:n2 + 1], 0, path.x0)
    second = DiffusionPath(1, path.delta, n2, path.positions[n2:], 0, path.positions[n2])
    s_full = sufficient_stats(path, spec)
    s1 = sufficient_stats(first, spec)
    s2 = sufficient_stats(second, spec)
    gram_comb = (s1.gram * first.T + s2.gram * second.T) / path.T
    assert np.allclose(gram_comb, s_full.gram, rtol=1e-12, atol=1e-15)
    assert np.allclose(s1.m + s2.m, s_full.m, rtol=1e-12, atol=1e-12)


@pytest.mark.slow
def test_lan_martingale_variance():
    # Var W_T(h) over replications approaches the weighted norm ||h||^2_{mu0}
    from driftlab import rng as dlrng
    from driftlab.elliptic import invariant_measure, to_grid
    amp = 0.5
    b0 = lambda p: -2 * np.pi * amp * np.sin(2 * np.pi * p)
    h = lambda p: np.cos(2 * np.pi * p) + 0.5
    T = 500.0
    ws = []
    for rep in range(200):
        path = simulate(b0, [0.0], T, 1e-3, seed=dlrng.derive_seed(505, rep))
        pts = wrap(path.positions[:-1])
        inc = np.diff(path.positions, axis=0)
        hv = h(pts)
        ws.append(np.sum(hv * (inc - b0(pts) * path.delta)) / np.sqrt(T))
    mu0 = invariant_measure(b0, K=32, d=1)
    n = 1 << 12
    x = np.arange(n) / n
    target = float(np.mean(h(x[:, None]).ravel() ** 2 * to_grid(mu0.density, n)))
    ratio = np.var(ws, ddof=1) / target
    assert 0.75 < ratio < 1.25
