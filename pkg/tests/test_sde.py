import numpy as np
import pytest

from driftlab import elliptic
from driftlab.basis import CoefficientField, build_basis
from driftlab.errors import ConfigurationError, SimulationError
from driftlab.sde import ergodic_average, simulate, wrap


def test_brownian_increment_moments():
    delta, T = 1e-3, 50.0
    path = simulate(None, [0.0], T, delta, seed=11)
    inc = np.diff(path.positions[:, 0])
    n = len(inc)
    assert abs(inc.mean()) < 4.0 * np.sqrt(delta / n)
    assert abs(inc.var() - delta) < 4.0 * delta * np.sqrt(2.0 / n)


def test_brownian_2d_moments():
    delta, T = 1e-3, 20.0
    path = simulate(None, [0.0, 0.5], T, delta, seed=3)
    inc = np.diff(path.positions, axis=0)
    n = len(inc)
    for j in range(2):
        assert abs(inc[:, j].mean()) < 4.0 * np.sqrt(delta / n)
        assert abs(inc[:, j].var() - delta) < 4.0 * delta * np.sqrt(2.0 / n)


def test_constant_drift_exact():
    # dyadic delta and c keep repeated additions exact in binary
    delta = 2.0**-10
    c = 0.5
    path = simulate([c, c], [0.0, 1.0], 1.0, delta, seed=1, noise_scale=0.0)
    assert path.positions[-1, 0] == c * 1.0
    assert path.positions[-1, 1] == 1.0 + c * 1.0


def test_sine_fixed_point():
    b = lambda pts: -2.0 * np.pi * 0.5 * np.sin(2.0 * np.pi * pts)
    path = simulate(b, [0.0], 1.0, 1e-3, seed=5, noise_scale=0.0)
    assert np.all(path.positions == 0.0)


def test_wrap_values():
    assert wrap(np.array([1.25])) == pytest.approx(0.25)
    assert wrap(np.array([-0.25])) == pytest.approx(0.75)
    assert wrap(np.array([3.0])) == 0.0
    w = wrap(np.array([-1e-18, 0.999999, 7.5]))
    assert np.all((w >= 0.0) & (w < 1.0))
    assert np.array_equal(wrap(w), w)


def test_reproducibility_bitwise():
    b = lambda pts: np.sin(2 * np.pi * pts)
    p1 = simulate(b, [0.3], 2.0, 1e-3, seed=42)
    p2 = simulate(b, [0.3], 2.0, 1e-3, seed=42)
    assert np.array_equal(p1.positions, p2.positions)
    p3 = simulate(b, [0.3], 2.0, 1e-3, seed=43)
    assert not np.array_equal(p1.positions, p3.positions)


def test_integral_step_check():
    with pytest.raises(ConfigurationError):
        simulate(None, [0.0], 1.0, 3e-4, seed=1)
    with pytest.raises(ConfigurationError):
        simulate(None, [0.0], 1.0, -1e-3, seed=1)


def test_nonfinite_drift_reports_step():
    big = lambda pts: np.full_like(pts, 1e308)
    with pytest.raises(SimulationError, match="step 1"):
        simulate(big, [0.0], 3.0, 1.0, seed=1, noise_scale=0.0)
    inf = lambda pts: np.full_like(pts, np.inf)
    with pytest.raises(SimulationError, match="grid node"):
        simulate(inf, [0.0], 1.0, 1e-3, seed=1, noise_scale=0.0)


def test_euler_order_one_zero_noise():
    b = lambda pts: 0.3 + np.sin(2 * np.pi * pts)
    x0, T = [0.2], 1.0
    ref = simulate(b, x0, T, 2.0**-14, seed=0, noise_scale=0.0).positions[-1, 0]
    errs = []
    for k in (7, 8, 9):
        xT = simulate(b, x0, T, 2.0**-k, seed=0, noise_scale=0.0).positions[-1, 0]
        errs.append(abs(xT - ref))
    for e0, e1 in zip(errs, errs[1:]):
        assert 1.6 < e0 / e1 < 2.4


def test_ergodic_average_trivial():
    path = simulate(None, [0.0], 1.0, 1e-3, seed=2)
    assert ergodic_average(path, lambda pts: np.ones(len(pts))) == 1.0
    assert ergodic_average(path, lambda pts: np.zeros(len(pts))) == 0.0


def test_ergodic_average_clt_bound():
    # b = 0, g = cos(2 pi x): 4-sigma band with V = 1/(2 pi^2)
    path = simulate(None, [0.0], 500.0, 1e-3, seed=7)
    avg = ergodic_average(path, lambda pts: np.cos(2 * np.pi * pts[:, 0]))
    V = 1.0 / (2.0 * np.pi**2)
    assert abs(avg) < 4.0 * np.sqrt(V / 500.0)


def test_haar_field_drift_table_exact():
    from driftlab.basis import synthesize
    spec = build_basis("haar", 2, 1)
    c = CoefficientField(spec, "scaling", np.array([[1.0, -0.5, 0.25, 0.0]]))
    delta = 2.0**-8
    path = simulate(c, [0.1], 0.25, delta, seed=3, noise_scale=0.0)
    # every increment is exactly b(wrapped X_i) * delta for the Haar field
    pts = wrap(path.positions[:-1])
    inc = np.diff(path.positions[:, 0])
    bvals = synthesize(c, pts).ravel()
    # lookup is exact; additions may round one ulp at binade crossings
    assert np.allclose(inc, bvals * delta, rtol=0.0, atol=1e-16)


@pytest.mark.slow
def test_ergodic_consistency_gradient_drift():
    # for b = grad B the empirical average of g converges to int g e^{2B}/Z
    amp = 0.5
    B = lambda pts: amp * np.cos(2 * np.pi * pts[:, 0])
    b = lambda pts: -2 * np.pi * amp * np.sin(2 * np.pi * pts)
    g = lambda pts: np.cos(2 * np.pi * pts[:, 0])
    mu = elliptic.gradient_oracle(B, d=1, K=32)
    x = np.arange(1 << 14) / (1 << 14)
    target = float(np.mean(np.cos(2 * np.pi * x) * mu.density.grid_values))
    med = []
    for T in (125.0, 500.0, 2000.0):
        errs = []
        for rep in range(20):
            path = simulate(b, [0.0], T, 1e-3, seed=1000 + rep)
            errs.append(abs(ergodic_average(path, g) - target))
        med.append(np.median(errs))
    assert med[0] > med[1] > med[2]
