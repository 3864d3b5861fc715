import numpy as np
import pytest

from oscint.assumptions import check_assumptions
from oscint.errors import InvalidParameter
from oscint.field import (HEADER, GridField, apply_direct, apply_spectral, band_limited_field,
                          curve_nodes, epsilon_convergence, gaussian_field, grid_frequencies,
                          multiplier_grid, relative_l2)
from oscint.oscquad import FrequencyPoint, OperatorSpec, integrate_phase
from oscint.phase import PowerPhase

SPEC2 = OperatorSpec(2, 0.0)
EPS = 0.2


def test_zero_field(power31):
    f = GridField(np.zeros((16, 16)), 0.25, 0.25, -2, -2)
    assert not np.any(apply_direct(f, power31, SPEC2, EPS).data)
    assert not np.any(apply_spectral(f, power31, SPEC2, EPS).data)


def test_direct_linearity(power31):
    rng = np.random.default_rng(1)
    a = band_limited_field(32, rng, 4)
    b = band_limited_field(32, rng, 4)
    lhs = apply_direct(a.like(2 * a.data - 3j * b.data), power31, SPEC2, EPS).data
    rhs = 2 * apply_direct(a, power31, SPEC2, EPS).data - 3j * apply_direct(b, power31, SPEC2, EPS).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


def test_single_mode_is_eigenfunction(power31):
    n, L = 32, 4.0
    f0 = gaussian_field(n, L)
    X, Y = np.meshgrid(f0.xs, f0.ys)
    xi0, eta0 = 3 / L, -5 / L
    f = f0.like(np.exp(2j * np.pi * (xi0 * X + eta0 * Y)))
    out = apply_spectral(f, power31, SPEC2, EPS, tol=1e-10)
    m = integrate_phase(power31, SPEC2, FrequencyPoint(xi0, eta0), EPS, 1.0, 1e-10).value
    np.testing.assert_allclose(out.data, m * f.data, atol=1e-9)


def test_parseval_bound(power31):
    rng = np.random.default_rng(2)
    for _ in range(5):
        f = band_limited_field(32, rng, 6)
        xi, eta = grid_frequencies(f)
        sup = np.abs(multiplier_grid(power31, SPEC2, EPS, xi, eta, 1e-9)).max()
        out = apply_spectral(f, power31, SPEC2, EPS, tol=1e-9)
        assert out.l2_norm() <= sup * f.l2_norm() * (1 + 1e-10)


def test_translation_covariance(power31):
    f = gaussian_field(32, 4.0, center=(0.3, -0.2))
    shifted = f.like(np.roll(f.data, 1, axis=1))
    for apply in (apply_spectral, apply_direct):
        a = apply(f, power31, SPEC2, EPS)
        b = apply(shifted, power31, SPEC2, EPS)
        np.testing.assert_allclose(np.roll(a.data, 1, axis=1), b.data,
                                   atol=1e-13 * np.abs(a.data).max())


def test_conjugate_kernel_conjugates_real_input(power31):
    f = gaussian_field(32, 4.0)
    q = power31.conjugate()
    # the spectral path is exact up to the multiplier tolerance, the direct one to rounding
    for apply, atol in ((apply_spectral, 1e-8), (apply_direct, 1e-15)):
        a = apply(f, power31, SPEC2, EPS).data
        b = apply(f, q, SPEC2, EPS).data
        np.testing.assert_allclose(b, a.conj(), atol=atol)


def test_direct_and_spectral_agree(power31):
    f = gaussian_field(64, 4.0)
    d = relative_l2(apply_direct(f, power31, SPEC2, EPS), apply_spectral(f, power31, SPEC2, EPS))
    assert d < 0.05


def test_curve_nodes_integrate_the_kernel(power31):
    t, W = curve_nodes(power31, SPEC2, EPS)
    ref = integrate_phase(power31, SPEC2, FrequencyPoint(), EPS, 1.0, 1e-12).value
    assert abs(W.sum() - ref) < 1e-10
    assert t.min() > EPS and t.max() < 1.0
    with pytest.raises(InvalidParameter):
        curve_nodes(power31, SPEC2, 0.0)


def test_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    f = GridField(rng.standard_normal((16, 20)) + 1j * rng.standard_normal((16, 20)), 0.1, 0.2)
    path = tmp_path / "f.oscf"
    f.write(path)
    raw = path.read_bytes()
    assert raw[:4] == b"OSCF" and HEADER.size == 32
    assert len(raw) == 32 + 16 * 16 * 20
    assert np.frombuffer(raw[8:12], "<u4")[0] == 16   # n_y after n_x
    g = GridField.read(path)
    np.testing.assert_array_equal(g.data, f.data)
    assert (g.h_x, g.h_y) == (0.1, 0.2)
    with pytest.raises(InvalidParameter):
        GridField.from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(InvalidParameter):
        GridField.from_bytes(raw[:-16])


def test_csv_export():
    f = gaussian_field(16)
    lines = f.csv_text().splitlines()
    assert lines[0] == "x,y,re,im" and len(lines) == 1 + 256


def test_field_validation():
    with pytest.raises(InvalidParameter):
        GridField(np.zeros((8, 16)), 1, 1)
    with pytest.raises(InvalidParameter):
        GridField(np.full((16, 16), np.nan), 1, 1)
    with pytest.raises(InvalidParameter):
        GridField(np.zeros((16, 16)), 0, 1)
    with pytest.raises(InvalidParameter):
        apply_spectral(GridField(np.zeros((16, 16)), 1, 1, periodic=False), PowerPhase(3, 1),
                       SPEC2, EPS)


def gauss(x, y, w=0.25):
    return np.exp(-(x * x + y * y) / (2 * w * w))


def test_epsilon_ladder(power31):
    rep = check_assumptions(power31, which=("a3", "a4"))
    tab = epsilon_convergence(gauss, (0.3, 0.2), power31, SPEC2, report=rep)
    assert tab.monotone
    assert tab.slope < 0
    assert np.all(tab.diff_errors < 0.01 * tab.diffs)
    assert tab.envelope is not None and np.all(np.diff(tab.envelope) < 0)
    # the measured decay per level is at least the envelope's
    env_slope = np.polyfit(tab.levels, np.log(tab.envelope), 1)[0]
    assert tab.slope <= env_slope < 0
    # gamma'' = 12 t^-5, so halving eps moves five dyadic levels
    np.testing.assert_array_equal(np.diff(tab.levels), 5)


def test_epsilon_constant_field_is_kernel_tail(power31):
    c = 0.7 - 0.2j
    tab = epsilon_convergence(lambda x, y: c + 0 * x, (0.0, 0.0), power31, SPEC2, steps=4)
    for m in range(4):
        a, b = tab.eps[m + 1], tab.eps[m]
        tail = integrate_phase(power31, SPEC2, FrequencyPoint(), a, b, 1e-12).value
        assert tab.diffs[m] == pytest.approx(abs(c * tail), rel=1e-8, abs=1e-13)


def test_epsilon_grid_input_matches_callable(power31):
    f = gaussian_field(128, 4.0)
    a = epsilon_convergence(gauss, (0.3, 0.2), power31, SPEC2, steps=3)
    b = epsilon_convergence(f, (0.3, 0.2), power31, SPEC2, steps=3, tol=1e-9)
    np.testing.assert_allclose(b.values, a.values, atol=2e-3)


def test_epsilon_validation(power31):
    with pytest.raises(InvalidParameter):
        epsilon_convergence(gauss, (0, 0), power31, SPEC2, eps0=1.0)
    with pytest.raises(InvalidParameter):
        epsilon_convergence("nope", (0, 0), power31, SPEC2)
