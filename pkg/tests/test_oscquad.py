import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscint import oscquad
from oscint.assumptions import check_assumptions
from oscint.errors import AssumptionError, DomainError, InvalidParameter
from oscint.oscquad import (FrequencyPoint, OperatorSpec, QuadResult, compute_G,
                            integrate_oscillatory, integrate_phase, phase_g, tail_constant,
                            truncation_point)
from oscint.phase import ExpPhase, PowerPhase

F0 = FrequencyPoint(0.0, 0.0)
SPEC2 = OperatorSpec(2, 0.0)


def linear_exact(lam):
    if lam == 0:
        return 1.0
    return (cmath.exp(2j * math.pi * lam) - 1) / (2j * math.pi * lam)


def fresnel_oracle():
    # int_0^1 exp(2 pi i t^2) dt = (C(2) + i S(2)) / 2 in the pi u^2 / 2 convention
    return complex(mp.fresnelc(2) / 2, mp.fresnels(2) / 2)


@pytest.mark.parametrize("lam", [0.0, 10.0, 10.5, 100.0])
def test_linear_phase_closed_form(lam):
    r = integrate_oscillatory(lambda t: lam * t, None, 0.0, 1.0, tol=1e-13)
    assert abs(r.value - linear_exact(lam)) < 1e-10
    assert r.converged


def test_linear_half_integer_modulus():
    r = integrate_oscillatory(lambda t: 10.5 * t, None, 0.0, 1.0, tol=1e-13)
    assert abs(r.value) == pytest.approx(2 / (21 * math.pi), rel=1e-10)


def test_fresnel():
    r = integrate_oscillatory(lambda t: t * t, None, 0.0, 1.0, tol=1e-13)
    assert abs(r.value - fresnel_oracle()) < 1e-9


def test_generic_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        integrate_oscillatory(lambda t: t, None, 1.0, 0.0)
    with pytest.raises(InvalidParameter):
        integrate_oscillatory(lambda t: t, None, 0.0, 1.0, tol=0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-40, 40), st.floats(0.5, 30))
def test_additivity(b, lam, mu):
    g = lambda t: lam * t + mu * t ** 2
    tol = 1e-12
    whole = integrate_oscillatory(g, None, 0.0, 1.0, tol)
    left = integrate_oscillatory(g, None, 0.0, b, tol)
    right = integrate_oscillatory(g, None, b, 1.0, tol)
    bound = whole.abs_error_estimate + left.abs_error_estimate + right.abs_error_estimate
    assert abs(left.value + right.value - whole.value) <= bound + 1e-13


@settings(max_examples=25, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 40), st.floats(-5, 5))
def test_conjugation_symmetry(lam, mu, c):
    g = lambda t: lam * t + mu * (t - c) ** 2
    a = integrate_oscillatory(g, lambda t: 1 + t, 0.0, 1.0, 1e-12)
    b = integrate_oscillatory(lambda t: -g(t), lambda t: 1 + t, 0.0, 1.0, 1e-12)
    assert abs(a.value - b.value.conjugate()) < 1e-12


def test_van_der_corput_second_derivative():
    rng = np.random.default_rng(11)
    for _ in range(40):
        lam = 10 ** rng.uniform(0, 3)
        c, d = rng.uniform(-1, 2), rng.uniform(-100, 100)
        g = lambda t: 0.5 * lam * (t - c) ** 2 + d * t   # g'' = lam
        r = integrate_oscillatory(g, None, 0.0, 1.0, 1e-11)
        assert abs(r.value) <= 4 * lam ** -0.5


def test_van_der_corput_third_derivative():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(40):
        mu = 10 ** rng.uniform(0, 4)
        c, b, d = rng.uniform(-1, 2), rng.uniform(-50, 50), rng.uniform(-200, 200)
        g = lambda t: mu * (t - c) ** 3 / 6 + b * t * t + d * t   # |g'''| = mu
        r = integrate_oscillatory(g, None, 0.0, 1.0, 1e-11)
        worst = max(worst, abs(r.value) * mu ** (1 / 3))
    assert worst <= 8


def test_refinement_never_leaves_tolerance():
    g = lambda t: 40 * t ** 3 - 7 * t
    w = lambda t: np.exp(-t)
    ref = integrate_oscillatory(g, w, 0.0, 1.0, 1e-14).value
    prev = math.inf
    for tol in (1e-4, 5e-5, 2.5e-5, 1e-6, 5e-7, 1e-9, 5e-10):
        d = abs(integrate_oscillatory(g, w, 0.0, 1.0, tol).value - ref)
        assert d <= tol
        assert d <= max(prev, tol / 2)
        prev = d


# -- phase-specific engine ---------------------------------------------------------

def test_phase_g_examples():
    p = PowerPhase(1.0)
    d = phase_g(p, SPEC2, FrequencyPoint(0.0, 8.0), 0.5)
    assert d.d2g == pytest.approx(0.0, abs=1e-12)
    t = np.geomspace(0.01, 1, 30)
    d1 = phase_g(p, OperatorSpec(1), FrequencyPoint(3.0, 7.0), t)
    np.testing.assert_array_equal(d1.d2g, p.values(t).d2gamma)
    dn = phase_g(p, SPEC2, FrequencyPoint(5.0, -3.0), t)
    assert np.all(dn.d2g >= p.values(t).d2gamma)
    with pytest.raises(DomainError):
        phase_g(p, SPEC2, F0, 0.0)


def m00_power31_oracle():
    # u = t^-3: m(0,0) = (1/3) int_1^inf exp(2 pi i u) u^(-2/3) du
    #           = (1/3) (-2 pi i)^(-1/3) Gamma(1/3, -2 pi i)
    s = mp.mpf(1) / 3
    z = -2j * mp.pi
    return complex(s * z ** (-s) * mp.gammainc(s, z))


def test_m00_power31_against_incomplete_gamma(power31):
    r = integrate_phase(power31, SPEC2, F0, 0.0, 1.0, tol=1e-11)
    assert r.converged
    assert abs(r.value - m00_power31_oracle()) < 1e-10


def test_G_two_ways():
    # G(1) = int_0^1 exp(2 pi i / t) dt = int_1^inf exp(2 pi i u) u^-2 du
    p = PowerPhase(1.0)
    r = compute_G(p, SPEC2, F0, 1.0, tol=1e-11)
    oracle = complex(mp.quadosc(lambda u: mp.expjpi(2 * u) / u ** 2, [1, mp.inf], omega=2 * mp.pi))
    assert abs(r.value - oracle) < 1e-9


def test_G_van_der_corput_decay(power31):
    vals = []
    for s in np.geomspace(1e-3, 1, 12):
        for f in (F0, FrequencyPoint(30.0, -200.0)):
            r = compute_G(power31, SPEC2, f, float(s), tol=1e-11)
            vals.append(abs(r.value) * math.sqrt(float(power31.values(s).d2gamma)))
    assert max(vals) < 2.0


def test_theta_weight_against_direct_quadrature():
    p = ExpPhase(3.0, 1.0)
    spec = OperatorSpec(2, 0.5)
    f = FrequencyPoint(3.0, -2.0)
    r = integrate_phase(p, spec, f, 0.5, 1.0, tol=1e-12)
    fn = lambda t: mp.expjpi(2 * (mp.exp(3 / t) - 3 * t + 2 * t * t)) * t ** -0.5 * mp.exp(0.5 / t)
    mp.mp.dps = 30
    oracle = complex(mp.quad(fn, mp.linspace(0.5, 1, 40)))
    mp.mp.dps = 15
    assert abs(r.value - oracle) < 1e-10


def test_conjugated_pair(power31):
    f = FrequencyPoint(17.0, 250.0)
    a = integrate_phase(power31, SPEC2, f, 0.0, 1.0, 1e-9)
    b = integrate_phase(power31.conjugate(), SPEC2, FrequencyPoint(-17.0, -250.0), 0.0, 1.0, 1e-9)
    assert abs(a.value - b.value.conjugate()) < 1e-14


def test_constant_amplitude_factors_out(power31):
    f = FrequencyPoint(-4.0, 90.0)
    a = integrate_phase(power31, SPEC2, f, 0.1, 1.0, 1e-11)
    b = integrate_phase(power31, SPEC2, f, 0.1, 1.0, 1e-11, amp=lambda t: (2 - 1j) * np.ones_like(t))
    assert abs((2 - 1j) * a.value - b.value) < 1e-10


@pytest.mark.parametrize("f", [F0, FrequencyPoint(1e3, 1e4), FrequencyPoint(-1e4, 30.0),
                               FrequencyPoint(50.0, -1e4)])
def test_error_estimates_hold_against_tighter_run(f, power31):
    loose = integrate_phase(power31, SPEC2, f, 0.0, 1.0, 1e-6)
    # 1e-11 is below the rounding floor of gamma ~ 4e3 cycles near t = 0.06
    tight = integrate_phase(power31, SPEC2, f, 0.0, 1.0, 1e-10)
    assert loose.converged and tight.converged
    assert abs(loose.value - tight.value) <= loose.total_error + tight.total_error


def test_bad_intervals(power31):
    with pytest.raises(DomainError):
        integrate_phase(power31, SPEC2, F0, 0.5, 0.5)
    with pytest.raises(DomainError):
        integrate_phase(power31, SPEC2, F0, 0.0, 1.5)
    with pytest.raises(InvalidParameter):
        OperatorSpec(0)
    with pytest.raises(InvalidParameter):
        OperatorSpec(2, 1.0)
    with pytest.raises(InvalidParameter):
        FrequencyPoint(math.nan, 0.0)


def test_quadresult_dict():
    r = QuadResult(1 + 2j, 1e-9, 10, 1e-10, 0.01, True)
    d = r.to_dict()
    assert d["value"] == [1.0, 2.0]
    assert d["total_error"] == pytest.approx(1.1e-9)


# -- truncation --------------------------------------------------------------------

def test_truncation_point_geometry(power31):
    rep = check_assumptions(power31, which=("a3", "a4"))
    c, rho = tail_constant(power31, SPEC2, rep)
    q = 2 ** (-rho / 3)
    tp = truncation_point(power31, SPEC2, 1e-6, rep)
    expect = math.floor(math.log(1e-6 * (1 - q) / c) / math.log(q)) + 1
    assert tp.level == expect
    assert tp.tail_bound < 1e-6
    assert tp.t_min == pytest.approx(2 ** (-tp.level / 5), rel=1e-12)
    half = truncation_point(power31, SPEC2, 5e-7, rep)
    assert 0 <= half.level - tp.level <= math.ceil(3 / rho)
    assert truncation_point(power31, SPEC2, 1e-10, rep).t_min < \
        truncation_point(power31, SPEC2, 1e-2, rep).t_min


def test_tail_constant_needs_report(power31):
    with pytest.raises(AssumptionError):
        tail_constant(power31, SPEC2, None)
    rep = check_assumptions(PowerPhase(2.5, 1.0), which=("a3", "a4"))
    with pytest.raises(AssumptionError):
        tail_constant(PowerPhase(2.5, 1.0), SPEC2, rep)


def test_backend_flag():
    assert oscquad.BACKEND in ("compiled", "python")
