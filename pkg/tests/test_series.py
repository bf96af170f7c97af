"""Perturbation-series engine: energy coefficients, averaged rotation
rate, series acceleration."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwstark import Actions, PowerSeries, pade, richardson, stark_series
from mwstark.series import (SingularSeriesError, _h_ladder,
                            alpha1_coefficient_exact, cos_harmonic_power,
                            energy_coefficient_exact, g_bar, g_bar_truncated,
                            g_function, g_static, g_tilde, linear_coeffs,
                            mean_field_power, radius_of_convergence)
from mwstark.units import ScaledParams

# published rotation-rate profile at Fmu = 0.13, Im = 0.2, with the
# series variable x = (10 Fs)^2
PROFILE_013_02 = (1.057, 0.08759, 0.1079, 0.1073, 0.05903, 0.01588,
                  0.001861, 7.700e-5, 6.509e-7)

# its [3/3] rational form in the variable y = 10 Fs^2
PADE_NUM = (1.057, -9.542, 64.89, -156.4)
PADE_DEN = (1.0, -9.858, 59.36, -198.0)


def _actions():
    rng = np.random.default_rng(181)
    out = []
    while len(out) < 30:
        ie = rng.uniform(-0.95, 0.95)
        im = rng.uniform(-0.95, 0.95)
        if abs(ie) + abs(im) <= 0.98:
            in_ = rng.uniform(0.5, 1.5)
            out.append(Actions(In=in_, Ie=in_ * ie, Im=in_ * im))
    return out


# ---------------------------------------------------------------------------
# PowerSeries arithmetic


def test_powerseries_mul_div_round_trip():
    a = PowerSeries([1.0, 2.0, -0.5, 0.25, 1.5])
    b = PowerSeries([2.0, -1.0, 0.75, 0.1, -0.2])
    c = (a * b) / b
    assert np.allclose(c.tofloat(), a.tofloat(), rtol=1e-14, atol=1e-14)


def test_powerseries_sqrt_squares_back():
    a = PowerSeries([4.0, 1.0, -0.3, 0.05])
    r = a.sqrt()
    assert np.allclose((r * r).tofloat(), a.tofloat(), rtol=1e-13)


def test_powerseries_reciprocal_rejects_zero_constant():
    with pytest.raises(SingularSeriesError):
        PowerSeries([0.0, 1.0]).reciprocal()


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=7),
       st.lists(st.floats(-3, 3), min_size=2, max_size=7))
@settings(max_examples=60, deadline=None)
def test_powerseries_mul_matches_convolution(xs, ys):
    a, b = PowerSeries(xs), PowerSeries(ys)
    n = min(len(xs), len(ys))
    got = (a * b).tofloat()
    want = np.convolve(xs, ys)[:n]
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# Energy and separation-constant coefficients


def test_energy_coefficients_match_closed_forms():
    for a in _actions():
        s = stark_series(a, K=8)
        coeffs = s.energy.tofloat()
        for k in range(8):
            want = energy_coefficient_exact(k, a)
            assert coeffs[k] == pytest.approx(want, rel=1e-10, abs=1e-13), \
                f"k={k} at {a}"


def test_alpha1_coefficients_match_closed_forms():
    for a in _actions():
        s = stark_series(a, K=4)
        coeffs = s.alpha1.tofloat()
        for k in range(4):
            want = alpha1_coefficient_exact(k, a)
            assert coeffs[k] == pytest.approx(want, rel=1e-10, abs=1e-13)


def test_alpha_sum_is_two():
    # charge normalisation: the two separation constants sum to 2 at
    # every order, so alpha1's F-dependence is pure antisymmetry
    a = Actions(In=1.0, Ie=0.37, Im=0.21)
    s1 = stark_series(a, K=10).alpha1.tofloat()
    mirrored = Actions(In=1.0, Ie=-0.37, Im=0.21)
    s2 = stark_series(mirrored, K=10).alpha1.tofloat()
    # alpha2(Ie, F) = alpha1(-Ie, -F): odd orders flip
    signs = (-1.0) ** np.arange(11)
    assert np.allclose(s1 + signs * s2, [2.0] + [0.0] * 10, atol=1e-11)


def test_energy_parity_under_reflection():
    # reversing the field is the same as reflecting the orbit: E_k picks
    # up (-1)^k under Ie -> -Ie
    a = Actions(In=1.1, Ie=0.4, Im=0.3)
    b = Actions(In=1.1, Ie=-0.4, Im=0.3)
    ca = stark_series(a, K=9).energy.tofloat()
    cb = stark_series(b, K=9).energy.tofloat()
    assert np.allclose(ca, cb * (-1.0) ** np.arange(10), rtol=1e-11,
                       atol=1e-14)


def test_high_precision_path_agrees():
    a = Actions(In=1.0, Ie=-0.4, Im=0.2)
    fast = stark_series(a, K=12).energy.tofloat()
    slow = stark_series(a, K=12, dtype="mp").energy.tofloat()
    assert np.allclose(fast, slow, rtol=5e-16, atol=1e-18)


def test_actions_validation():
    with pytest.raises(ValueError):
        Actions(In=1.0, Ie=0.7, Im=0.5)
    with pytest.raises(ValueError):
        Actions(In=0.0, Ie=0.0, Im=0.0)
    a = Actions(In=1.0, Ie=-0.4, Im=0.2)
    assert a.I1 == pytest.approx(0.5 * (1.0 - (-0.4) - 0.2))
    assert a.I2 == pytest.approx(0.5 * (1.0 + (-0.4) - 0.2))


# ---------------------------------------------------------------------------
# Turning-point integral ladder against direct quadrature


def _h_oracle(y1: float, y2: float, k: int) -> float:
    """(1/2pi) int_{y1}^{y2} y^{k-1} sqrt((y-y1)(y2-y)) dy."""
    mid, half = 0.5 * (y1 + y2), 0.5 * (y2 - y1)
    th = np.linspace(0.0, np.pi, 20001)
    y = mid + half * np.cos(th)
    vals = y ** (k - 1) * np.sin(th) ** 2
    return half * half * np.trapezoid(vals, th) / (2.0 * np.pi)


def test_h_ladder_matches_quadrature():
    for y1, y2 in [(0.2, 1.3), (0.05, 0.8), (1.0, 3.5)]:
        s = PowerSeries.constant(y1 + y2, 0)
        p = PowerSeries.constant(y1 * y2, 0)
        h = _h_ladder(s, p, 8)
        assert float(h[0].c[0]) == pytest.approx(
            0.25 * (math.sqrt(y2) - math.sqrt(y1)) ** 2, rel=1e-12)
        assert float(h[1].c[0]) == pytest.approx(
            (y1 + y2) ** 2 / 16.0 - y1 * y2 / 4.0, rel=1e-12)
        for k in range(1, 9):
            assert float(h[k].c[0]) == pytest.approx(
                _h_oracle(y1, y2, k), rel=1e-9, abs=1e-10), (y1, y2, k)


# ---------------------------------------------------------------------------
# Rotation rate: static, period-averaged, harmonics


def test_linear_coeff_anchors():
    c = linear_coeffs(1.0, 0.0)
    assert c[0] == pytest.approx(1.0, abs=1e-10)
    assert c[1] == pytest.approx(23.0 / 16.0, abs=1e-10)
    c2 = linear_coeffs(1.0, 0.2)
    assert c2[1] == pytest.approx((23.0 + 11.0 * 0.04) / 16.0, abs=1e-10)


def test_linear_coeffs_scale_with_in():
    # the odd-order energy term In Ie c_m F^{2m+1} has action degree
    # 8m + 2, so c_m(In) = c_m(1) In^(8m) at fixed Im/In
    c1 = np.array(linear_coeffs(1.0, 0.2, K=9))
    c2 = np.array(linear_coeffs(1.3, 0.26, K=9))
    m = np.arange(len(c1))
    assert np.allclose(c2, c1 * 1.3 ** (8 * m), rtol=1e-8)


def test_linear_coeffs_interpolated_branch_matches_direct():
    # queries close to |Im| = In switch to exact polynomial
    # interpolation in Im^2; both paths agree where both work
    direct = linear_coeffs(1.0, 0.9400000000000001)
    near = linear_coeffs(1.0, 0.94 + 1e-12)
    assert np.allclose(direct[:6], near[:6], rtol=1e-8)
    assert linear_coeffs(1.0, 1.0)[0] == pytest.approx(1.0, abs=5e-10)


def test_mean_field_power_matches_quadrature():
    for n in (1, 3, 5, 7):
        th = np.linspace(0.0, 2.0 * np.pi, 40001)
        f = 0.023 + 0.11 * np.cos(th)
        want = np.trapezoid(f ** n, th) / (2.0 * np.pi)
        assert mean_field_power(0.023, 0.11, n) == pytest.approx(
            want, rel=1e-10)


def test_cos_harmonic_power_matches_fft():
    fs, fmu, n = 0.02, 0.13, 5
    th = np.linspace(0.0, 2.0 * np.pi, 2 ** 12, endpoint=False)
    f = (fs + fmu * np.cos(th)) ** n
    spec = np.fft.rfft(f) / len(th)
    for k in (1, 2, 3):
        want = 2.0 * spec[k].real
        assert cos_harmonic_power(fs, fmu, n, k) == pytest.approx(
            want, rel=1e-10, abs=1e-14)


def test_g_static_is_odd():
    cm = linear_coeffs(1.0, 0.2)
    assert g_static(cm, 0.07) == pytest.approx(-g_static(cm, -0.07), rel=1e-13)


def test_g_bar_matches_time_average():
    p = ScaledParams(Fs=0.02, Fmu=0.13, Om0=0.0528)
    a = Actions(In=1.0, Ie=0.0, Im=0.2)
    cm = linear_coeffs(1.0, 0.2)
    th = np.linspace(0.0, 2.0 * np.pi, 40001)
    vals = [g_static(cm, 0.02 + 0.13 * math.cos(t)) for t in th]
    want = np.trapezoid(vals, th) / (2.0 * np.pi)
    assert g_bar(p, a) == pytest.approx(want, rel=1e-9)


def test_g_tilde_matches_direct_harmonics():
    p = ScaledParams(Fs=0.02, Fmu=0.13, Om0=0.0528)
    a = Actions(In=1.0, Ie=0.0, Im=0.2)
    gt = g_tilde(p, a, kmax=4)
    cm = linear_coeffs(1.0, 0.2)
    th = np.linspace(0.0, 2.0 * np.pi, 2 ** 13, endpoint=False)
    g_t = np.array([g_static(cm, 0.02 + 0.13 * math.cos(t)) for t in th])
    spec = np.fft.rfft(g_t) / len(th)
    # normalisation: harmonics of (g - gbar) as an expansion whose
    # time integral is (Fmu/Om0) sum_k gtilde_k sin(k Om0 t)
    for k in (1, 2, 3, 4):
        cos_k = 2.0 * spec[k].real
        want = cos_k / (k * p.Fmu)
        assert gt[k - 1] == pytest.approx(want, rel=1e-8, abs=1e-14)


def test_g_function_bundles_both():
    p = ScaledParams(Fs=0.02, Fmu=0.13, Om0=0.0528)
    a = Actions(In=1.0, Ie=0.0, Im=0.2)
    gf = g_function(p, a, kmax=3)
    assert gf.gbar == pytest.approx(g_bar(p, a), rel=1e-12)
    assert np.allclose(gf.gtilde, g_tilde(p, a, kmax=3), rtol=1e-12)


def test_g_bar_truncated_converges_to_g_bar():
    p = ScaledParams(Fs=0.02, Fmu=0.13, Om0=0.0528)
    a = Actions(In=1.0, Ie=0.0, Im=0.2)
    errs = [abs(g_bar_truncated(p, a, m) - g_bar(p, a)) for m in (2, 5, 8)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-12


# ---------------------------------------------------------------------------
# Published profile and its rational acceleration


def _profile_printed_convention(fmu: float, im: float) -> np.ndarray:
    """gbar/Fs coefficients in x = (10 Fs)^2, from the c-series and the
    cosine moments (2i-1)!!/(2i)!! -- independent of the package's own
    even-profile helper."""
    cm = linear_coeffs(1.0, im)
    out = np.zeros(len(cm))
    for q, c in enumerate(cm):
        for i in range(q + 1):
            moment = math.factorial(2 * i) / (2.0 ** (2 * i)
                                              * math.factorial(i) ** 2)
            out[q - i] += c * math.comb(2 * q + 1, 2 * i) * moment \
                * fmu ** (2 * i)
    return out / 100.0 ** np.arange(len(cm))


def test_profile_regression_4sf():
    got = _profile_printed_convention(0.13, 0.2)
    for g, want in zip(got, PROFILE_013_02):
        assert g == pytest.approx(want, rel=5e-4)


def test_profile_pade_33_regression_4sf():
    got = _profile_printed_convention(0.13, 0.2)
    # same profile written in y = 10 Fs^2
    ser = PowerSeries(got * 10.0 ** np.arange(len(got)))
    ap = pade(ser, 3, 3)
    scale = ap.num[0] / PADE_NUM[0]
    for g, want in zip(ap.num, PADE_NUM):
        assert g / scale == pytest.approx(want, rel=5e-4)
    for g, want in zip(ap.den, PADE_DEN):
        assert g == pytest.approx(want, rel=5e-4)


def test_pade_recovers_rational_functions():
    # [2/2] built from the expansion of (1 + 2x)/(1 - x + 0.5 x^2)
    den = np.array([1.0, -1.0, 0.5])
    num = np.array([1.0, 2.0, 0.0])
    c = np.zeros(8)
    for k in range(8):
        c[k] = (num[k] if k < 3 else 0.0) - sum(
            den[j] * c[k - j] for j in range(1, min(k, 2) + 1))
    ap = pade(PowerSeries(c), 2, 2)
    assert np.allclose(ap.num, [1.0, 2.0, 0.0], atol=1e-10)
    assert np.allclose(ap.den, [1.0, -1.0, 0.5], atol=1e-10)


def test_pade_reproduces_series_expansion():
    got = _profile_printed_convention(0.13, 0.2)
    ser = PowerSeries(got * 10.0 ** np.arange(len(got)))
    ap = pade(ser, 3, 3)
    # expanding the approximant must return the small-x series
    h = 1e-3
    xs = h * np.arange(1, 8)
    direct = np.polynomial.polynomial.polyval(xs, ser.tofloat())
    assert np.allclose([ap(v) for v in xs], direct, rtol=1e-10)


def test_radius_of_convergence_window():
    lo, hi = radius_of_convergence(Actions(In=1.0, Ie=0.0, Im=0.0))
    assert 0.15 < lo < 0.22 and 0.15 < hi < 0.22
    lo1, hi1 = radius_of_convergence(Actions(In=1.0, Ie=0.0, Im=1.0))
    assert hi1 > hi - 0.02  # the window widens towards |Im| = In


# ---------------------------------------------------------------------------
# Richardson extrapolation


def test_richardson_exact_on_model_sequence():
    # s_p = F + A1/p + A2/p^2 is fitted exactly from three terms
    F, A1, A2 = 0.025, 3e-3, -2e-3
    seq = [F + A1 / p + A2 / p ** 2 for p in (1, 2, 3)]
    assert richardson(seq) == pytest.approx(F, abs=1e-15)


def test_richardson_custom_term_counts():
    F, A1 = 0.04, 5e-3
    seq = [F + A1 / p for p in (4, 5, 6)]
    assert richardson(seq, p=[4, 5, 6]) == pytest.approx(F, abs=1e-14)
    with pytest.raises(ValueError):
        richardson([1.0])
    with pytest.raises(ValueError):
        richardson([1.0, 2.0], p=[1.0])
