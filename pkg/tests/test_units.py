"""Scaling relations, pulse envelope and field evaluation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwstark import (Envelope, LabParams, ScaledParams, envelope_derivative,
                     envelope_value, field_derivative, field_value, scale,
                     unscale)

# frozen conversions for the 8.105 GHz cavity
OM0_N35 = 0.052843053273556526
OM0_N21 = 0.011414099507088212


def test_frequency_scaling_anchors():
    assert scale(LabParams(0.0, 0.0, 8.105, 35)).Om0 == pytest.approx(
        OM0_N35, rel=1e-12)
    assert scale(LabParams(0.0, 0.0, 8.105, 21)).Om0 == pytest.approx(
        OM0_N21, rel=1e-12)
    # three significant figures of the quoted working values
    assert round(scale(LabParams(0.0, 0.0, 8.105, 35)).Om0, 4) == 0.0528
    assert round(scale(LabParams(0.0, 0.0, 8.105, 21)).Om0, 6) == 0.011414


def test_field_scaling_quartic_in_n0():
    a = scale(LabParams(5.0, 0.0, 8.105, 35)).Fs
    b = scale(LabParams(5.0, 0.0, 8.105, 70)).Fs
    assert b / a == pytest.approx(16.0, rel=1e-12)


@given(fs=st.floats(0.0, 1e3), fmu=st.floats(0.0, 1e3),
       ghz=st.floats(0.1, 50.0), n0=st.integers(1, 200))
@settings(max_examples=100, deadline=None)
def test_scale_round_trip(fs, fmu, ghz, n0):
    lab = LabParams(fs, fmu, ghz, n0)
    back = unscale(scale(lab), n0)
    assert back.Fs_vcm == pytest.approx(fs, rel=1e-12, abs=1e-15)
    assert back.Fmu_vcm == pytest.approx(fmu, rel=1e-12, abs=1e-15)
    assert back.Omega_ghz == pytest.approx(ghz, rel=1e-12)


def test_scaled_params_validation():
    with pytest.raises(ValueError):
        ScaledParams(Fs=-0.1, Fmu=0.0, Om0=0.05)
    with pytest.raises(ValueError):
        ScaledParams(Fs=0.0, Fmu=-0.2, Om0=0.05)
    with pytest.raises(ValueError):
        ScaledParams(Fs=0.0, Fmu=0.0, Om0=0.0)


def test_field_period():
    p = ScaledParams(Fs=0.0, Fmu=0.1, Om0=0.0528)
    assert p.field_period == pytest.approx(2.0 * math.pi / 0.0528, rel=1e-14)


def test_envelope_durations_and_total():
    p = ScaledParams(Fs=0.01, Fmu=0.1, Om0=0.0528)
    env = Envelope(16, 50, 16)
    ta, tc, tb = env.durations(p)
    tf = 2.0 * math.pi / 0.0528
    assert ta == pytest.approx(16 * tf)
    assert tc == pytest.approx(50 * tf)
    assert tb == pytest.approx(16 * tf)
    assert env.total(p) == pytest.approx(82 * tf)


def test_envelope_shape():
    p = ScaledParams(Fs=0.01, Fmu=0.1, Om0=0.05)
    env = Envelope(4, 10, 6)
    ta, tc, tb = env.durations(p)
    assert envelope_value(env, p, 0.0) == 0.0
    assert envelope_value(env, p, ta) == pytest.approx(1.0)
    assert envelope_value(env, p, ta + 0.5 * tc) == 1.0
    assert envelope_value(env, p, ta + tc + tb) == pytest.approx(0.0, abs=1e-14)
    # rise profile x^2 (2 - x^2)
    for x in (0.25, 0.5, 0.75):
        got = envelope_value(env, p, x * ta)
        assert got == pytest.approx(x * x * (2.0 - x * x), rel=1e-13)
    # fall mirrors the rise
    for x in (0.25, 0.5, 0.75):
        up = envelope_value(env, p, x * ta)
        down = envelope_value(env, p, ta + tc + (1.0 - x) * tb)
        assert down == pytest.approx(up, rel=1e-12)
    # monotone rise, bounded by [0, 1]
    ts = np.linspace(0.0, ta, 200)
    vals = [envelope_value(env, p, t) for t in ts]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 + 1e-15 for v in vals)


def test_envelope_derivative_matches_fd():
    p = ScaledParams(Fs=0.01, Fmu=0.1, Om0=0.05)
    env = Envelope(4, 10, 6)
    total = env.total(p)
    h = 1e-6
    for t in np.linspace(0.07 * total, 0.93 * total, 17):
        fd = (envelope_value(env, p, t + h)
              - envelope_value(env, p, t - h)) / (2.0 * h)
        assert envelope_derivative(env, p, t) == pytest.approx(fd, abs=5e-9)


def test_field_value_and_derivative():
    p = ScaledParams(Fs=0.02, Fmu=0.13, Om0=0.0528)
    env = Envelope(4, 10, 4)
    ta, tc, _ = env.durations(p)
    t_flat = ta + 0.3 * tc
    expect = 0.02 + 0.13 * math.cos(0.0528 * t_flat)
    assert field_value(p, env, t_flat) == pytest.approx(expect, rel=1e-13)
    h = 1e-6
    for t in np.linspace(1.0, env.total(p) - 1.0, 23):
        fd = (field_value(p, env, t + h) - field_value(p, env, t - h)) / (2 * h)
        assert field_derivative(p, env, t) == pytest.approx(fd, abs=5e-8)


def test_field_bounded_by_amplitude_sum():
    p = ScaledParams(Fs=0.02, Fmu=0.13, Om0=0.0528)
    env = Envelope(7, 13, 5)
    ts = np.linspace(0.0, env.total(p), 400)
    fmax = max(abs(field_value(p, env, t)) for t in ts)
    assert fmax <= 0.02 + 0.13 + 1e-12
