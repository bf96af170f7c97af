"""Scaled units, field parameters and the pulse envelope.

Everything internal to the library works in units defined by the initial
Kepler ellipse of the excited electron: the principal action is 1, the
unperturbed energy is -1/2 and one Kepler period is 2*pi of scaled time.
Laboratory quantities (GHz, V/cm, principal quantum number) appear only at
the conversion boundary implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Conversion constants for an electron bound to a proton: a field of
# 1 V/cm and a frequency of 1 GHz expressed in the scaled units of the
# n0 = 1 orbit.
_FREQ_PER_GHZ = 0.00533757
_FIELD_PER_VCM = 0.00373535


@dataclass(frozen=True)
class ScaledParams:
    """Field parameters in scaled units.

    Fs and Fmu are the static and microwave amplitudes, Om0 the microwave
    angular frequency in units of the initial Kepler frequency.
    """

    Fs: float
    Fmu: float
    Om0: float

    def __post_init__(self):
        if self.Om0 <= 0:
            raise ValueError("scaled frequency must be positive")
        if self.Fs < 0 or self.Fmu < 0:
            raise ValueError("field amplitudes must be non-negative")

    @property
    def field_period(self) -> float:
        """One microwave period in scaled time."""
        return 2.0 * math.pi / self.Om0


@dataclass(frozen=True)
class LabParams:
    """Laboratory field parameters: V/cm, GHz and the initial n0."""

    Fs_vcm: float
    Fmu_vcm: float
    Omega_ghz: float
    n0: int

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError("n0 must be a positive integer")
        if self.Omega_ghz <= 0:
            raise ValueError("frequency must be positive")


@dataclass(frozen=True)
class Envelope:
    """Pulse envelope: Na field periods rise, Nc flat, Nb fall.

    The rise is lambda(x) = x^2 (2 - x^2) with x = t/Ta, which joins the
    flat top with a continuous first derivative; the fall mirrors it.
    """

    Na: float
    Nc: float
    Nb: float

    def __post_init__(self):
        if self.Na < 0 or self.Nc < 0 or self.Nb < 0:
            raise ValueError("envelope segments must be non-negative")

    def durations(self, p: ScaledParams) -> tuple[float, float, float]:
        """(Ta, Tc, Tb) in scaled time for microwave frequency p.Om0."""
        tf = p.field_period
        return self.Na * tf, self.Nc * tf, self.Nb * tf

    def total(self, p: ScaledParams) -> float:
        ta, tc, tb = self.durations(p)
        return ta + tc + tb


def scale(lab: LabParams) -> ScaledParams:
    """Convert laboratory parameters to scaled units."""
    om0 = lab.Omega_ghz * (_FREQ_PER_GHZ * lab.n0) ** 3
    f_unit = (_FIELD_PER_VCM * lab.n0) ** 4
    return ScaledParams(Fs=lab.Fs_vcm * f_unit, Fmu=lab.Fmu_vcm * f_unit, Om0=om0)


def unscale(p: ScaledParams, n0: int) -> LabParams:
    """Inverse of :func:`scale` for a given n0."""
    om_ghz = p.Om0 / (_FREQ_PER_GHZ * n0) ** 3
    f_unit = (_FIELD_PER_VCM * n0) ** 4
    return LabParams(Fs_vcm=p.Fs / f_unit, Fmu_vcm=p.Fmu / f_unit,
                     Omega_ghz=om_ghz, n0=n0)


def envelope_value(env: Envelope, p: ScaledParams, t: float) -> float:
    """Envelope lambda(t) at scaled time t (0 before and after the pulse)."""
    ta, tc, tb = env.durations(p)
    if t <= 0.0 or t >= ta + tc + tb:
        return 0.0
    if t < ta:
        x = t / ta
        return x * x * (2.0 - x * x)
    if t <= ta + tc:
        return 1.0
    x = (ta + tc + tb - t) / tb
    return x * x * (2.0 - x * x)


def envelope_derivative(env: Envelope, p: ScaledParams, t: float) -> float:
    """d(lambda)/dt; vanishes at the junctions so lambda is C^1."""
    ta, tc, tb = env.durations(p)
    if t <= 0.0 or t >= ta + tc + tb or (ta <= t <= ta + tc):
        return 0.0
    if t < ta:
        x = t / ta
        return 4.0 * x * (1.0 - x * x) / ta
    x = (ta + tc + tb - t) / tb
    return -4.0 * x * (1.0 - x * x) / tb


def field_value(p: ScaledParams, env: Envelope, t: float) -> float:
    """Instantaneous field F(t) = lambda(t) (Fs + Fmu cos(Om0 t))."""
    lam = envelope_value(env, p, t)
    if lam == 0.0:
        return 0.0
    return lam * (p.Fs + p.Fmu * math.cos(p.Om0 * t))


def field_derivative(p: ScaledParams, env: Envelope, t: float) -> float:
    """dF/dt including both envelope and microwave variation."""
    lam = envelope_value(env, p, t)
    dlam = envelope_derivative(env, p, t)
    c = math.cos(p.Om0 * t)
    s = math.sin(p.Om0 * t)
    return dlam * (p.Fs + p.Fmu * c) - lam * p.Fmu * p.Om0 * s
