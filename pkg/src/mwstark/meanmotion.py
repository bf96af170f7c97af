"""Averaged tier on the electric-action sphere.

Averaging the adiabatic motion over the fast orbital angle leaves a
one-degree-of-freedom system in (I_e, phi_e).  Its equations contain a
square-root singularity at |I_e| = I_n - |I_m|, so the motion is
propagated instead through the vector

    Z = (B cos 2 phi_e, B sin 2 phi_e, I_e),   B^2 = (In - |Im|)^2 - Ie^2,

whose length is conserved: trajectories live on a sphere and pass
smoothly through the former singular circles (the poles).

The precession rate of phi_e splits into a part linear in I_e, which is
a rigid rotation of the sphere about the 3-axis at a rate depending
only on F(t), and a nonlinear remainder.  The rotation is removed
exactly by working in a co-rotating frame; the accumulated phase gamma
is carried alongside Z so lab-frame angles stay recoverable, and the
field-ramp coupling, which is not axisymmetric, is evaluated with the
phase folded in.  The nonlinear rate keeps the torus-loss criterion
meaningful: ionisation is flagged whenever the instantaneous field
exceeds the critical field of the torus with electric action Z3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import DOP853

from . import _kernels
from .adiabatic import _fcrit_surface_default
from .critical import default_table, ionisation_criterion
from .series import Actions, linear_coeffs
from .units import field_derivative, field_value


@dataclass(frozen=True)
class ZVector:
    """Electric-action sphere point; Z3 is I_e, (Z1, Z2) carry 2 phi_e."""

    Z1: float
    Z2: float
    Z3: float

    @property
    def norm2(self) -> float:
        return self.Z1 ** 2 + self.Z2 ** 2 + self.Z3 ** 2

    def array(self) -> np.ndarray:
        return np.array([self.Z1, self.Z2, self.Z3])


@dataclass(frozen=True)
class MeanMotionOutcome:
    ionised: bool
    t_ion: float
    final: ZVector
    gamma: float
    failed: bool = False
    steps: int = 0


def ze_map(Ie: float, phi_e: float, a: Actions) -> ZVector:
    """Embed (I_e, phi_e) in the sphere for the (In, Im) of `a`."""
    b2 = (a.In - abs(a.Im)) ** 2 - Ie * Ie
    if b2 < 0.0:
        raise ValueError("electric action outside the sphere")
    b = math.sqrt(b2)
    return ZVector(b * math.cos(2.0 * phi_e), b * math.sin(2.0 * phi_e), Ie)


def ze_angles(z: ZVector) -> tuple[float, float]:
    """Recover (I_e, phi_e) from a sphere point.

    The angle is undefined on the poles Z1 = Z2 = 0, where the orbit
    plane degenerates; phi_e is returned in (-pi/2, pi/2].
    """
    b = math.hypot(z.Z1, z.Z2)
    if b <= 1e-12 * max(1.0, abs(z.Z3)):
        raise ValueError("angle undefined at the poles of the sphere")
    return z.Z3, 0.5 * math.atan2(z.Z2, z.Z1)


def stark_nonlinear_gradient(In: float, Ie: float, im: float, F: float,
                             order: int = 2) -> float:
    """d(E - E_L)/dI_e: the precession rate beyond the rigid rotation."""
    g = 0.0
    if order >= 2:
        g += 0.375 * In ** 4 * Ie * F * F
    if order >= 3:
        g += (9.0 / 32.0) * In ** 7 * Ie * Ie * F ** 3
    return g


@lru_cache(maxsize=64)
def phase_coeffs(In: float, im: float, K: int = 11) -> np.ndarray:
    """Odd-power field coefficients of the rigid-rotation rate.

    The rate is 3 In sum_m c_m F^(2m+1); c_0 = 1 for In = 1.
    """
    return np.asarray(linear_coeffs(In, im, K), dtype=float)


def phase_rate(F: float, a: Actions, coeffs=None) -> float:
    """d gamma/dt of the co-rotating frame at field value F."""
    if coeffs is None:
        coeffs = phase_coeffs(a.In, abs(a.Im))
    acc = 0.0
    f2 = F * F
    for c in coeffs[::-1]:
        acc = acc * f2 + c
    return 3.0 * a.In * acc * F


def z_derivatives(z: ZVector, p, env, t: float, a: Actions,
                  order: int = 2, gamma: float = 0.0) -> np.ndarray:
    """Rates of (Z1, Z2, Z3) in the co-rotating frame at phase gamma."""
    F = field_value(p, env, t)
    Fdot = field_derivative(p, env, t)
    In, im = a.In, abs(a.Im)
    kappa = 0.5 * In ** 3
    enl = stark_nonlinear_gradient(In, z.Z3, im, F, order)
    A = math.sqrt(max((In + im) ** 2 - z.Z3 ** 2, 0.0))
    dA = -z.Z3 / A if A > 0.0 else 0.0
    cg, sg = math.cos(gamma), math.sin(gamma)
    mix = z.Z2 * cg - z.Z1 * sg
    # coupling sign fixed against the orbit-resolved tiers, which drift
    # the electric action upward on the rising edge for sin 2 phi_e > 0
    kf = kappa * Fdot
    return np.array([
        -2.0 * z.Z2 * enl + kf * (A * z.Z3 * cg - dA * z.Z2 * mix),
        2.0 * z.Z1 * enl + kf * (A * z.Z3 * sg + dA * z.Z1 * mix),
        -kf * A * (z.Z1 * cg + z.Z2 * sg),
    ])


def _z_rhs(t, y, p, env, a, order, coeffs):
    z = ZVector(y[0], y[1], y[2])
    dz = z_derivatives(z, p, env, t, a, order, gamma=y[3])
    F = field_value(p, env, t)
    return np.array([dz[0], dz[1], dz[2], phase_rate(F, a, coeffs)])


def integrate_z(z0: ZVector, p, env, a: Actions, order: int = 2,
                rtol: float = 1e-10, atol: float = 1e-10,
                table=None, gamma0: float = 0.0) -> MeanMotionOutcome:
    """Carry a sphere point across the pulse, watching the loss criterion."""
    In, im = a.In, abs(a.Im)
    t_end = env.total(p)
    if _kernels.NUMBA_AVAILABLE and gamma0 == 0.0:
        if table is None:
            s_ref, im_ref, surf = _fcrit_surface_default()
        else:
            s_ref, im_ref, surf = table.sample_grid()
        coeffs = phase_coeffs(In, im)
        y0 = np.array([z0.Z1, z0.Z2, z0.Z3, gamma0, 0.0])
        pars = np.array([p.Fs, p.Fmu, p.Om0, *env.durations(p)])
        status, t_ion, yf, steps = _kernels.meanmotion_kernel(
            y0, pars, In, im, order, coeffs, t_end, rtol, atol,
            s_ref, im_ref, surf, 10_000_000)
        zf = ZVector(yf[0], yf[1], yf[2])
        if status == _kernels.STATUS_FAILED:
            return MeanMotionOutcome(False, math.nan, zf, yf[3],
                                     failed=True, steps=steps)
        if status == _kernels.STATUS_IONISED:
            return MeanMotionOutcome(True, t_ion, zf, yf[3], steps=steps)
        return MeanMotionOutcome(False, math.nan, zf, yf[3], steps=steps)
    if table is None:
        table = default_table()
    coeffs = phase_coeffs(In, im)
    y0 = np.array([z0.Z1, z0.Z2, z0.Z3, gamma0])
    r0 = math.sqrt(z0.norm2)
    solver = DOP853(lambda t, y: _z_rhs(t, y, p, env, a, order, coeffs),
                    0.0, y0, t_bound=t_end, rtol=rtol, atol=atol)
    steps = 0
    while solver.status == "running":
        try:
            solver.step()
        except (ValueError, FloatingPointError):
            return MeanMotionOutcome(False, math.nan, z0, gamma0,
                                     failed=True, steps=steps)
        if solver.status == "failed":
            return MeanMotionOutcome(False, math.nan, z0, gamma0,
                                     failed=True, steps=steps)
        steps += 1
        # project back onto the invariant sphere; refresh the reused stage
        r = math.sqrt(solver.y[0] ** 2 + solver.y[1] ** 2 + solver.y[2] ** 2)
        if r > 0.0 and r0 > 0.0:
            solver.y[:3] *= r0 / r
            solver.f = solver.fun(solver.t, solver.y)
        y = solver.y
        zf = ZVector(y[0], y[1], y[2])
        F = field_value(p, env, solver.t)
        if ionisation_criterion(F * In ** 4, y[2] / In, im / In, table):
            return MeanMotionOutcome(True, solver.t, zf, y[3], steps=steps)
    y = solver.y
    return MeanMotionOutcome(False, math.nan, ZVector(y[0], y[1], y[2]),
                             y[3], steps=steps)


def trace_z(z0: ZVector, p, env, a: Actions, times, order: int = 2,
            rtol: float = 1e-10, atol: float = 1e-10, table=None,
            gamma0: float = 0.0) -> list[tuple[float, ZVector, float]]:
    """(t, Z, gamma) at the requested times, stopping when ionised."""
    if table is None:
        table = default_table()
    In, im = a.In, abs(a.Im)
    coeffs = phase_coeffs(In, im)
    times = np.asarray(times, dtype=float)
    t_end = env.total(p)
    y0 = np.array([z0.Z1, z0.Z2, z0.Z3, gamma0])
    solver = DOP853(lambda t, y: _z_rhs(t, y, p, env, a, order, coeffs),
                    0.0, y0, t_bound=max(t_end, times[-1]),
                    rtol=rtol, atol=atol)
    out: list[tuple[float, ZVector, float]] = []
    idx = 0
    while idx < len(times) and solver.status == "running":
        try:
            solver.step()
        except (ValueError, FloatingPointError):
            break
        if solver.status == "failed":
            break
        sol = solver.dense_output()
        while idx < len(times) and solver.t_old <= times[idx] <= solver.t:
            ys = sol(times[idx])
            out.append((times[idx], ZVector(ys[0], ys[1], ys[2]), ys[3]))
            idx += 1
        y = solver.y
        F = field_value(p, env, solver.t)
        if ionisation_criterion(F * In ** 4, y[2] / In, im / In, table):
            break
    return out
