"""Averaged dynamics in parabolic action-angle variables.

The fast Kepler phase is eliminated: the state consists of the parabolic
actions (I1, I2) and the auxiliary angles (psi, chi) of the bounded
oscillations in the squared parabolic coordinates.  A slowly varying
field enters the motion through dF/dt multiplying the gradient G of the
generating function, so with a static field the actions are frozen.

The angle map theta_k(psi, chi) degenerates where
J = In (1 - sigma1 cos psi - sigma2 cos chi) vanishes, which happens for
Im = 0.  Integration therefore runs in a rescaled time tau defined by
dt/dtau = J; physical time is carried as a fifth state component.

Ionisation is decided per accepted integrator step by the critical-field
criterion applied to the instantaneous (I_e, I_m): once the supporting
torus ceases to exist at the current field the orbit is flagged and the
run stops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq
from scipy.special import jv

from . import _kernels
from .critical import default_table, ionisation_criterion
from .series import Actions
from .units import field_derivative, field_value

__all__ = [
    "AdiabaticOutcome",
    "AdiabaticState",
    "AngleHarmonics",
    "FourierBlock",
    "G_and_gradients",
    "adiabatic_derivatives",
    "angle_corrections",
    "fourier_coeffs",
    "integrate_adiabatic",
    "stark_energy_gradient",
    "trace_adiabatic",
]

_SIG_FLOOR = 1e-12


@dataclass
class AdiabaticState:
    """Parabolic actions, auxiliary angles and the two clocks."""

    I1: float
    I2: float
    psi: float
    chi: float
    im: float
    t: float = 0.0
    tau: float = 0.0

    @classmethod
    def from_actions(cls, a: Actions, psi: float, chi: float) -> "AdiabaticState":
        return cls(I1=a.I1, I2=a.I2, psi=psi, chi=chi, im=abs(a.Im))

    @property
    def In(self) -> float:
        return self.I1 + self.I2 + abs(self.im)

    @property
    def Ie(self) -> float:
        return self.I2 - self.I1

    @property
    def sigma1(self) -> float:
        return math.sqrt(max(self.I1 * (self.I1 + abs(self.im)), 0.0)) / self.In

    @property
    def sigma2(self) -> float:
        return math.sqrt(max(self.I2 * (self.I2 + abs(self.im)), 0.0)) / self.In

    @property
    def J(self) -> float:
        return self.In * (1.0 - self.sigma1 * math.cos(self.psi)
                          - self.sigma2 * math.cos(self.chi))

    def actions(self) -> Actions:
        return Actions(In=self.In, Ie=self.Ie, Im=abs(self.im))


@dataclass(frozen=True)
class AdiabaticOutcome:
    ionised: bool
    t_ion: float
    final: AdiabaticState
    failed: bool = False
    steps: int = 0


def G_and_gradients(state: AdiabaticState) -> tuple[float, float, float]:
    """Generating-function gradient G and its angle derivatives.

    G = (3 I2 + I1 + 2 Im) sigma1 sin psi - (3 I1 + I2 + 2 Im) sigma2 sin chi
        - (In/2)(sigma1^2 sin 2psi - sigma2^2 sin 2chi)
    """
    im = abs(state.im)
    In = state.In
    s1, s2 = state.sigma1, state.sigma2
    u1 = 3.0 * state.I2 + state.I1 + 2.0 * im
    u2 = 3.0 * state.I1 + state.I2 + 2.0 * im
    sp, cp = math.sin(state.psi), math.cos(state.psi)
    sc, cc = math.sin(state.chi), math.cos(state.chi)
    s2p, c2p = 2.0 * sp * cp, 2.0 * cp * cp - 1.0
    s2c, c2c = 2.0 * sc * cc, 2.0 * cc * cc - 1.0
    G = (u1 * s1 * sp - u2 * s2 * sc
         - 0.5 * In * (s1 * s1 * s2p - s2 * s2 * s2c))
    Gpsi = u1 * s1 * cp - In * s1 * s1 * c2p
    Gchi = -u2 * s2 * cc + In * s2 * s2 * c2c
    return G, Gpsi, Gchi


def stark_energy_gradient(In: float, Ie: float, im: float, F: float,
                          order: int = 2) -> tuple[float, float]:
    """(dE/dI1, dE/dI2) of the static-field energy, truncated at F^order.

    Built from the closed-form energy terms through third order; the
    reduced tiers default to second order.
    """
    if not 0 <= order <= 3:
        raise ValueError("energy gradient implemented for orders 0..3")
    im = abs(im)
    dE_dn = 1.0 / In ** 3
    dE_de = 0.0
    if order >= 1:
        dE_dn -= 1.5 * Ie * F
        dE_de -= 1.5 * In * F
    if order >= 2:
        dE_dn -= 0.375 * F * F * In ** 3 * (17.0 * In * In
                                            - 2.0 * Ie * Ie - 6.0 * im * im)
        dE_de += 0.375 * F * F * In ** 4 * Ie
    if order >= 3:
        f3 = F ** 3
        dE_dn -= (3.0 / 32.0) * f3 * Ie * In ** 6 * (
            207.0 * In * In - 7.0 * Ie * Ie + 77.0 * im * im)
        dE_de -= (3.0 / 32.0) * f3 * In ** 7 * (
            23.0 * In * In - 3.0 * Ie * Ie + 11.0 * im * im)
    return dE_dn - dE_de, dE_dn + dE_de


def _coupling_gradient(I1: float, I2: float, im: float,
                       psi: float, chi: float) -> tuple[float, float]:
    """Partials of kappa*G with respect to I1 and I2 at fixed angles."""
    In = I1 + I2 + im
    s1 = math.sqrt(max(I1 * (I1 + im), 0.0)) / In
    s2 = math.sqrt(max(I2 * (I2 + im), 0.0)) / In
    u1 = 3.0 * I2 + I1 + 2.0 * im
    u2 = 3.0 * I1 + I2 + 2.0 * im
    sp, cp = math.sin(psi), math.cos(psi)
    sc, cc = math.sin(chi), math.cos(chi)
    s2p = 2.0 * sp * cp
    s2c = 2.0 * sc * cc
    G = (u1 * s1 * sp - u2 * s2 * sc
         - 0.5 * In * (s1 * s1 * s2p - s2 * s2 * s2c))
    # dsigma/dI at fixed angles; the 1/sigma pieces are the I_k-explicit parts
    d1e = (2.0 * I1 + im) / (2.0 * max(s1, _SIG_FLOOR) * In * In)
    d2e = (2.0 * I2 + im) / (2.0 * max(s2, _SIG_FLOOR) * In * In)
    ds1_d1, ds1_d2 = d1e - s1 / In, -s1 / In
    ds2_d1, ds2_d2 = -s2 / In, d2e - s2 / In
    common = -0.5 * (s1 * s1 * s2p - s2 * s2 * s2c)
    dG_d1 = (s1 * sp + u1 * ds1_d1 * sp - 3.0 * s2 * sc - u2 * ds2_d1 * sc
             + common - In * (s1 * ds1_d1 * s2p - s2 * ds2_d1 * s2c))
    dG_d2 = (3.0 * s1 * sp + u1 * ds1_d2 * sp - s2 * sc - u2 * ds2_d2 * sc
             + common - In * (s1 * ds1_d2 * s2p - s2 * ds2_d2 * s2c))
    kappa = 0.5 * In ** 4
    dk = 2.0 * In ** 3
    return dk * G + kappa * dG_d1, dk * G + kappa * dG_d2


def _rhs(y: np.ndarray, im: float, p, env, order: int) -> np.ndarray:
    """d(I1, I2, psi, chi, t)/dtau."""
    I1, I2, psi, chi, t = y
    In = I1 + I2 + im
    s1 = math.sqrt(max(I1 * (I1 + im), 0.0)) / In
    s2 = math.sqrt(max(I2 * (I2 + im), 0.0)) / In
    sp, cp = math.sin(psi), math.cos(psi)
    sc, cc = math.sin(chi), math.cos(chi)
    F = field_value(p, env, t)
    Fdot = field_derivative(p, env, t)
    kappa = 0.5 * In ** 4

    u1 = 3.0 * I2 + I1 + 2.0 * im
    u2 = 3.0 * I1 + I2 + 2.0 * im
    Gpsi = u1 * s1 * cp - In * s1 * s1 * (2.0 * cp * cp - 1.0)
    Gchi = -u2 * s2 * cc + In * s2 * s2 * (2.0 * cc * cc - 1.0)

    dI1 = -In * kappa * Fdot * ((1.0 - s2 * cc) * Gpsi + s1 * cp * Gchi)
    dI2 = -In * kappa * Fdot * (s2 * cc * Gpsi + (1.0 - s1 * cp) * Gchi)

    e1, e2 = stark_energy_gradient(In, I2 - I1, im, F, order)
    if Fdot != 0.0:
        c1, c2 = _coupling_gradient(I1, I2, im, psi, chi)
        K1 = e1 + Fdot * c1
        K2 = e2 + Fdot * c2
    else:
        K1, K2 = e1, e2

    a1 = (2.0 * I1 + im) / (2.0 * max(s1, _SIG_FLOOR) * In)
    a2 = (2.0 * I2 + im) / (2.0 * max(s2, _SIG_FLOOR) * In)
    cross = kappa * Fdot * (a1 * sp - a2 * sc)
    dpsi = In * K1 + In * s2 * cc * (K2 - K1) + cross * Gchi
    dchi = In * K2 + In * s1 * cp * (K1 - K2) - cross * Gpsi

    J = In * (1.0 - s1 * cp - s2 * cc)
    return np.array([dI1, dI2, dpsi, dchi, J])


def adiabatic_derivatives(state: AdiabaticState, p, env, t: float | None = None,
                          order: int = 2) -> np.ndarray:
    """Rates of (I1, I2, psi, chi, t) with respect to the rescaled time."""
    y = np.array([state.I1, state.I2, state.psi, state.chi,
                  state.t if t is None else t])
    return _rhs(y, abs(state.im), p, env, order)


@lru_cache(maxsize=1)
def _fcrit_surface_default():
    return default_table().sample_grid()


def integrate_adiabatic(state0: AdiabaticState, p, env, order: int = 2,
                        rtol: float = 1e-10, atol: float = 1e-10,
                        table=None) -> AdiabaticOutcome:
    """Drive the averaged equations across the whole pulse.

    Returns the ionisation flag, the flagging time, and the final state
    (at pulse end when the orbit survives).
    """
    im = abs(state0.im)
    if _kernels.NUMBA_AVAILABLE and state0.t == 0.0:
        if table is None:
            s_ref, im_ref, surf = _fcrit_surface_default()
        else:
            s_ref, im_ref, surf = table.sample_grid()
        y0 = np.array([state0.I1, state0.I2, state0.psi, state0.chi,
                       state0.t])
        pars = np.array([p.Fs, p.Fmu, p.Om0, *env.durations(p)])
        status, t_ion, yf, steps = _kernels.adiabatic_kernel(
            y0, pars, im, order, env.total(p), rtol, atol,
            s_ref, im_ref, surf, 10_000_000)
        st = AdiabaticState(I1=yf[0], I2=yf[1], psi=yf[2], chi=yf[3],
                            im=im, t=yf[4])
        if status == _kernels.STATUS_FAILED:
            return AdiabaticOutcome(False, math.nan, st, failed=True,
                                    steps=steps)
        if status == _kernels.STATUS_IONISED:
            return AdiabaticOutcome(True, t_ion, st, steps=steps)
        return AdiabaticOutcome(False, math.nan, st, steps=steps)
    if table is None:
        table = default_table()
    t_end = env.total(p)
    y0 = np.array([state0.I1, state0.I2, state0.psi, state0.chi, state0.t])
    solver = DOP853(lambda tau, y: _rhs(y, im, p, env, order),
                    state0.tau, y0, t_bound=np.inf, rtol=rtol, atol=atol)
    steps = 0
    while True:
        try:
            solver.step()
        except (ValueError, FloatingPointError):
            return AdiabaticOutcome(False, math.nan, state0, failed=True,
                                    steps=steps)
        if solver.status == "failed":
            return AdiabaticOutcome(False, math.nan, state0, failed=True,
                                    steps=steps)
        steps += 1
        y = solver.y
        st = AdiabaticState(I1=y[0], I2=y[1], psi=y[2], chi=y[3], im=im,
                            t=y[4], tau=solver.t)
        if y[4] >= t_end:
            sol = solver.dense_output()
            tau_star = brentq(lambda s: sol(s)[4] - t_end,
                              solver.t_old, solver.t, xtol=1e-12)
            yf = sol(tau_star)
            st = AdiabaticState(I1=yf[0], I2=yf[1], psi=yf[2], chi=yf[3],
                                im=im, t=t_end, tau=tau_star)
            F = field_value(p, env, t_end)
            if ionisation_criterion(F * st.In ** 4, st.Ie / st.In,
                                    im / st.In, table):
                return AdiabaticOutcome(True, t_end, st, steps=steps)
            return AdiabaticOutcome(False, math.nan, st, steps=steps)
        F = field_value(p, env, y[4])
        if ionisation_criterion(F * st.In ** 4, st.Ie / st.In,
                                    im / st.In, table):
            return AdiabaticOutcome(True, y[4], st, steps=steps)


def trace_adiabatic(state0: AdiabaticState, p, env, times, order: int = 2,
                    rtol: float = 1e-10, atol: float = 1e-10,
                    table=None) -> list[AdiabaticState]:
    """States at the requested physical times, stopping when ionised."""
    if table is None:
        table = default_table()
    im = abs(state0.im)
    times = np.asarray(times, dtype=float)
    t_end = env.total(p)
    y0 = np.array([state0.I1, state0.I2, state0.psi, state0.chi, state0.t])
    solver = DOP853(lambda tau, y: _rhs(y, im, p, env, order),
                    state0.tau, y0, t_bound=np.inf, rtol=rtol, atol=atol)
    out: list[AdiabaticState] = []
    idx = 0
    t_prev = state0.t
    while idx < len(times):
        try:
            solver.step()
        except (ValueError, FloatingPointError):
            break
        if solver.status == "failed":
            break
        y = solver.y
        sol = solver.dense_output()
        while idx < len(times) and t_prev <= times[idx] <= y[4]:
            tau_s = brentq(lambda s: sol(s)[4] - times[idx],
                           solver.t_old, solver.t, xtol=1e-12)
            ys = sol(tau_s)
            out.append(AdiabaticState(I1=ys[0], I2=ys[1], psi=ys[2],
                                      chi=ys[3], im=im, t=times[idx],
                                      tau=tau_s))
            idx += 1
        t_prev = y[4]
        F = field_value(p, env, y[4])
        in_now = y[0] + y[1] + im
        if ionisation_criterion(F * in_now ** 4, (y[1] - y[0]) / in_now,
                                im / in_now, table):
            break
        if y[4] >= t_end or y[4] >= times[-1]:
            break
    return out


# ---------------------------------------------------------------------------
# Fourier representation of the auxiliary angles


@dataclass(frozen=True)
class FourierBlock:
    """Multiple Fourier coefficients of sin(k psi) and sin(k chi).

    sin k psi = sum_{s1 s2} S[s1, s2] exp(-i (s1 theta1 + s2 theta2)),
    and likewise sin k chi with C.  The C block is the S block of the
    mirrored system (actions and angle indices exchanged).
    """

    k: int
    window: int
    S: np.ndarray
    C: np.ndarray
    sigma1: float
    sigma2: float

    def synth(self, which: str, theta1, theta2):
        """Evaluate the series at angle points (broadcasting)."""
        M = self.S if which == "psi" else self.C
        w = self.window
        th1 = np.asarray(theta1, dtype=float)[..., None, None]
        th2 = np.asarray(theta2, dtype=float)[..., None, None]
        s = np.arange(-w, w + 1)
        phase = np.exp(-1j * (s[:, None] * th1 + s[None, :] * th2))
        return np.real(np.sum(M * phase, axis=(-2, -1)))


def _s_matrix(k: int, sg1: float, sg2: float, window: int) -> np.ndarray:
    w = window
    S = np.zeros((2 * w + 1, 2 * w + 1), dtype=complex)
    for i1, a in enumerate(range(-w, w + 1)):
        for i2, b in enumerate(range(-w, w + 1)):
            s = a + b
            if s != 0:
                S[i1, i2] = (0.5j * k / s) * jv(b, s * sg2) * (
                    jv(a + k, s * sg1) + jv(a - k, s * sg1))
            elif k == 1 and a == 1:
                S[i1, i2] = -0.25j * sg2
            elif k == 1 and a == -1:
                S[i1, i2] = 0.25j * sg2
    return S


def fourier_coeffs(k: int, a: Actions, window: int = 16) -> FourierBlock:
    """Coefficient block for sin(k psi), sin(k chi) over the angle torus."""
    if k not in (1, 2):
        raise ValueError("harmonic index k must be 1 or 2")
    sg1, sg2 = a.sigma1, a.sigma2
    S = _s_matrix(k, sg1, sg2, window)
    C = _s_matrix(k, sg2, sg1, window).T
    return FourierBlock(k=k, window=window, S=S, C=C, sigma1=sg1, sigma2=sg2)


# ---------------------------------------------------------------------------
# Angle-map corrections to first order in the field


@dataclass(frozen=True)
class AngleHarmonics:
    """First two odd harmonics of the angle-map corrections.

    theta1 = psi + P1(psi) + Q1(chi), theta2 = chi + P2(psi) + Q2(chi)
    with P(x) = p[0] sin x + p[1] sin 2x and likewise Q.
    """

    P1: tuple
    P2: tuple
    Q1: tuple
    Q2: tuple


def angle_corrections(a: Actions, F: float) -> AngleHarmonics:
    """O(F) harmonics of the angle maps; at F=0 they collapse to the
    shared -sigma1 sin psi - sigma2 sin chi correction."""
    In, im = a.In, abs(a.Im)
    I1, I2 = a.I1, a.I2
    s1, s2 = a.sigma1, a.sigma2
    b1 = 7.0 * (2.0 * I2 + im)
    b2 = 7.0 * (2.0 * I1 + im)
    p_common = -0.25 * In ** 4 * s1 * s1 * F
    q_common = 0.25 * In ** 4 * s2 * s2 * F
    return AngleHarmonics(
        P1=(-0.25 * s1 * (4.0 - In ** 3 * (2.0 * In + b1) * F), p_common),
        P2=(-0.25 * s1 * (4.0 - In ** 3 * (10.0 * In + b1) * F), p_common),
        Q1=(-0.25 * s2 * (4.0 + In ** 3 * (10.0 * In + b2) * F), q_common),
        Q2=(-0.25 * s2 * (4.0 + In ** 3 * (2.0 * In + b2) * F), q_common),
    )
