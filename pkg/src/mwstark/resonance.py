"""Dynamical resonances of a Kepler atom in collinear static and
oscillating fields.

The slow secular rotation of the orbit couples to the field modulation
whenever three times the mean rotation rate passes through an integer
multiple of the drive frequency.  This module locates those resonant
static fields, finds the drive amplitudes at which a resonance switches
off, and characterises the pendulum-like island each resonance carves
out of the (angle, electric action) phase plane: its centre, saddle,
area, internal frequency and separatrix.  It also evolves an initial
phase line through the switch-on envelope to show how the island
captures or misses it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .series import (
    Actions,
    PowerSeries,
    g_bar,
    g_bar_truncated,
    g_tilde,
    linear_coeffs,
    pade,
    radius_of_convergence,
)
from .units import Envelope, ScaledParams, envelope_value

__all__ = [
    "NoResonanceError",
    "IslandAbsentError",
    "FieldEstimate",
    "ResonanceCoeffs",
    "IslandParams",
    "PhaseCurve",
    "ResonanceContours",
    "bessel_jprime_zero",
    "script_J",
    "script_J_values",
    "harmonic_phase_args",
    "resonance_position",
    "disappearance_field",
    "island_params",
    "resonance_contours",
    "phase_line_evolution",
    "island_fraction",
]


class NoResonanceError(ValueError):
    """No resonant root inside the search window."""


class IslandAbsentError(ValueError):
    """The requested island has no interior saddle point."""


class FieldEstimate(float):
    """A field value carrying a series-convergence warning flag.

    The flag is set when the estimate lies close enough to the radius of
    convergence of the underlying rotation-rate series that the value
    should not be trusted quantitatively.
    """

    convergence_warning: bool

    def __new__(cls, value: float, convergence_warning: bool = False):
        obj = super().__new__(cls, value)
        obj.convergence_warning = bool(convergence_warning)
        return obj


@dataclass(frozen=True)
class ResonanceCoeffs:
    """Fourier coefficients of the modulated coupling phase.

    J[i] is the coefficient of harmonic k[i] in the expansion of
    sin(2 psi - 3 In g(t)); z holds the three phase amplitudes that
    generate them.
    """

    k: tuple
    J: np.ndarray
    z: tuple

    def __post_init__(self):
        if len(self.k) != len(self.J):
            raise ValueError("harmonic window and coefficients disagree")
        # Parseval: the expanded function is a unit-amplitude sine
        if float(np.sum(np.square(self.J))) > 1.0 + 1e-9:
            raise ValueError("coefficient window violates the Parseval bound")

    def coefficient(self, k: int) -> float:
        try:
            return float(self.J[self.k.index(k)])
        except ValueError:
            raise KeyError(f"harmonic {k} outside the computed window")

    def jtilde(self, j: int) -> float:
        """Coupling strength of the j-th resonance."""
        return 0.5 * (self.coefficient(j - 1) - self.coefficient(j + 1))


@dataclass(frozen=True)
class IslandParams:
    """Geometry of one resonance island."""

    j: int
    alpha_j: float
    nu_j: float
    interval: tuple
    area: float
    omega_j: float
    widthproxy: float

    @property
    def half_period_field_periods(self) -> float:
        """Half the internal island period, in units of the field period."""
        return self.omega0 / (2.0 * self.omega_j)

    # set by island_params; kept on the instance so the property above
    # needs no extra arguments
    omega0: float = 0.0


@dataclass(frozen=True)
class PhaseCurve:
    """An ordered line of (angle, electric action) points at one time."""

    theta: np.ndarray
    Ie: np.ndarray
    time: float

    def arc_length(self) -> float:
        th = np.unwrap(2.0 * np.asarray(self.theta)) / 2.0
        return float(np.sum(np.hypot(np.diff(th), np.diff(self.Ie))))


# ---------------------------------------------------------------------------
# Bessel utilities


def bessel_jprime_zero(j: int, k: int) -> float:
    """k-th positive zero of the derivative of the Bessel function J_j."""
    if j < 0 or k < 1:
        raise ValueError("need j >= 0 and k >= 1")
    return float(special.jnp_zeros(j, k)[-1])


# ---------------------------------------------------------------------------
# Fourier coefficients of the coupling phase


def harmonic_phase_args(p: ScaledParams, a: Actions,
                        harmonics: str = "series") -> tuple:
    """Phase amplitudes z_k = 3 gtilde_k In Fmu / Omega for k = 1..3.

    harmonics 'series' evaluates the oscillatory harmonics from the full
    rotation-rate series; 'leading' uses their closed-form leading terms.
    """
    if harmonics == "series":
        gt = g_tilde(p, a, kmax=3)
    elif harmonics == "leading":
        In2 = a.In * a.In
        br = 23.0 * In2 + 11.0 * a.Im * a.Im
        pref = a.In ** 6 * br
        gt = (
            1.0 + (3.0 / 16.0) * pref * (p.Fs ** 2 + 0.25 * p.Fmu ** 2),
            (3.0 / 64.0) * pref * p.Fs * p.Fmu,
            (1.0 / 192.0) * pref * p.Fmu ** 2,
        )
    else:
        raise ValueError("harmonics must be 'series' or 'leading'")
    scale = 3.0 * a.In * p.Fmu / p.Om0
    return tuple(scale * g for g in gt)


def script_J_values(z1: float, z2: float, z3: float, kwindow,
                    method: str = "quadrature", smax: int = 12) -> ResonanceCoeffs:
    """Coefficients of sin(x - phi(t)) on the harmonics of the drive,
    with phi(t) = z1 sin u + z2 sin 2u + z3 sin 3u."""
    kwindow = tuple(int(k) for k in kwindow)
    if method == "quadrature":
        # sin(x - phi) = Im[e^{ix} e^{-i phi}]; phi is odd so the Fourier
        # coefficients of e^{-i phi} are real and the k-th harmonic feeds
        # sin(x + k u); the printed convention carries an extra k*pi phase
        n = 4096
        u = 2.0 * np.pi * np.arange(n) / n
        phi = z1 * np.sin(u) + z2 * np.sin(2 * u) + z3 * np.sin(3 * u)
        C = np.fft.fft(np.exp(-1j * phi)) / n
        J = np.array([((-1) ** k * C[k % n]).real for k in kwindow])
    elif method == "bessel":
        ms = np.arange(-smax, smax + 1)
        J2 = special.jv(ms, z2)
        J3 = special.jv(ms, z3)
        # drop negligible products; tail bound |J_s(z)| <= (z/2)^s / s!
        keep2 = np.abs(J2) > 1e-14
        keep3 = np.abs(J3) > 1e-14
        m2, m3 = np.meshgrid(ms[keep2], ms[keep3], indexing="ij")
        w = np.outer(J2[keep2] * (-1.0) ** ms[keep2], J3[keep3])
        J = np.array([
            float(np.sum(w * special.jv(k - 2 * m2 - 3 * m3, z1)))
            for k in kwindow
        ])
    else:
        raise ValueError("method must be 'quadrature' or 'bessel'")
    return ResonanceCoeffs(k=kwindow, J=J, z=(z1, z2, z3))


def script_J(p: ScaledParams, a: Actions, kwindow,
             method: str = "quadrature",
             harmonics: str = "series") -> ResonanceCoeffs:
    """Fourier coefficients of the modulated coupling phase at p."""
    z1, z2, z3 = harmonic_phase_args(p, a, harmonics)
    return script_J_values(z1, z2, z3, kwindow, method=method)


# ---------------------------------------------------------------------------
# Resonance position


@lru_cache(maxsize=64)
def _cached_radius(In: float, Im: float) -> float:
    r_rich, r_pade = radius_of_convergence(Actions(In=In, Ie=0.0, Im=Im))
    return min(r_rich, r_pade)


def _even_profile(cm, Fmu: float) -> np.ndarray:
    """Coefficients e_m of gbar/Fs = sum_m e_m Fs^{2m} at fixed Fmu."""
    e = np.zeros(len(cm))
    for q, c in enumerate(cm):
        for i in range(q + 1):
            e[q - i] += (c * math.comb(2 * q + 1, 2 * i)
                         * math.comb(2 * i, i) * 0.25 ** i * Fmu ** (2 * i))
    return e


def rotation_profile_pade(a: Actions, Fmu: float, K: int = 17):
    """Rational approximant of gbar/Fs in the variable y = 10 Fs^2.

    A [3/3] form is used for Fmu >= 0.09 and [2/2] below, matching the
    reliability crossover of the underlying series.
    """
    cm = np.asarray(linear_coeffs(a.In, abs(a.Im), K=K), dtype=float)
    e = _even_profile(cm, Fmu)
    ser = PowerSeries(e * 0.1 ** np.arange(len(e)))
    mn = 3 if Fmu >= 0.09 else 2
    return pade(ser, mn, mn)


def _gbar_evaluator(p_template: ScaledParams, a: Actions, method: str,
                    order):
    """Returns gbar(Fs) under the requested summation method."""
    Fmu, Om0 = p_template.Fmu, p_template.Om0
    if method == "truncated":
        mmax = 8 if order is None else int(order)

        def gb(Fs):
            return g_bar_truncated(ScaledParams(Fs=Fs, Fmu=Fmu, Om0=Om0),
                                   a, mmax)
    elif method == "pade":
        ap = rotation_profile_pade(a, Fmu)

        def gb(Fs):
            return Fs * ap(10.0 * Fs * Fs)
    else:
        raise ValueError(f"unknown method {method!r}")
    return gb


def _bracketed_root(f, lo: float, hi: float, n: int = 200) -> float:
    grid = np.linspace(lo, hi, n)
    vals = np.array([f(x) for x in grid])
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if len(idx) == 0:
        raise NoResonanceError("no sign change inside the search bracket")
    i = idx[0]
    return float(optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-12))


def resonance_position(j: int, p: ScaledParams, a: Actions,
                       method: str = "pade", order=None) -> FieldEstimate:
    """Static field of the j-th dynamical resonance.

    Solves 3 In gbar(Fs, Fmu, Im) = j Omega0 on [0, 1.2 j Omega0 / 3].
    method 'lowest' returns the leading-order value j Omega0 / (3 In);
    'truncated' sums the rotation-rate series through `order` correction
    terms; 'richardson' extrapolates the truncated sequence; 'pade'
    (default) uses the rational profile approximant.
    """
    if j < 1:
        raise ValueError("resonance index must be >= 1")
    hi = 1.2 * j * p.Om0 / (3.0 * a.In)
    if method == "lowest":
        val = j * p.Om0 / (3.0 * a.In)
    elif method == "richardson":
        # estimates indexed by the number of series terms p = 1..9;
        # the pre-asymptotic head is dropped and the tail fitted with
        # its natural term counts
        seq = [j * p.Om0 / (3.0 * a.In)]
        for mmax in range(1, 9):
            gb = _gbar_evaluator(p, a, "truncated", mmax)
            seq.append(_bracketed_root(
                lambda Fs: 3.0 * a.In * gb(Fs) - j * p.Om0, 1e-9, hi))
        from .series import richardson
        val = richardson(seq[3:], p=np.arange(4, 10))
    else:
        gb = _gbar_evaluator(p, a, method, order)
        val = _bracketed_root(
            lambda Fs: 3.0 * a.In * gb(Fs) - j * p.Om0, 1e-9, hi)
    warn = val + p.Fmu > _cached_radius(a.In, abs(a.Im))
    return FieldEstimate(val, convergence_warning=warn)


# ---------------------------------------------------------------------------
# Resonance disappearance


def _jtilde_at(j: int, Fs: float, Fmu: float, Om0: float, a: Actions,
               harmonics: str) -> float:
    z1, z2, z3 = harmonic_phase_args(
        ScaledParams(Fs=Fs, Fmu=Fmu, Om0=Om0), a, harmonics)
    if harmonics == "leading":
        # reduced model: the second harmonic enters with alternating sign
        z2 = -z2
    rc = script_J_values(z1, z2, z3, (j - 1, j + 1))
    return rc.jtilde(j)


def disappearance_field(j: int, omega0: float, a: Actions,
                        Fmu_target: float, method: str = "pade",
                        harmonics: str = "leading",
                        search_halfwidth: float = 0.02) -> tuple:
    """Drive amplitude nearest Fmu_target at which resonance j vanishes.

    Returns (Fs_j, Fmu_jk): the resonant static field evaluated at the
    root and the drive amplitude where the island coupling crosses zero.
    method 'lowest' uses the leading-order rule Fmu = z'_{jk} Omega0 / 3
    with z'_{jk} the k-th positive zero of J'_j.
    """
    if j < 1:
        raise ValueError("resonance index must be >= 1")
    if method == "lowest":
        best = None
        for k in range(1, 200):
            fmu = bessel_jprime_zero(j, k) * omega0 / 3.0
            if best is None or abs(fmu - Fmu_target) < abs(best - Fmu_target):
                best = fmu
            if fmu > Fmu_target + 4.0 * omega0:
                break
        return (FieldEstimate(j * omega0 / (3.0 * a.In)), best)

    def h(fmu: float) -> float:
        fs = resonance_position(j, ScaledParams(Fs=0.0, Fmu=fmu, Om0=omega0),
                                a, method=method)
        return _jtilde_at(j, float(fs), fmu, omega0, a, harmonics)

    lo = max(1e-3, Fmu_target - search_halfwidth)
    hi = Fmu_target + search_halfwidth
    grid = np.linspace(lo, hi, 41)
    vals = [h(f) for f in grid]
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(float(optimize.brentq(h, grid[i], grid[i + 1],
                                               xtol=1e-9)))
    if not roots:
        raise NoResonanceError(
            f"no coupling zero within {search_halfwidth} of {Fmu_target}")
    fmu = min(roots, key=lambda r: abs(r - Fmu_target))
    fs = resonance_position(j, ScaledParams(Fs=0.0, Fmu=fmu, Om0=omega0), a,
                            method=method)
    return (fs, fmu)


# ---------------------------------------------------------------------------
# Island geometry


def _ab_product(Ie, In: float, Im: float):
    m = abs(Im)
    A2 = (In + m) ** 2 - Ie ** 2
    B2 = (In - m) ** 2 - Ie ** 2
    return np.sqrt(np.maximum(A2, 0.0)), np.sqrt(np.maximum(B2, 0.0))


def island_params(j: int, p: ScaledParams, a: Actions,
                  gbar_order=None) -> IslandParams:
    """Centre, existence interval, area, frequency and width proxy of
    the j-th resonance island at the supplied field point.

    gbar_order limits the rotation-rate series to that many correction
    terms (0 reproduces the leading-order detuning); None sums all nine.
    """
    if p.Fs <= 0:
        raise ValueError("island geometry needs a positive static field")
    if gbar_order is None:
        gb = g_bar(p, a)
    else:
        gb = g_bar_truncated(p, a, int(gbar_order))
    S = p.Fs ** 2 + 0.5 * p.Fmu ** 2
    nu = 3.0 * a.In * gb - j * p.Om0
    alpha = 4.0 * nu / (3.0 * a.In ** 4 * S)
    beta = (j * p.Om0) ** 2 / 36.0 + p.Fmu ** 2 / 8.0
    centre = j * p.Om0 / 3.0
    jp = special.jvp(j, j * p.Fmu / p.Fs)
    area = 4.0 * a.In * math.asin(math.sqrt(
        8.0 * p.Om0 * p.Fmu * abs(jp)
        / (3.0 * S + 4.0 * p.Om0 * p.Fmu * abs(jp))))
    omega_j = math.sqrt(0.375 * S * p.Om0 * p.Fmu * abs(jp))
    fs_res = resonance_position(j, p, a, method="pade")
    g1 = harmonic_phase_args(
        ScaledParams(Fs=float(fs_res), Fmu=p.Fmu, Om0=p.Om0), a,
        harmonics="leading")[0] / (3.0 * a.In * p.Fmu / p.Om0)
    widthproxy = float(special.jvp(j, (3.0 * p.Fmu / p.Om0) * g1))
    return IslandParams(j=j, alpha_j=alpha, nu_j=nu,
                        interval=(centre - beta, centre + beta),
                        area=area, omega_j=omega_j, widthproxy=widthproxy,
                        omega0=p.Om0)


# ---------------------------------------------------------------------------
# Resonance Hamiltonian geometry


class _IslandModel:
    """K(theta, Ie) = a (Ie - alpha)^2 + c A(Ie) B(Ie) cos(2 theta)."""

    def __init__(self, a_coef: float, alpha: float, c: float,
                 In: float, Im: float):
        self.a = a_coef
        self.alpha = alpha
        self.c = c
        self.In = In
        self.Im = abs(Im)
        self.edge = In - self.Im

    def K(self, theta, Ie):
        A, B = _ab_product(np.asarray(Ie), self.In, self.Im)
        return (self.a * (np.asarray(Ie) - self.alpha) ** 2
                + self.c * A * B * np.cos(2.0 * np.asarray(theta)))

    def _dI_fixed(self, Ie, sign):
        # dK/dIe at cos(2 theta) = sign, multiplied through by A*B so
        # the edge square roots cancel and the function stays smooth
        A, B = _ab_product(Ie, self.In, self.Im)
        return (2.0 * self.a * (Ie - self.alpha) * A * B
                - sign * self.c * Ie * (A * A + B * B))

    def _interior_root(self, sign):
        f = lambda Ie: self._dI_fixed(Ie, sign)
        grid = np.linspace(-self.edge, self.edge, 401)[1:-1]
        vals = f(grid)
        s = np.sign(vals)
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        roots = [float(optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-13))
                 for i in idx]
        if not roots:
            return None
        return min(roots, key=lambda r: abs(r - self.alpha))

    def hessian(self, theta, Ie):
        h = 1e-6 * max(self.edge, 1.0)
        kII = (self.K(theta, Ie + h) - 2 * self.K(theta, Ie)
               + self.K(theta, Ie - h)) / (h * h)
        kTT = (self.K(theta + 1e-6, Ie) - 2 * self.K(theta, Ie)
               + self.K(theta - 1e-6, Ie)) / 1e-12
        return float(kTT), float(kII)

    def fixed_points(self):
        """(saddle, centre) as (theta, Ie) pairs; either may be None."""
        pts = {}
        for theta in (0.0, 0.5 * np.pi):
            sign = math.cos(2.0 * theta)
            Ie = self._interior_root(sign)
            if Ie is None:
                continue
            kTT, kII = self.hessian(theta, Ie)
            kind = "saddle" if kTT * kII < 0 else "centre"
            pts.setdefault(kind, (theta, Ie))
        return pts.get("saddle"), pts.get("centre")


@dataclass(frozen=True)
class ResonanceContours:
    """Level sets of the island Hamiltonian over (theta, Ie)."""

    theta: np.ndarray
    Ie: np.ndarray
    K: np.ndarray
    levels: tuple
    contours: tuple          # tuple of (level, tuple of polylines)
    separatrix: tuple        # polylines through the saddle level
    saddle: tuple
    centre: tuple
    saddle_eigvals: tuple
    centre_eigvals: tuple
    delta_Ie: float


def _flow_eigvals(model: _IslandModel, theta: float, Ie: float) -> tuple:
    kTT, kII = model.hessian(theta, Ie)
    lam2 = -kII * kTT
    if lam2 >= 0:
        r = math.sqrt(lam2)
        return (r, -r)
    r = math.sqrt(-lam2)
    return (complex(0, r), complex(0, -r))


def resonance_contours(j: int, p: ScaledParams, a: Actions,
                       alpha_j=None, n_grid: int = 600,
                       n_levels: int = 12,
                       gbar_order=None) -> ResonanceContours:
    """Contour geometry of the j-th island, including its separatrix.

    The coupling magnitude is used, which at most translates the pattern
    in angle, so the saddle sits at theta = 0 and the centre at pi/2.
    """
    import contourpy

    if alpha_j is None:
        alpha_j = island_params(j, p, a, gbar_order=gbar_order).alpha_j
    S = p.Fs ** 2 + 0.5 * p.Fmu ** 2
    rc = script_J(p, a, (j - 1, j + 1))
    c = 0.25 * a.In ** 3 * p.Om0 * p.Fmu * abs(rc.jtilde(j))
    model = _IslandModel(3.0 * a.In ** 4 * S / 16.0, alpha_j, c, a.In, a.Im)

    saddle, centre = model.fixed_points()
    if saddle is None:
        raise IslandAbsentError(f"island j={j} has no interior saddle here")

    edge = model.edge * (1.0 - 1e-9)
    th = np.linspace(0.0, np.pi, n_grid, endpoint=False)
    Ie = np.linspace(-edge, edge, n_grid)
    K = model.K(th[None, :], Ie[:, None])

    k_sad = float(model.K(*saddle))
    k_cen = float(model.K(*centre)) if centre else float(K.min())
    levels = tuple(np.linspace(k_cen, float(K.max()), n_levels + 2)[1:-1])

    gen = contourpy.contour_generator(x=th, y=Ie, z=K)
    contours = tuple(
        (lev, tuple(np.asarray(seg) for seg in gen.lines(lev)))
        for lev in levels)
    sep = tuple(np.asarray(seg) for seg in gen.lines(k_sad))

    # island height: vertical extent of the separatrix pieces that
    # surround the centre
    delta = 0.0
    if centre is not None:
        for seg in sep:
            tmin, tmax = seg[:, 0].min(), seg[:, 0].max()
            imin, imax = seg[:, 1].min(), seg[:, 1].max()
            if tmin <= centre[0] <= tmax and imin <= centre[1] <= imax:
                delta = max(delta, float(imax - imin))
    return ResonanceContours(
        theta=th, Ie=Ie, K=K, levels=levels, contours=contours,
        separatrix=sep, saddle=saddle, centre=centre,
        saddle_eigvals=_flow_eigvals(model, *saddle),
        centre_eigvals=_flow_eigvals(model, *centre) if centre else (),
        delta_Ie=delta)


# ---------------------------------------------------------------------------
# Phase-line evolution through the switch-on


def _post_switch_model(j: int, p: ScaledParams, a: Actions,
                       alpha_j: float) -> _IslandModel:
    # autonomous island Hamiltonian seen after the switch-on, with the
    # signed leading-order coupling (the sign fixes the saddle angle)
    S = p.Fs ** 2 + 0.5 * p.Fmu ** 2
    jp = float(special.jvp(j, 3.0 * p.Fmu / p.Om0))
    c = 0.25 * a.In ** 3 * p.Om0 * p.Fmu * jp * (-1.0) ** j
    return _IslandModel(3.0 * a.In ** 4 * S / 16.0, alpha_j, c, a.In, a.Im)


def phase_line_evolution(Ie0: float, p: ScaledParams, a: Actions,
                         env: Envelope, Npts: int = 256, j=None,
                         rtol: float = 1e-8) -> PhaseCurve:
    """Evolve an initial constant-action phase line through the
    switch-on and return it in the co-rotating island frame.

    The line starts at angle values uniform over a half-turn with
    Ie = Ie0, and is advanced under the averaged switch-on dynamics on
    the action sphere, where the motion has no edge singularity.  The
    shared rotation phase is integrated alongside the points.
    """
    In, Im = a.In, abs(a.Im)
    if abs(Ie0) >= In - Im:
        raise ValueError("initial action must lie strictly inside the range")
    if j is None:
        j = max(1, int(round(3.0 * a.In * g_bar(p, a) / p.Om0)))

    Ta = env.Na * 2.0 * np.pi / p.Om0
    psi0 = np.linspace(0.0, np.pi, Npts, endpoint=False)
    B0 = math.sqrt((In - Im) ** 2 - Ie0 ** 2)
    Z0 = np.empty((3, Npts))
    Z0[0] = B0 * np.cos(2.0 * psi0)
    Z0[1] = B0 * np.sin(2.0 * psi0)
    Z0[2] = Ie0

    if Ta == 0.0:
        return PhaseCurve(theta=psi0.copy(), Ie=np.full(Npts, Ie0), time=0.0)

    S = p.Fs ** 2 + 0.5 * p.Fmu ** 2
    quad = 3.0 * In ** 4 * S / 8.0

    def rhs(t, y):
        Z = y[:-1].reshape(3, Npts)
        g = y[-1]
        lam = envelope_value(env, p, t)
        drive = 0.25 * In ** 3 * lam * p.Om0 * p.Fmu * math.sin(p.Om0 * t)
        cg = math.cos(3.0 * In * g)
        sg = math.sin(3.0 * In * g)
        A = np.sqrt((In + Im) ** 2 - Z[2] ** 2)
        K1 = -drive * A * sg
        K2 = drive * A * cg
        K3 = (quad * lam * lam * Z[2]
              + drive * (-Z[2] / A) * (Z[1] * cg - Z[0] * sg))
        out = np.empty_like(y)
        dZ = out[:-1].reshape(3, Npts)
        dZ[0] = 2.0 * (K2 * Z[2] - K3 * Z[1])
        dZ[1] = 2.0 * (K3 * Z[0] - K1 * Z[2])
        dZ[2] = 2.0 * (K1 * Z[1] - K2 * Z[0])
        out[-1] = lam * (p.Fs + p.Fmu * math.cos(p.Om0 * t))
        return out

    y0 = np.concatenate([Z0.ravel(), [0.0]])
    sol = integrate.solve_ivp(rhs, (0.0, Ta), y0, method="DOP853",
                              rtol=rtol, atol=1e-10, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"phase line integration failed: {sol.message}")
    Z = sol.y[:-1, -1].reshape(3, Npts)
    g_a = sol.y[-1, -1] - Ta * p.Fs - (p.Fmu / p.Om0) * math.sin(p.Om0 * Ta)
    two_psi = np.arctan2(Z[1], Z[0])
    two_theta = two_psi - (3.0 * a.In * p.Fs - j * p.Om0) * Ta - 3.0 * a.In * g_a
    return PhaseCurve(theta=np.mod(two_theta / 2.0, np.pi), Ie=Z[2].copy(),
                      time=Ta)


def island_fraction(curve: PhaseCurve, j: int, p: ScaledParams, a: Actions,
                    gbar_order=0) -> float:
    """Fraction of a phase curve lying inside the island separatrix.

    The separatrix is that of the slow-frame pendulum model built on the
    lowest-order resonance condition (gbar_order=0), the same frame the
    phase-line evolution reports its angle in.
    """
    alpha = island_params(j, p, a, gbar_order=gbar_order).alpha_j
    model = _post_switch_model(j, p, a, alpha)
    saddle, centre = model.fixed_points()
    if saddle is None:
        raise IslandAbsentError(f"island j={j} has no interior saddle here")
    k_sad = float(model.K(*saddle))
    vals = model.K(curve.theta, curve.Ie)
    return float(np.mean(vals < k_sad))
