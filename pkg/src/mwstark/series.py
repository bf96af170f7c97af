"""Truncated power-series engine and the classical Stark series.

This module builds, for a given set of actions, the perturbation series in
the field strength F for the separated action integrals of hydrogen in a
uniform field, inverts them to get the energy E(I, F) and separation
constant alpha_1(I, F), extracts the part of E linear in the electric
action (which controls resonance positions), and provides the series
acceleration tools (Richardson extrapolation, Pade approximants) used on
those expansions.

Internally the bound-state energy is represented by W = -E > 0 and the
separation constants satisfy alpha_1 + alpha_2 = 2 exactly at every order.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np


class SingularSeriesError(ValueError):
    """Raised when a series operation needs a nonzero/positive leading term."""


def _is_object(arr) -> bool:
    return arr.dtype == object


def _resolve_dtype(dtype):
    if dtype in (None, "longdouble"):
        return np.longdouble
    if dtype in ("float64", float):
        return np.float64
    if dtype in ("mp", "mpmath", object):
        return object
    return np.dtype(dtype).type


class PowerSeries:
    """A truncated power series sum_{k=0}^{K} c_k x^k.

    Coefficients are stored in a numpy array; dtype object is used for
    mpmath high-precision coefficients, np.longdouble otherwise.  Binary
    operations truncate to the shorter operand's order.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs, dtype=None):
        if dtype is object or (dtype is None and isinstance(coeffs, np.ndarray)
                               and coeffs.dtype == object):
            arr = np.empty(len(coeffs), dtype=object)
            arr[:] = list(coeffs)
        else:
            arr = np.asarray(coeffs, dtype=_resolve_dtype(dtype))
        if arr.ndim != 1 or len(arr) == 0:
            raise ValueError("coefficients must be a non-empty 1d sequence")
        self.c = arr

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value, order, dtype=None):
        dt = _resolve_dtype(dtype)
        if dt is object:
            import mpmath as mp
            coeffs = [mp.mpf(0)] * (order + 1)
            coeffs[0] = mp.mpf(value)
            return cls(coeffs, dtype=object)
        coeffs = np.zeros(order + 1, dtype=dt)
        coeffs[0] = value
        return cls(coeffs, dtype=dt)

    @classmethod
    def variable(cls, order, dtype=None):
        s = cls.constant(0, order, dtype)
        if order >= 1:
            one = s.c[0] * 0 + 1 if _is_object(s.c) else 1
            s.c[1] = one
        return s

    # -- basics -------------------------------------------------------
    @property
    def order(self) -> int:
        return len(self.c) - 1

    def copy(self) -> "PowerSeries":
        return PowerSeries(self.c.copy(),
                           dtype=object if _is_object(self.c) else self.c.dtype)

    def truncate(self, order: int) -> "PowerSeries":
        if order >= self.order:
            return self.copy()
        return PowerSeries(self.c[:order + 1],
                           dtype=object if _is_object(self.c) else self.c.dtype)

    def __len__(self):
        return len(self.c)

    def __repr__(self):
        return f"PowerSeries({list(self.c[:min(len(self.c), 6)])}...K={self.order})"

    def _coerce(self, other):
        if isinstance(other, PowerSeries):
            return other
        return PowerSeries.constant(other, self.order,
                                    object if _is_object(self.c) else self.c.dtype)

    # -- ring operations ----------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        n = min(len(self.c), len(o.c))
        return PowerSeries(self.c[:n] + o.c[:n],
                           dtype=object if _is_object(self.c) else None)

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries(-self.c, dtype=object if _is_object(self.c) else None)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.c * other,
                               dtype=object if _is_object(self.c) else None)
        n = min(len(self.c), len(other.c))
        a, b = self.c, other.c
        if _is_object(a) or _is_object(b):
            out = [a[0] * 0] * n
            for k in range(n):
                s = a[0] * 0
                for i in range(k + 1):
                    if i < len(a) and k - i < len(b):
                        s += a[i] * b[k - i]
                out[k] = s
            return PowerSeries(out, dtype=object)
        full = np.convolve(a, b)
        return PowerSeries(full[:n])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PowerSeries):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __pow__(self, n: int):
        if n < 0:
            return self.reciprocal() ** (-n)
        out = PowerSeries.constant(1, self.order,
                                   object if _is_object(self.c) else self.c.dtype)
        base = self.copy()
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- analytic operations -------------------------------------------
    def reciprocal(self) -> "PowerSeries":
        if self.c[0] == 0:
            raise SingularSeriesError("reciprocal of a series with zero constant term")
        r = PowerSeries.constant(1 / self.c[0], self.order,
                                 object if _is_object(self.c) else self.c.dtype)
        two = 2
        # Newton: r <- r(2 - a r), order doubles per pass
        for _ in range(self.order.bit_length() + 1):
            r = r * (two - self * r)
        return r

    def sqrt(self) -> "PowerSeries":
        c0 = self.c[0]
        if c0 <= 0:
            raise SingularSeriesError("series sqrt needs a positive constant term")
        if _is_object(self.c):
            import mpmath as mp
            s0 = mp.sqrt(c0)
        else:
            s0 = np.sqrt(c0)
        s = PowerSeries.constant(s0, self.order,
                                 object if _is_object(self.c) else self.c.dtype)
        half = 0.5
        for _ in range(self.order.bit_length() + 1):
            s = (s + self * s.reciprocal()) * half
        return s

    def deriv(self) -> "PowerSeries":
        if self.order == 0:
            return PowerSeries.constant(0, 0,
                                        object if _is_object(self.c) else self.c.dtype)
        ks = np.arange(1, len(self.c))
        if _is_object(self.c):
            return PowerSeries([self.c[k] * int(k) for k in ks], dtype=object)
        return PowerSeries(self.c[1:] * ks.astype(self.c.dtype))

    def __call__(self, x):
        acc = self.c[-1]
        for ck in self.c[-2::-1]:
            acc = acc * x + ck
        return acc

    def tofloat(self) -> np.ndarray:
        return np.array([float(v) for v in self.c], dtype=float)


def series_arith(a: PowerSeries, b, op: str) -> PowerSeries:
    """Named dispatch over the series ring and analytic operations."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "reciprocal":
        return a.reciprocal()
    if op == "sqrt":
        return a.sqrt()
    raise ValueError(f"unknown series operation {op!r}")


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class Actions:
    """Principal, electric and axial actions of the unperturbed torus.

    In scaled units In = 1 for the initial state.  The parabolic actions
    I1, I2 and the amplitudes sigma1, sigma2 are derived quantities.
    """

    In: float = 1.0
    Ie: float = 0.0
    Im: float = 0.0

    def __post_init__(self):
        if self.In <= 0:
            raise ValueError("principal action must be positive")
        if abs(self.Im) > self.In + 1e-12:
            raise ValueError("|Im| cannot exceed In")
        if abs(self.Ie) > self.In - abs(self.Im) + 1e-12:
            raise ValueError("|Ie| cannot exceed In - |Im|")

    @property
    def I1(self) -> float:
        return 0.5 * (self.In - self.Ie - abs(self.Im))

    @property
    def I2(self) -> float:
        return 0.5 * (self.In + self.Ie - abs(self.Im))

    @property
    def sigma1(self) -> float:
        return math.sqrt(max(self.I1 * (self.I1 + abs(self.Im)), 0.0)) / self.In

    @property
    def sigma2(self) -> float:
        return math.sqrt(max(self.I2 * (self.I2 + abs(self.Im)), 0.0)) / self.In


# ---------------------------------------------------------------------------
# Action integrals as series in F


@functools.lru_cache(maxsize=64)
def _binomial_half(kmax: int) -> tuple:
    """Coefficients a_k of sqrt(1+x) = sum a_k x^k."""
    a = [1.0]
    for k in range(1, kmax + 1):
        a.append(a[-1] * (0.5 - (k - 1)) / k)
    return tuple(a)


def _h_ladder(rootsum: PowerSeries, rootprod: PowerSeries, kmax: int):
    """H_0..H_kmax from the symmetric functions s = y1+y2, p = y1 y2.

    For k >= 1, H_k = -(1/2) [tau^{k+1}] sqrt(1 - s tau + p tau^2); the
    k = 0 rung is exceptional and needs sqrt(p).
    """
    objdt = _is_object(rootsum.c)
    order = rootsum.order
    one = PowerSeries.constant(1, order, object if objdt else None)
    zero = PowerSeries.constant(0, order, object if objdt else None)
    # sqrt of the tau-quadratic by the direct recurrence (leading term 1)
    a_tau = [one, -rootsum, rootprod]
    b = [one]
    for n in range(1, kmax + 2):
        acc = a_tau[n] if n < 3 else zero
        for i in range(1, n):
            acc = acc - b[i] * b[n - i]
        b.append(acc * 0.5)
    # p vanishes identically when Im = 0 (y1 = 0): sqrt(p) = 0 there
    if all(abs(float(v)) == 0.0 for v in rootprod.c):
        sqrt_p = zero
    else:
        sqrt_p = rootprod.sqrt()
    h = [(rootsum - 2 * sqrt_p) * 0.25]
    for k in range(1, kmax + 1):
        h.append(b[k + 1] * (-0.5))
    return h


def action_integral_series(rootsum: PowerSeries, rootprod: PowerSeries,
                           rootsign: int, K: int | None = None, *,
                           bigroot: PowerSeries) -> PowerSeries:
    """Action integral I = (1/2pi) int dy/y sqrt(f) as a power series in F.

    rootsum and rootprod are the series for the sum and product of the two
    bounded turning points of the cubic f, bigroot the series for the
    scaled third root (O(1) as F -> 0), and rootsign the sign of the cubic
    term of f (-1 for the branch bounded above, +1 for the open branch).
    """
    if float(rootprod.c[0]) < -1e-15:
        raise SingularSeriesError("turning-point product must be non-negative")
    if K is None:
        K = rootsum.order
    kmax = K
    h = _h_ladder(rootsum, rootprod, kmax)
    objdt = _is_object(rootsum.c)
    F = PowerSeries.variable(rootsum.order, object if objdt else None)
    arg = (-rootsign) * F * bigroot.reciprocal()
    a = _binomial_half(kmax)
    total = h[0].copy()
    pw = PowerSeries.constant(1, rootsum.order, object if objdt else None)
    for k in range(1, kmax + 1):
        pw = pw * arg
        total = total + a[k] * pw * h[k]
    return (bigroot.sqrt() * total).truncate(K)


def _poly_eval_series(coeffs, x: PowerSeries) -> PowerSeries:
    acc = coeffs[-1]
    for ck in coeffs[-2::-1]:
        acc = acc * x + ck
    return acc


def _newton_root_series(coeffs, x0, order: int, dtype) -> PowerSeries:
    """Root of a polynomial with PowerSeries coefficients, by series Newton.

    x0 must be a simple root of the F = 0 polynomial.
    """
    objdt = dtype is object
    x = PowerSeries.constant(x0, order, object if objdt else dtype)
    dcoeffs = [coeffs[k] * k for k in range(1, len(coeffs))]
    for _ in range(order.bit_length() + 2):
        p = _poly_eval_series(coeffs, x)
        dp = _poly_eval_series(dcoeffs, x)
        x = x - p * dp.reciprocal()
    return x


def _action_branch(W: PowerSeries, alpha: PowerSeries, m: float,
                   rootsign: int, K: int, dtype) -> PowerSeries:
    """Series for one separated action given W(F), alpha(F) series."""
    objdt = dtype is object
    if objdt:
        import mpmath as mp
        m2 = mp.mpf(m) ** 2
        W0, a0 = W.c[0], alpha.c[0]
        disc = mp.sqrt(a0 * a0 - 2 * W0 * m2)
    else:
        m2 = dtype(m) * dtype(m)
        W0, a0 = W.c[0], alpha.c[0]
        disc = np.sqrt(a0 * a0 - 2 * W0 * m2)
    F = PowerSeries.variable(K, object if objdt else dtype)
    m2s = PowerSeries.constant(m2, K, object if objdt else dtype)
    # small turning points: roots of rootsign*F y^3 - 2W y^2 + 2 alpha y - m^2
    cubic = [-m2s, 2 * alpha, -2 * W, rootsign * F]
    y1_0 = (a0 - disc) / (2 * W0)
    y2_0 = (a0 + disc) / (2 * W0)
    if m == 0.0:
        y1 = PowerSeries.constant(0, K, object if objdt else dtype)
    else:
        y1 = _newton_root_series(cubic, y1_0, K, dtype)
    y2 = _newton_root_series(cubic, y2_0, K, dtype)
    # scaled far root: z^3 - 2W z^2 + rootsign*2 alpha F z - F^2 m^2, z(0) = 2W
    zcubic = [-(F * F) * m2s, rootsign * 2 * alpha * F, -2 * W,
              PowerSeries.constant(1, K, object if objdt else dtype)]
    zbig = _newton_root_series(zcubic, 2 * W0, K, dtype)
    return action_integral_series(y1 + y2, y1 * y2, rootsign, K, bigroot=zbig)


# ---------------------------------------------------------------------------
# Inversion: actions -> energy and separation constant


@dataclass(frozen=True)
class StarkSeries:
    """Energy and separation-constant series for one set of actions.

    energy:  E(I, F) = -W(F), coefficients in powers of F
    alpha1:  separation constant series (alpha2 = 2 - alpha1)
    linear:  even series B(F) with E_linear = -(3/2) In Ie F B(F)
    """

    energy: PowerSeries
    alpha1: PowerSeries
    linear: PowerSeries
    actions: Actions
    order: int


def _invert_actions(In: float, I1: float, I2: float, m: float,
                    K: int, dtype) -> tuple[PowerSeries, PowerSeries]:
    """Series (W(F), alpha1(F)) solving I1(W, alpha1; F) = I1 etc."""
    if I1 <= 1e-12 or I2 <= 1e-12:
        raise ValueError("series inversion needs strictly positive I1 and I2")
    objdt = dtype is object
    if objdt:
        import mpmath as mp
        W0 = mp.mpf(1) / (2 * mp.mpf(In) ** 2)
        a10 = (2 * mp.mpf(I1) + m) / In
    else:
        W0 = dtype(1) / (2 * dtype(In) ** 2)
        a10 = (2 * dtype(I1) + dtype(m)) / dtype(In)
    # Frozen F = 0 Jacobian of (I1, I2) wrt (W, alpha1); det = In^4/2 > 0
    c = (2 * W0) ** -0.5 if not objdt else (2 * W0) ** mp.mpf(-0.5)
    a20 = 2 - a10
    j11 = -0.5 * a10 * c ** 3
    j12 = 0.5 * c
    j21 = -0.5 * a20 * c ** 3
    j22 = -0.5 * c
    det = j11 * j22 - j12 * j21
    W = PowerSeries.constant(W0, K, object if objdt else dtype)
    alpha1 = PowerSeries.constant(a10, K, object if objdt else dtype)
    target1 = PowerSeries.constant(I1, K, object if objdt else dtype)
    target2 = PowerSeries.constant(I2, K, object if objdt else dtype)
    for _ in range(K + 2):
        r1 = _action_branch(W, alpha1, m, -1, K, dtype) - target1
        r2 = _action_branch(W, 2 - alpha1, m, +1, K, dtype) - target2
        dW = (j22 * r1 - j12 * r2) * (1 / det)
        da = (j11 * r2 - j21 * r1) * (1 / det)
        W = W - dW
        alpha1 = alpha1 - da
        res = max(max(abs(float(v)) for v in r1.c),
                  max(abs(float(v)) for v in r2.c))
        if res < (1e-30 if objdt else 1e-17):
            break
    return W, alpha1


def stark_series(a: Actions, K: int = 16, dtype="longdouble",
                 mp_dps: int = 50) -> StarkSeries:
    """Perturbation series for the energy and separation constant.

    dtype 'longdouble' (default) carries ~18 significant digits, enough
    for coefficients through O(F^17); dtype 'mp' switches the whole
    construction to mpmath arithmetic with mp_dps digits.
    """
    dt = _resolve_dtype(dtype)
    if dt is object:
        import mpmath as mp
        with mp.workdps(mp_dps):
            return _stark_series_impl(a, K, dt)
    return _stark_series_impl(a, K, dt)


def _stark_series_impl(a: Actions, K: int, dt) -> StarkSeries:
    m = abs(a.Im)
    W, alpha1 = _invert_actions(a.In, a.I1, a.I2, m, K, dt)
    energy = -W
    # Linear-in-Ie part: E is even under (Ie, F) -> (-Ie, -F), so the
    # symmetric difference (E(h) - E(-h))/2h reduces to the odd-order
    # coefficients of a single inversion at Ie = h.
    h = 1e-4
    linear = None
    if a.In - m > 4 * h:
        d_h = _odd_part_over_h(a.In, m, h, K, dt)
        d_h2 = _odd_part_over_h(a.In, m, h / 2, K, dt)
        d = (4 * d_h2 - d_h) * (1.0 / 3.0)
        bracket = d * (-2.0 / (3.0 * a.In))
        # strip the overall factor F: B(F) with constant term 1
        lin = bracket.c[1:]
        linear = PowerSeries(lin, dtype=object if dt is object else dt)
    else:
        linear = PowerSeries.constant(1, max(K - 1, 0),
                                      object if dt is object else dt)
    return StarkSeries(energy=energy, alpha1=alpha1, linear=linear,
                       actions=a, order=K)


def _odd_part_over_h(In: float, m: float, h: float, K: int, dt) -> PowerSeries:
    I1 = 0.5 * (In - h - m)
    I2 = 0.5 * (In + h - m)
    W, _ = _invert_actions(In, I1, I2, m, K, dt)
    E = -W
    c = E.c.copy()
    for k in range(len(c)):
        c[k] = 0 * c[k] if k % 2 == 0 else c[k] / h
    return PowerSeries(c, dtype=object if dt is object else dt)


# ---------------------------------------------------------------------------
# Closed forms of the low-order energy coefficients (test anchors and the
# fast path for the slow-dynamics tiers)


def energy_coefficient_exact(k: int, a: Actions) -> float:
    """Closed-form energy series coefficients for k <= 7."""
    In, Ie, Im = a.In, a.Ie, a.Im
    n2, e2, m2 = In * In, Ie * Ie, Im * Im
    if k == 0:
        return -1.0 / (2 * n2)
    if k == 1:
        return -1.5 * In * Ie
    if k == 2:
        return -(In ** 4 / 16.0) * (17 * n2 - 3 * e2 - 9 * m2)
    if k == 3:
        return -(3 * In ** 7 * Ie / 32.0) * (23 * n2 - e2 + 11 * m2)
    if k == 4:
        return -(3 * In ** 10 / 1024.0) * (
            1829 * n2 ** 2 - 1134 * m2 * n2 - 183 * m2 ** 2
            + (602 * n2 - 378 * m2) * e2 + 49 * e2 ** 2)
    if k == 5:
        return -(3 * In ** 13 * Ie / 1024.0) * (
            10563 * n2 ** 2 + 772 * n2 * m2 + 725 * m2 ** 2
            + (98 * n2 + 220 * m2) * e2 - 21 * e2 ** 2)
    if k == 6:
        return -(In ** 16 / 8192.0) * (
            547262 * n2 ** 3 - 429903 * n2 ** 2 * m2 - 16200 * n2 * m2 ** 2
            - 6951 * m2 ** 3
            + (685152 * n2 ** 2 - 25470 * m2 * n2 - 36450 * m2 ** 2) * e2
            + (390 * n2 + 765 * m2) * e2 ** 2 - 372 * e2 ** 3)
    if k == 7:
        return -(3 * In ** 19 * Ie / 32768.0) * (
            7071885 * n2 ** 3 - 1530561 * n2 ** 2 * m2 + 94915 * n2 * m2 ** 2
            + 55937 * m2 ** 3
            + (1502283 * n2 ** 2 + 21410 * n2 * m2 + 66115 * m2 ** 2) * e2
            + (1947 * n2 - 6321 * m2) * e2 ** 2 + 957 * e2 ** 3)
    raise ValueError("closed forms available for k = 0..7 only")


def alpha1_coefficient_exact(k: int, a: Actions) -> float:
    """Closed-form separation-constant coefficients for k <= 3."""
    In, Ie, Im = a.In, a.Ie, a.Im
    n2, e2, m2 = In * In, Ie * Ie, Im * Im
    if k == 0:
        return (2 * a.I1 + abs(Im)) / In
    if k == 1:
        return 0.25 * In ** 2 * (3 * n2 - 3 * e2 - m2)
    if k == 2:
        return -0.125 * In ** 5 * Ie * (n2 - e2 - 6 * m2)
    if k == 3:
        return (In ** 8 / 128.0) * ((171 * n2 - 15 * e2) * (n2 - e2)
                                    - m2 * (82 * n2 + 150 * e2 + 25 * m2))
    raise ValueError("closed forms available for k = 0..3 only")


# ---------------------------------------------------------------------------
# The g-function: linear-part series averaged over a field period


@dataclass(frozen=True)
class GFunction:
    """Period-averaged linear-part data for one (Fs, Fmu, Im) point.

    gbar is the mean of g(F(t)) over a microwave period; gtilde are the
    harmonics of the zero-mean remainder in the normalisation
    integral(g - gbar) dt = (Fmu/Omega) sum_k gtilde_k sin(k Omega t).
    """

    gbar: float
    gtilde: tuple
    coeffs: tuple


@functools.lru_cache(maxsize=256)
def linear_coeffs(In: float, Im: float, K: int = 17,
                  dtype: str = "longdouble") -> tuple:
    """Coefficients c_m of g(F) = sum_m c_m F^{2m+1} for the linear part."""
    # Close to |Im| = In the finite-difference shift in Ie leaves the
    # valid action domain.  Each c_m is a polynomial of degree m in Im^2,
    # so interpolation through interior nodes is exact there.
    if In - abs(Im) < 0.05 * In:
        nm = (K + 1) // 2
        nodes = In * np.sqrt(0.81 * 0.5 *
                             (1 + np.cos(np.pi * (2 * np.arange(nm) + 1)
                                         / (2 * nm))))
        table = np.array([linear_coeffs(In, float(node), K, dtype)
                          for node in nodes])
        x = (nodes / In) ** 2
        out = []
        for col in table.T:
            poly = np.polynomial.polynomial.polyfit(x, col, nm - 1)
            out.append(float(np.polynomial.polynomial.polyval(
                (Im / In) ** 2, poly)))
        return tuple(out)
    a = Actions(In=In, Ie=0.0, Im=Im)
    st = stark_series(a, K=K, dtype=dtype)
    lin = st.linear.tofloat()
    return tuple(lin[0::2])


def g_static(cm, F: float) -> float:
    """g(F) = sum_m c_m F^{2m+1} for a constant field."""
    x = F * F
    acc = 0.0
    for c in cm[::-1]:
        acc = acc * x + c
    return acc * F


def _mean_cos_power(j: int) -> float:
    # <cos^{2j}> over a period = (2j-1)!!/(2j)!!
    return math.comb(2 * j, j) / 4.0 ** j


def mean_field_power(Fs: float, Fmu: float, n: int) -> float:
    """Exact period average of (Fs + Fmu cos(Om t))^n."""
    total = 0.0
    for j in range(n // 2 + 1):
        total += (math.comb(n, 2 * j) * Fs ** (n - 2 * j)
                  * Fmu ** (2 * j) * _mean_cos_power(j))
    return total


def cos_harmonic_power(Fs: float, Fmu: float, n: int, k: int) -> float:
    """Coefficient of cos(k Om t) in (Fs + Fmu cos(Om t))^n, k >= 1."""
    total = 0.0
    for j in range(k, n + 1):
        if (j - k) % 2:
            continue
        total += (math.comb(n, j) * Fs ** (n - j) * Fmu ** j
                  * math.comb(j, (j - k) // 2) * 2.0 ** (1 - j))
    return total


def g_bar(p, a: Actions, K: int = 17) -> float:
    """Mean of the linear-part integrand over one microwave period."""
    cm = linear_coeffs(a.In, abs(a.Im), K)
    return sum(c * mean_field_power(p.Fs, p.Fmu, 2 * m + 1)
               for m, c in enumerate(cm))


def g_bar_truncated(p, a: Actions, mmax: int, K: int = 17) -> float:
    """Partial sum of g_bar through the c_mmax term."""
    cm = linear_coeffs(a.In, abs(a.Im), K)[:mmax + 1]
    return sum(c * mean_field_power(p.Fs, p.Fmu, 2 * m + 1)
               for m, c in enumerate(cm))


def g_tilde(p, a: Actions, kmax: int, K: int = 17,
            method: str = "quadrature") -> np.ndarray:
    """Harmonics gtilde_1..gtilde_kmax of the zero-mean part of g(F(t))."""
    cm = linear_coeffs(a.In, abs(a.Im), K)
    if p.Fmu == 0.0:
        return np.zeros(kmax)
    if method == "analytic":
        out = np.empty(kmax)
        for k in range(1, kmax + 1):
            gk = sum(c * cos_harmonic_power(p.Fs, p.Fmu, 2 * m + 1, k)
                     for m, c in enumerate(cm))
            out[k - 1] = gk / (k * p.Fmu)
        return out
    # periodic trapezoid quadrature via FFT: spectrally exact here
    npts = max(64, 4 * (kmax + 2 * len(cm) + 2))
    theta = 2 * np.pi * np.arange(npts) / npts
    f = p.Fs + p.Fmu * np.cos(theta)
    vals = np.zeros(npts)
    for m, c in enumerate(cm):
        vals += c * f ** (2 * m + 1)
    spec = np.fft.rfft(vals) / npts
    ks = np.arange(1, kmax + 1)
    return 2 * spec[1:kmax + 1].real / (ks * p.Fmu)


def g_function(p, a: Actions, kmax: int = 8, K: int = 17) -> GFunction:
    cm = linear_coeffs(a.In, abs(a.Im), K)
    return GFunction(gbar=g_bar(p, a, K),
                     gtilde=tuple(g_tilde(p, a, kmax, K)),
                     coeffs=cm)


# ---------------------------------------------------------------------------
# Series acceleration


def richardson(seq, p=None) -> float:
    """Limit estimate from estimates s_p, assuming
    s_p = F + sum_{r=1}^{M-1} A_r p^{-r}.

    By default the estimates are taken to use p = 1..M terms; a custom
    vector of term counts may be supplied instead.
    """
    s = np.asarray(seq, dtype=np.longdouble)
    M = len(s)
    if M < 2:
        raise ValueError("need at least two estimates")
    if p is None:
        p = np.arange(1, M + 1, dtype=np.longdouble)
    else:
        p = np.asarray(p, dtype=np.longdouble)
        if len(p) != M:
            raise ValueError("p must match the number of estimates")
    A = np.empty((M, M), dtype=np.longdouble)
    A[:, 0] = 1.0
    for r in range(1, M):
        A[:, r] = p ** (-float(r))
    x = np.linalg.solve(A.astype(float), s.astype(float))
    # one refinement step in longdouble to polish the float64 solve
    resid = s - A @ x.astype(np.longdouble)
    x = x + np.linalg.solve(A.astype(float), resid.astype(float))
    return float(x[0])


@dataclass(frozen=True)
class PadeApproximant:
    """Rational [m/n] approximant with den[0] = 1."""

    num: tuple
    den: tuple

    def __call__(self, x):
        nu = 0.0
        for c in self.num[::-1]:
            nu = nu * x + c
        de = 0.0
        for c in self.den[::-1]:
            de = de * x + c
        return nu / de

    @property
    def poles(self) -> np.ndarray:
        """Real positive poles, ascending."""
        r = np.roots(np.array(self.den[::-1], dtype=float))
        r = r[np.abs(r.imag) < 1e-9 * (1 + np.abs(r.real))].real
        return np.sort(r[r > 0])


def pade(series, m: int, n: int) -> PadeApproximant:
    """Standard [m/n] Pade approximant of a series (PowerSeries or coeffs)."""
    c = series.tofloat() if isinstance(series, PowerSeries) else np.asarray(
        [float(v) for v in series])
    if m + n + 1 > len(c):
        raise ValueError("not enough series coefficients for [m/n]")
    c = c.astype(np.longdouble)
    b = np.zeros(n + 1, dtype=np.longdouble)
    b[0] = 1.0
    if n > 0:
        # sum_{j} b_j c_{k-j} = 0 for k = m+1..m+n
        A = np.empty((n, n), dtype=np.longdouble)
        rhs = np.empty(n, dtype=np.longdouble)
        for i in range(n):
            k = m + 1 + i
            rhs[i] = -c[k]
            for j in range(1, n + 1):
                A[i, j - 1] = c[k - j] if k - j >= 0 else 0.0
        try:
            sol = np.linalg.solve(A.astype(float), rhs.astype(float))
        except np.linalg.LinAlgError as exc:
            raise ValueError("degenerate Pade approximant") from exc
        resid = rhs - A @ sol.astype(np.longdouble)
        sol = sol + np.linalg.solve(A.astype(float), resid.astype(float))
        b[1:] = sol
    a = np.zeros(m + 1, dtype=np.longdouble)
    for k in range(m + 1):
        a[k] = sum(b[j] * c[k - j] for j in range(0, min(k, n) + 1))
    return PadeApproximant(num=tuple(float(v) for v in a),
                           den=tuple(float(v) for v in b))


def radius_of_convergence(a: Actions, K: int = 17) -> tuple[float, float]:
    """(ratio-extrapolation, Pade-pole) estimates of the radius of the
    static linear-part series in F."""
    cm = np.array(linear_coeffs(a.In, abs(a.Im), K))
    # ratio estimates of the radius in x = F^2, extrapolated in 1/m
    ratios = np.abs(cm[:-1] / cm[1:])
    mmax = len(ratios)
    tail = ratios[max(0, mmax - 5):]
    r_est = math.sqrt(abs(richardson(tail)))
    half = (len(cm) - 1) // 2
    try:
        pp = pade(cm, half, half).poles
        p_est = math.sqrt(pp[0]) if len(pp) else math.nan
    except ValueError:
        p_est = math.nan
    return r_est, p_est
