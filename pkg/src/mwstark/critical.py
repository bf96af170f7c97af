"""Critical ionisation field of a hydrogen torus in a static field.

The bound motion of the scaled atom (I_n = 1) separates in squared
parabolic coordinates.  Writing W = -E > 0 for the binding energy and
a1 + a2 = 2 for the separation constants, the two radial actions are

    I1 = (1/2pi) * integral over the band of sqrt(f1(y)) / y,
    I2 = (1/2pi) * integral over the band of sqrt(f2(u)) / u,

    f1(y) = -F y^3 - 2 W y^2 + 2 a1 y - Im^2,
    f2(u) = +F u^3 - 2 W u^2 + 2 a2 u - Im^2,

with y, u the squared parabolic radii.  The uphill cubic f1 is confined
for all F, while the downhill cubic f2 develops a barrier: three
positive roots u1 < u2 < u3, libration on (u1, u2), escape once u2 and
u3 merge.  A torus with actions (Ie, Im) exists only while the pair
(W, a1) solving both action conditions keeps this structure intact; the
largest such F is the critical field returned by f_crit.  Two limits
have closed forms used as checks: at Ie = +1 the threshold is the
one-dimensional value 2^10/(3 pi)^4, and at Ie = -1 it is the field at
which the binding energy of the uphill state reaches zero.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import interpolate, optimize

from .units import ScaledParams

__all__ = [
    "F_CRIT_1D", "CritQuery", "NoFoldError", "Region", "CriticalFieldTable",
    "f_crit", "ionisation_criterion", "adiabatic_boundaries",
    "critical_action", "tunnelling_width_1d", "decay_interval_fraction",
    "default_table",
]

F_CRIT_1D = 2.0 ** 10 / (3.0 * np.pi) ** 4


class NoFoldError(ValueError):
    """No torus-destroying fold was found in the searched field range."""


class _NoBand(Exception):
    # internal: trial (F, W, a1) does not support a bound torus
    pass


@dataclass(frozen=True)
class CritQuery:
    """Torus label (electric and axial actions, both scaled to I_n=1)."""

    Ie: float
    Im: float

    def __post_init__(self):
        if abs(self.Ie) + abs(self.Im) > 1.0 + 1e-12:
            raise ValueError("actions must satisfy |Ie| + |Im| <= 1")


class Region(str, Enum):
    """Adiabatic classification of an initial torus in a combined field."""

    IONISED = "P_i=1"
    BOUND = "P_i=0"
    RESONANCE_POSSIBLE = "resonance-possible"


# 80-point Gauss-Legendre rule on phi in (0, pi/2); the substitution
# y = lo + (hi - lo) sin^2(phi) absorbs both turning-point square roots
_GL_PHI, _GL_W = np.polynomial.legendre.leggauss(80)
_GL_PHI = 0.25 * np.pi * (_GL_PHI + 1.0)
_GL_W = _GL_W * 0.25 * np.pi
_SIN2 = np.sin(_GL_PHI) ** 2
_QUARTIC = (_SIN2 * (1.0 - _SIN2)) * _GL_W


def _three_real_roots(c3, c2, c1, c0):
    """Sorted real roots of a cubic required to have three of them."""
    if c0 == 0.0:
        disc = c2 * c2 - 4.0 * c3 * c1
        if disc < 0.0:
            raise _NoBand
        s = np.sqrt(disc)
        r = sorted((0.0, (-c2 + s) / (2.0 * c3), (-c2 - s) / (2.0 * c3)))
        return r
    a = c2 / c3
    b = c1 / c3
    c = c0 / c3
    q = (a * a - 3.0 * b) / 9.0
    r = (2.0 * a ** 3 - 9.0 * a * b + 27.0 * c) / 54.0
    q3 = q ** 3
    if not (r * r < q3):
        raise _NoBand
    theta = np.arccos(r / np.sqrt(q3))
    m = -2.0 * np.sqrt(q)
    shift = a / 3.0
    roots = [m * np.cos((theta + 2.0 * np.pi * k) / 3.0) - shift
             for k in (0, 1, 2)]
    roots.sort()
    return roots


def _band_action(fmag, lo, hi, third):
    # (1/2pi) * int_lo^hi sqrt(fmag (y-lo)(hi-y)|y-third|) / y dy
    y = lo + (hi - lo) * _SIN2
    vals = np.sqrt(np.abs(y - third)) / y
    return (hi - lo) ** 2 * np.sqrt(fmag) / np.pi * np.dot(_QUARTIC, vals)


def _uphill_action(F, W, a1, Im2):
    # confined cubic: roots y0 < y1 < y2, band (y1, y2)
    y0, y1, y2 = _three_real_roots(-F, -2.0 * W, 2.0 * a1, -Im2)
    if y2 <= 0.0 or y1 < -1e-12:
        raise _NoBand
    return _band_action(F, max(y1, 0.0), y2, y0)


def _downhill_action(F, W, a2, Im2):
    # escape cubic: roots u1 < u2 < u3, band (u1, u2), barrier to u3
    u1, u2, u3 = _three_real_roots(F, -2.0 * W, 2.0 * a2, -Im2)
    if u1 < -1e-12 or u2 <= 0.0:
        raise _NoBand
    return _band_action(F, max(u1, 0.0), u2, u3)


def _unpack(x):
    W = np.exp(np.clip(x[0], -600.0, 600.0))
    a1 = 2.0 / (1.0 + np.exp(-np.clip(x[1], -600.0, 600.0)))
    return W, a1


def _pack(W, a1):
    return np.array([np.log(W), np.log(a1 / (2.0 - a1))])


def _solve_actions(F, I1, I2, Im2, seed):
    """Self-consistent (W, a1) at trial F, or None past the fold."""
    flag = {"bad": False}

    def residual(x):
        W, a1 = _unpack(x)
        try:
            r1 = _uphill_action(F, W, a1, Im2) - I1
            r2 = _downhill_action(F, W, 2.0 - a1, Im2) - I2
        except _NoBand:
            flag["bad"] = True
            return np.array([1.0, 1.0])
        return np.array([r1, r2])

    flag["bad"] = False
    sol = optimize.root(residual, _pack(*seed), method="hybr",
                        options={"xtol": 1e-13, "maxfev": 400})
    if flag["bad"]:
        # re-check from the converged point: transient excursions are fine
        flag["bad"] = False
        res = residual(sol.x)
        if flag["bad"] or np.max(np.abs(res)) > 1e-9:
            return None
        return _unpack(sol.x)
    if not sol.success or np.max(np.abs(sol.fun)) > 1e-9:
        return None
    return _unpack(sol.x)


def _solve_collapsed(F, Iother, Im2, seed, side):
    """(W, a1) on a boundary branch where one radial action vanishes.

    side "uphill": the y-band has collapsed to the local maximum of f1
    (I1 = 0); side "downhill": the u-band sits at the local maximum of
    f2 (I2 = 0).  The vanished action condition is replaced by the
    tangency of the cubic at that maximum.
    """
    flag = {"bad": False}

    def residual(x):
        W, a1 = _unpack(x)
        a2 = 2.0 - a1
        try:
            if side == "uphill":
                disc = 4.0 * W * W + 6.0 * a1 * F
                ystar = (-2.0 * W + np.sqrt(disc)) / (3.0 * F)
                r1 = (-F * ystar ** 3 - 2.0 * W * ystar ** 2
                      + 2.0 * a1 * ystar - Im2)
                r2 = _downhill_action(F, W, a2, Im2) - Iother
            else:
                disc = 4.0 * W * W - 6.0 * a2 * F
                if disc < 0.0:
                    raise _NoBand
                ustar = (2.0 * W - np.sqrt(disc)) / (3.0 * F)
                r1 = (F * ustar ** 3 - 2.0 * W * ustar ** 2
                      + 2.0 * a2 * ustar - Im2)
                r2 = _uphill_action(F, W, a1, Im2) - Iother
        except _NoBand:
            flag["bad"] = True
            return np.array([1.0, 1.0])
        return np.array([r1, r2])

    flag["bad"] = False
    sol = optimize.root(residual, _pack(*seed), method="hybr",
                        options={"xtol": 1e-13, "maxfev": 400})
    if flag["bad"]:
        flag["bad"] = False
        res = residual(sol.x)
        if flag["bad"] or np.max(np.abs(res)) > 1e-9:
            return None
        return _unpack(sol.x)
    if not sol.success or np.max(np.abs(sol.fun)) > 1e-9:
        return None
    return _unpack(sol.x)


def _march(solver, seed, fmax, ftol):
    """Largest F at which solver(F, seed) still succeeds.

    Continuation from F = 0 with step halving at failures; the returned
    field is within ftol of the fold.
    """
    f_good = 0.0
    step = 0.02
    state = seed
    while step > ftol:
        f_try = f_good + step
        if f_try > fmax:
            step = fmax - f_good
            if step <= ftol:
                raise NoFoldError("torus survives the whole field range")
            continue
        out = solver(f_try, state)
        if out is None:
            step *= 0.5
        else:
            f_good, state = f_try, out
    if f_good == 0.0:
        raise NoFoldError("no bound torus at any positive field")
    return f_good


def _axis_downhill(F, W):
    # Ie = +1, Im = 0: a1 = 0, all action in the escape coordinate
    return _downhill_action(F, W, 2.0, 0.0)


def _axis_uphill(F, W):
    # Ie = -1, Im = 0: a2 = 0, all action in the confined coordinate
    return _uphill_action(F, W, 2.0, 0.0)


def _fcrit_axis(which, fmax, ftol):
    action = _axis_downhill if which == "down" else _axis_uphill

    def solver(F, seed):
        # the action is monotone decreasing in W on the valid window
        if which == "down":
            wlo = 2.0 * np.sqrt(F) * (1.0 + 1e-12)
        else:
            wlo = 1e-9
        try:
            if action(F, wlo) < 1.0:
                return None
        except _NoBand:
            return None

        def h(W):
            try:
                return action(F, W) - 1.0
            except _NoBand:
                return -1.0

        whi = max(2.0, 2.0 * seed[0])
        while h(whi) > 0.0:
            whi *= 2.0
        W = optimize.brentq(h, wlo, whi, xtol=1e-14)
        return (W, 0.0)

    return _march(solver, (0.5, 0.0), fmax, ftol)


def f_crit(q: CritQuery, *, fmax: float = 0.5, ftol: float = 1e-6) -> float:
    """Critical static field destroying the torus labelled by q."""
    Im = abs(q.Im)
    Im2 = Im * Im
    I1 = 0.5 * (1.0 - q.Ie - Im)
    I2 = 0.5 * (1.0 + q.Ie - Im)
    I1 = max(I1, 0.0)
    I2 = max(I2, 0.0)

    if I2 < 1e-5 and Im < 1e-12:
        return _fcrit_axis("up", fmax, ftol)
    if I1 < 1e-5 and Im < 1e-12:
        return _fcrit_axis("down", fmax, ftol)

    a1_0 = 2.0 * I1 + Im
    if I1 < 1e-5:
        seed = (0.5, max(a1_0, 1e-6))
        return _march(
            lambda F, s: _solve_collapsed(F, I2, Im2, s, "uphill"),
            seed, fmax, ftol)
    if I2 < 1e-5:
        seed = (0.5, min(a1_0, 2.0 - 1e-6))
        return _march(
            lambda F, s: _solve_collapsed(F, I1, Im2, s, "downhill"),
            seed, fmax, ftol)

    return _march(lambda F, s: _solve_actions(F, I1, I2, Im2, s),
                  (0.5, a1_0), fmax, ftol)


class CriticalFieldTable:
    """Cached grid of f_crit over the action diamond |Ie| + |Im| <= 1.

    Rows are monotone cubic interpolants in the stretched coordinate
    s = Ie / (1 - Im), one per Im node, combined by a second monotone
    cubic pass across Im.  Built once; reads are thread-safe.
    """

    def __init__(self, n_ie: int = 50,
                 im_nodes=(0.0, 0.2, 0.4, 0.6, 0.8)):
        self.im_nodes = np.asarray(im_nodes, dtype=float)
        self.s_grid = np.linspace(-1.0, 1.0, n_ie)
        self.values = np.empty((len(self.im_nodes), n_ie))
        self._rows = []
        for i, im in enumerate(self.im_nodes):
            ie = self.s_grid * (1.0 - im)
            self.values[i] = [f_crit(CritQuery(e, im)) for e in ie]
            self._rows.append(
                interpolate.PchipInterpolator(self.s_grid, self.values[i]))

    def value(self, Ie: float, Im: float) -> float:
        im = abs(Im)
        if im >= 1.0:
            raise ValueError("no torus at |Im| = 1 with Ie != 0")
        s = np.clip(Ie / (1.0 - im), -1.0, 1.0)
        col = np.array([row(s) for row in self._rows])
        if len(self._rows) == 1:
            return float(col[0])
        f = interpolate.PchipInterpolator(self.im_nodes, col,
                                          extrapolate=True)
        return float(f(im))

    def self_check(self, n: int = 40, rng=None) -> float:
        """Worst relative interpolation error at off-grid sample points."""
        rng = np.random.default_rng(rng)
        worst = 0.0
        for _ in range(n):
            im = rng.uniform(0.0, self.im_nodes[-1])
            ie = rng.uniform(-0.95, 0.95) * (1.0 - im)
            direct = f_crit(CritQuery(ie, im))
            worst = max(worst, abs(self.value(ie, im) - direct) / direct)
        return worst

    def rows_csv(self):
        """Iterate (Ie, Im, Fcrit) triples of the underlying grid."""
        for i, im in enumerate(self.im_nodes):
            for s, v in zip(self.s_grid, self.values[i]):
                yield s * (1.0 - im), im, v

    def sample_grid(self, ns: int = 401, nim: int = 96,
                    im_max: float = 0.98):
        """Dense regular resampling of the threshold surface.

        Returns (s, im, F) with F[i, j] matching value(s[j]*(1-im[i]),
        im[i]); the regular spacing suits bilinear lookup in compiled
        loops.
        """
        s = np.linspace(-1.0, 1.0, ns)
        im = np.linspace(0.0, im_max, nim)
        per_row = np.array([row(s) for row in self._rows])
        out = np.empty((nim, ns))
        for j in range(ns):
            f = interpolate.PchipInterpolator(self.im_nodes, per_row[:, j],
                                              extrapolate=True)
            out[:, j] = f(im)
        return s, im, out


@lru_cache(maxsize=1)
def default_table() -> CriticalFieldTable:
    return CriticalFieldTable()


def ionisation_criterion(F: float, Ie: float, Im: float,
                         table: CriticalFieldTable | None = None) -> bool:
    """Instantaneous loss criterion for a signed field along the axis.

    A positive field ionises the torus (Ie, Im) above its critical
    field; a negative one acts on the reversed torus (-Ie, -Im).
    """
    if F == 0.0:
        return False
    if table is None:
        table = default_table()
    if F > 0.0:
        return F > table.value(Ie, Im)
    return F < -table.value(-Ie, -Im)


def adiabatic_boundaries(p: ScaledParams, Ie0: float, Im: float) -> Region:
    """Classify an initial torus by the adiabatic survival criteria.

    Certain ionisation when the combined field exceeds the torus
    threshold in either axis direction; certain survival when it cannot
    exceed the threshold for any electric action the torus could drift
    to; otherwise only a resonance can change the outcome.
    """
    fplus = f_crit(CritQuery(Ie0, Im))
    if p.Fs >= p.Fmu:
        if p.Fs > fplus - p.Fmu:
            return Region.IONISED
    else:
        fminus = f_crit(CritQuery(-Ie0, -Im))
        if p.Fs < p.Fmu - fminus or p.Fs > fplus - p.Fmu:
            return Region.IONISED
    fmin = f_crit(CritQuery(1.0 - abs(Im), Im))
    if p.Fs + p.Fmu < fmin and (p.Fs >= p.Fmu or p.Fmu - p.Fs < fmin):
        return Region.BOUND
    return Region.RESONANCE_POSSIBLE


def critical_action(p: ScaledParams, Im: float) -> float:
    """Electric action above which orbits ionise at the field maximum.

    Root of f_crit(Ie, Im) = Fs + Fmu; the critical field decreases
    with Ie, so larger actions are the fragile ones.
    """
    target = p.Fs + p.Fmu
    lo, hi = -1.0 + abs(Im) + 1e-3, 1.0 - abs(Im) - 1e-3

    def h(ie):
        return f_crit(CritQuery(ie, Im)) - target

    hlo, hhi = h(lo), h(hi)
    if hlo <= 0.0 or hhi >= 0.0:
        raise ValueError("field maximum outside the torus threshold range")
    return optimize.brentq(h, lo, hi, xtol=1e-6)


def tunnelling_width_1d(n: int, F: float):
    """Quantal decay rate of a one-dimensional atom below threshold.

    Returns (Gamma, P_b) with P_b(t) = exp(-Gamma t) the bound-state
    survival probability; valid for n > 20 where the fitted shape
    factor c(n) holds.
    """
    if F >= F_CRIT_1D:
        raise ValueError("classical ionisation above the 1d threshold")
    c = 1.0 / (1.0 + 1.65 / n + 173.1 / n ** 2 - 249.5 / n ** 3)
    gamma = np.exp(-2.58 * n * c * (F_CRIT_1D - F) / F_CRIT_1D) / (
        2.0 * np.pi * n ** 3)

    def p_bound(t):
        return np.exp(-gamma * t)

    return gamma, p_bound


def decay_interval_fraction(n: int) -> float:
    """Fractional field interval over which one-Kepler-period survival
    drops from 0.9 to 0.1."""
    c = 1.0 / (1.0 + 1.65 / n + 173.1 / n ** 2 - 249.5 / n ** 3)
    x9 = -np.log(-np.log(0.9))
    x1 = -np.log(-np.log(0.1))
    return (x9 - x1) / (2.58 * n * c)
