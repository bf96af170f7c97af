"""Compiled trajectory kernels.

The Coulomb singularity is removed by the Kustaanheimo-Stiefel map: the
orbit lives in a four-dimensional u-space with r = |u|^2, the physical
axes ordered (z, x, y) so the field couples to the first quadratic
form.  Time is promoted to a coordinate with conjugate momentum p_t and
the flow runs in a fictitious time s with dt/ds = r, which makes every
right-hand side polynomial.  The stepper is an eighth-order adaptive
Runge-Kutta (tableau and error model of DOP853).

State layout: y = (u[4], p_u[4], t, p_t).
Parameters:   pars = (Fs, Fmu, Om0, Ta, Tc, Tb).
"""

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dc

try:
    from numba import njit, prange
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False
    prange = range

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f
        return wrap

_A = np.ascontiguousarray(_dc.A[:12, :12])
_B = np.ascontiguousarray(_dc.B)
_C = np.ascontiguousarray(_dc.C[:12])
_E3 = np.ascontiguousarray(_dc.E3)
_E5 = np.ascontiguousarray(_dc.E5)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0

STATUS_BOUND = 0
STATUS_IONISED = 1
STATUS_FAILED = 2


@njit(cache=True)
def envelope_pair(t, Ta, Tc, Tb):
    """(lambda, dlambda/dt) of the rise/flat/fall pulse shape."""
    T = Ta + Tc + Tb
    if Ta > 0.0 and t < Ta:
        if t <= 0.0:
            return 0.0, 0.0
        x = t / Ta
        return x * x * (2.0 - x * x), 4.0 * x * (1.0 - x * x) / Ta
    if t <= Ta + Tc or Tb == 0.0:
        if t > T:
            return 0.0, 0.0
        return 1.0, 0.0
    if t < T:
        x = (T - t) / Tb
        return x * x * (2.0 - x * x), -4.0 * x * (1.0 - x * x) / Tb
    return 0.0, 0.0


@njit(cache=True)
def field_pair(t, pars):
    """(F, dF/dt) of the enveloped combined field."""
    lam, dlam = envelope_pair(t, pars[3], pars[4], pars[5])
    osc = pars[0] + pars[1] * np.cos(pars[2] * t)
    dosc = -pars[1] * pars[2] * np.sin(pars[2] * t)
    return lam * osc, dlam * osc + lam * dosc


@njit(cache=True)
def _rhs(y, pars, out):
    u0, u1, u2, u3 = y[0], y[1], y[2], y[3]
    r = u0 * u0 + u1 * u1 + u2 * u2 + u3 * u3
    z = u0 * u0 - u1 * u1 - u2 * u2 + u3 * u3
    t = y[8]
    pt = y[9]
    F, Fdot = field_pair(t, pars)

    out[0] = 0.25 * y[4]
    out[1] = 0.25 * y[5]
    out[2] = 0.25 * y[6]
    out[3] = 0.25 * y[7]
    # -d/du [ F r z + pt r ]
    c = 2.0 * (F * z + pt)
    fr = 2.0 * F * r
    out[4] = -(c * u0 + fr * u0)
    out[5] = -(c * u1 - fr * u1)
    out[6] = -(c * u2 - fr * u2)
    out[7] = -(c * u3 + fr * u3)
    out[8] = r
    out[9] = -r * Fdot * z


@njit(cache=True)
def _rk_step(y, h, pars, K, ynew, ytmp):
    """One eighth-order step; K[0] holds f(y) on entry, K[12] f(ynew) on
    exit (reusable as the next K[0])."""
    n = y.shape[0]
    for i in range(1, 12):
        for m in range(n):
            acc = 0.0
            for j in range(i):
                acc += _A[i, j] * K[j, m]
            ytmp[m] = y[m] + h * acc
        _rhs(ytmp, pars, K[i])
    for m in range(n):
        acc = 0.0
        for j in range(12):
            acc += _B[j] * K[j, m]
        ynew[m] = y[m] + h * acc
    _rhs(ynew, pars, K[12])


@njit(cache=True)
def _error_norm(K, h, y, ynew, rtol, atol):
    n = y.shape[0]
    err5_2 = 0.0
    err3_2 = 0.0
    for m in range(n):
        e5 = 0.0
        e3 = 0.0
        for j in range(13):
            e5 += _E5[j] * K[j, m]
            e3 += _E3[j] * K[j, m]
        ay = abs(y[m])
        an = abs(ynew[m])
        scale = atol + (ay if ay > an else an) * rtol
        e5 /= scale
        e3 /= scale
        err5_2 += e5 * e5
        err3_2 += e3 * e3
    if err5_2 == 0.0 and err3_2 == 0.0:
        return 0.0
    denom = err5_2 + 0.01 * err3_2
    return abs(h) * err5_2 / np.sqrt(denom * n)


@njit(cache=True)
def _kepler_energy(y):
    r = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]
    pu2 = y[4] * y[4] + y[5] * y[5] + y[6] * y[6] + y[7] * y[7]
    return 0.125 * pu2 / r - 1.0 / r


@njit(cache=True)
def integrate_kernel(y0, pars, t_end, rtol, atol, rmax, max_steps):
    """Advance to t_end or to the first ionisation trigger.

    Returns (status, t_ion, e_final, y_final).  Ionisation requires the
    orbit outside rmax, moving outward, with positive two-body energy;
    the trigger time is refined by a cubic fit across the step.
    """
    y = y0.copy()
    ynew = np.empty_like(y)
    ytmp = np.empty_like(y)
    K = np.empty((13, y.shape[0]))
    _rhs(y, pars, K[0])

    h = 1e-3
    t_tol = 1e-10 * (1.0 + abs(t_end))
    steps = 0
    rejected = False
    while steps < max_steps:
        if y[8] >= t_end - t_tol:
            # land exactly on t_end with corrective steps (dt/ds = r)
            for _ in range(8):
                dt = t_end - y[8]
                if abs(dt) <= t_tol:
                    break
                r_now = (y[0] * y[0] + y[1] * y[1]
                         + y[2] * y[2] + y[3] * y[3])
                _rk_step(y, dt / r_now, pars, K, ynew, ytmp)
                for m in range(y.shape[0]):
                    y[m] = ynew[m]
                    K[0, m] = K[12, m]
            y[8] = t_end
            return STATUS_BOUND, 0.0, _kepler_energy(y), y

        if h < 1e-14:
            return STATUS_FAILED, 0.0, _kepler_energy(y), y

        _rk_step(y, h, pars, K, ynew, ytmp)
        steps += 1
        err = _error_norm(K, h, y, ynew, rtol, atol)
        if err >= 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-0.125))
            rejected = True
            continue

        h_used = h
        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * err ** (-0.125))
        if rejected:
            factor = min(1.0, factor)
        rejected = False
        h *= factor

        # ionisation test on the accepted step
        r_new = (ynew[0] * ynew[0] + ynew[1] * ynew[1]
                 + ynew[2] * ynew[2] + ynew[3] * ynew[3])
        udotpu = (ynew[0] * ynew[4] + ynew[1] * ynew[5]
                  + ynew[2] * ynew[6] + ynew[3] * ynew[7])
        ek = _kepler_energy(ynew)
        if r_new > rmax and udotpu > 0.0 and ek > 0.0:
            # cubic Hermite crossing of r(s) = rmax inside the step
            r0 = (y[0] * y[0] + y[1] * y[1]
                  + y[2] * y[2] + y[3] * y[3])
            dr0 = 0.5 * (y[0] * y[4] + y[1] * y[5]
                         + y[2] * y[6] + y[3] * y[7]) * h_used
            dr1 = 0.5 * udotpu * h_used
            lo = 0.0
            hi = 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                h00 = (1.0 + 2.0 * mid) * (1.0 - mid) ** 2
                h10 = mid * (1.0 - mid) ** 2
                h01 = mid * mid * (3.0 - 2.0 * mid)
                h11 = mid * mid * (mid - 1.0)
                rmid = h00 * r0 + h10 * dr0 + h01 * r_new + h11 * dr1
                if rmid > rmax:
                    hi = mid
                else:
                    lo = mid
            x = 0.5 * (lo + hi)
            # t(s) interpolated the same way (dt/ds = r)
            h00 = (1.0 + 2.0 * x) * (1.0 - x) ** 2
            h10 = x * (1.0 - x) ** 2
            h01 = x * x * (3.0 - 2.0 * x)
            h11 = x * x * (x - 1.0)
            t_ion = (h00 * y[8] + h10 * r0 * h_used + h01 * ynew[8]
                     + h11 * r_new * h_used)
            if t_ion <= t_end:
                return STATUS_IONISED, t_ion, ek, ynew

        for m in range(y.shape[0]):
            y[m] = ynew[m]
            K[0, m] = K[12, m]

    return STATUS_FAILED, 0.0, _kepler_energy(y), y


@njit(cache=True)
def trace_kernel(y0, pars, t_samples, rtol, atol, rmax, max_steps, out):
    """States at the requested times; out has shape (len(t_samples), 10).

    Stops early on ionisation; returns the number of rows filled.
    """
    y = y0.copy()
    filled = 0
    for i in range(t_samples.shape[0]):
        status, _, _, yf = integrate_kernel(
            y, pars, t_samples[i], rtol, atol, rmax, max_steps)
        if status == STATUS_FAILED:
            break
        for m in range(10):
            out[i, m] = yf[m]
        y = yf
        filled = i + 1
        if status == STATUS_IONISED:
            break
    return filled


@njit(cache=True, parallel=True)
def batch_kernel(y0s, pars, t_end, rtol, atol, rmax, max_steps,
                 status, t_ion, e_final):
    for i in prange(y0s.shape[0]):
        s, ti, ef, _ = integrate_kernel(
            y0s[i], pars, t_end, rtol, atol, rmax, max_steps)
        status[i] = s
        t_ion[i] = ti
        e_final[i] = ef


@njit(cache=True)
def ks_position(y, q):
    """Physical (x, y, z) from a kernel state."""
    u0, u1, u2, u3 = y[0], y[1], y[2], y[3]
    q[2] = u0 * u0 - u1 * u1 - u2 * u2 + u3 * u3
    q[0] = 2.0 * (u0 * u1 - u2 * u3)
    q[1] = 2.0 * (u0 * u2 + u1 * u3)


@njit(cache=True)
def ks_momentum(y, p):
    """Physical (px, py, pz) from a kernel state."""
    u0, u1, u2, u3 = y[0], y[1], y[2], y[3]
    p0, p1, p2, p3 = y[4], y[5], y[6], y[7]
    r = u0 * u0 + u1 * u1 + u2 * u2 + u3 * u3
    pz = (u0 * p0 - u1 * p1 - u2 * p2 + u3 * p3) / (2.0 * r)
    px = (u1 * p0 + u0 * p1 - u3 * p2 - u2 * p3) / (2.0 * r)
    py = (u2 * p0 + u3 * p1 + u0 * p2 + u1 * p3) / (2.0 * r)
    p[0] = px
    p[1] = py
    p[2] = pz


# ---------------------------------------------------------------------------
# Averaged-tier kernel: state y = (I1, I2, psi, chi, t), running in the
# rescaled time tau with dt/dtau = J.

_AD_SIG_FLOOR = 1e-12


@njit(cache=True)
def _ad_rhs(y, pars, im, order, out):
    I1, I2, psi, chi, t = y[0], y[1], y[2], y[3], y[4]
    In = I1 + I2 + im
    s1 = np.sqrt(max(I1 * (I1 + im), 0.0)) / In
    s2 = np.sqrt(max(I2 * (I2 + im), 0.0)) / In
    sp, cp = np.sin(psi), np.cos(psi)
    sc, cc = np.sin(chi), np.cos(chi)
    F, Fdot = field_pair(t, pars)
    kappa = 0.5 * In ** 4

    u1 = 3.0 * I2 + I1 + 2.0 * im
    u2 = 3.0 * I1 + I2 + 2.0 * im
    c2p = 2.0 * cp * cp - 1.0
    c2c = 2.0 * cc * cc - 1.0
    Gpsi = u1 * s1 * cp - In * s1 * s1 * c2p
    Gchi = -u2 * s2 * cc + In * s2 * s2 * c2c

    out[0] = -In * kappa * Fdot * ((1.0 - s2 * cc) * Gpsi + s1 * cp * Gchi)
    out[1] = -In * kappa * Fdot * (s2 * cc * Gpsi + (1.0 - s1 * cp) * Gchi)

    Ie = I2 - I1
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
    K1 = dE_dn - dE_de
    K2 = dE_dn + dE_de

    if Fdot != 0.0:
        s2p = 2.0 * sp * cp
        s2c = 2.0 * sc * cc
        G = (u1 * s1 * sp - u2 * s2 * sc
             - 0.5 * In * (s1 * s1 * s2p - s2 * s2 * s2c))
        sf1 = s1 if s1 > _AD_SIG_FLOOR else _AD_SIG_FLOOR
        sf2 = s2 if s2 > _AD_SIG_FLOOR else _AD_SIG_FLOOR
        d1e = (2.0 * I1 + im) / (2.0 * sf1 * In * In)
        d2e = (2.0 * I2 + im) / (2.0 * sf2 * In * In)
        ds1_d1 = d1e - s1 / In
        ds1_d2 = -s1 / In
        ds2_d1 = -s2 / In
        ds2_d2 = d2e - s2 / In
        common = -0.5 * (s1 * s1 * s2p - s2 * s2 * s2c)
        dG_d1 = (s1 * sp + u1 * ds1_d1 * sp - 3.0 * s2 * sc
                 - u2 * ds2_d1 * sc + common
                 - In * (s1 * ds1_d1 * s2p - s2 * ds2_d1 * s2c))
        dG_d2 = (3.0 * s1 * sp + u1 * ds1_d2 * sp - s2 * sc
                 - u2 * ds2_d2 * sc + common
                 - In * (s1 * ds1_d2 * s2p - s2 * ds2_d2 * s2c))
        dk = 2.0 * In ** 3
        K1 += Fdot * (dk * G + kappa * dG_d1)
        K2 += Fdot * (dk * G + kappa * dG_d2)
        a1 = (2.0 * I1 + im) / (2.0 * sf1 * In)
        a2 = (2.0 * I2 + im) / (2.0 * sf2 * In)
        cross = kappa * Fdot * (a1 * sp - a2 * sc)
    else:
        cross = 0.0

    out[2] = In * K1 + In * s2 * cc * (K2 - K1) + cross * Gchi
    out[3] = In * K2 + In * s1 * cp * (K1 - K2) - cross * Gpsi
    out[4] = In * (1.0 - s1 * cp - s2 * cc)


@njit(cache=True)
def _ad_rk_step(y, h, pars, im, order, K, ynew, ytmp):
    n = y.shape[0]
    for i in range(1, 12):
        for m in range(n):
            acc = 0.0
            for j in range(i):
                acc += _A[i, j] * K[j, m]
            ytmp[m] = y[m] + h * acc
        _ad_rhs(ytmp, pars, im, order, K[i])
    for m in range(n):
        acc = 0.0
        for j in range(12):
            acc += _B[j] * K[j, m]
        ynew[m] = y[m] + h * acc
    _ad_rhs(ynew, pars, im, order, K[12])


@njit(cache=True)
def _bilinear(x, y, xg, yg, z):
    """Clamped bilinear lookup on a regular grid; z has shape (ny, nx)."""
    nx, ny = xg.shape[0], yg.shape[0]
    if x <= xg[0]:
        jx, fx = 0, 0.0
    elif x >= xg[nx - 1]:
        jx, fx = nx - 2, 1.0
    else:
        jx = np.searchsorted(xg, x) - 1
        fx = (x - xg[jx]) / (xg[jx + 1] - xg[jx])
    if y <= yg[0]:
        jy, fy = 0, 0.0
    elif y >= yg[ny - 1]:
        jy, fy = ny - 2, 1.0
    else:
        jy = np.searchsorted(yg, y) - 1
        fy = (y - yg[jy]) / (yg[jy + 1] - yg[jy])
    z00 = z[jy, jx]
    z01 = z[jy, jx + 1]
    z10 = z[jy + 1, jx]
    z11 = z[jy + 1, jx + 1]
    return ((1.0 - fy) * ((1.0 - fx) * z00 + fx * z01)
            + fy * ((1.0 - fx) * z10 + fx * z11))


@njit(cache=True)
def _ad_flagged(F, Ie, In, im, s_ref, im_ref, surf):
    """Critical-field test against the resampled threshold surface."""
    if F == 0.0:
        return False
    den = In - im
    s = Ie / den if den > 1e-12 else 0.0
    if F < 0.0:
        s = -s
    th = _bilinear(s, im / In, s_ref, im_ref, surf)
    return abs(F) * In ** 4 > th


@njit(cache=True)
def adiabatic_kernel(y0, pars, im, order, t_end, rtol, atol,
                     s_ref, im_ref, surf, max_steps):
    """Advance the averaged equations to t_end or first criterion hit.

    Returns (status, t_ion, y_final, steps); t_ion is the physical time
    of the accepted step on which the torus first failed to exist.
    """
    y = y0.copy()
    ynew = np.empty_like(y)
    ytmp = np.empty_like(y)
    K = np.empty((13, y.shape[0]))
    _ad_rhs(y, pars, im, order, K[0])

    h = 1e-2
    t_tol = 1e-10 * (1.0 + abs(t_end))
    steps = 0
    rejected = False
    while steps < max_steps:
        if y[4] >= t_end - t_tol:
            for _ in range(8):
                dt = t_end - y[4]
                if abs(dt) <= t_tol:
                    break
                J = y[0] + y[1] + im
                J *= (1.0 - np.sqrt(max(y[0] * (y[0] + im), 0.0)) / (y[0] + y[1] + im) * np.cos(y[2])
                      - np.sqrt(max(y[1] * (y[1] + im), 0.0)) / (y[0] + y[1] + im) * np.cos(y[3]))
                if J <= 0.0:
                    break
                _ad_rk_step(y, dt / J, pars, im, order, K, ynew, ytmp)
                for m in range(y.shape[0]):
                    y[m] = ynew[m]
                    K[0, m] = K[12, m]
            y[4] = t_end
            F, _ = field_pair(t_end, pars)
            if _ad_flagged(F, y[1] - y[0], y[0] + y[1] + im, im,
                           s_ref, im_ref, surf):
                return STATUS_IONISED, t_end, y, steps
            return STATUS_BOUND, 0.0, y, steps

        if h < 1e-14:
            return STATUS_FAILED, 0.0, y, steps

        _ad_rk_step(y, h, pars, im, order, K, ynew, ytmp)
        steps += 1
        err = _error_norm(K, h, y, ynew, rtol, atol)
        if err >= 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-0.125))
            rejected = True
            continue

        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * err ** (-0.125))
        if rejected:
            factor = min(1.0, factor)
        rejected = False
        h *= factor

        for m in range(y.shape[0]):
            y[m] = ynew[m]
            K[0, m] = K[12, m]

        F, _ = field_pair(y[4], pars)
        if _ad_flagged(F, y[1] - y[0], y[0] + y[1] + im, im,
                       s_ref, im_ref, surf):
            return STATUS_IONISED, y[4], y, steps

    return STATUS_FAILED, 0.0, y, steps


@njit(cache=True, parallel=True)
def adiabatic_batch_kernel(y0s, pars, ims, order, t_end, rtol, atol,
                           s_ref, im_ref, surf, max_steps, status, t_ion,
                           finals):
    for i in prange(y0s.shape[0]):
        s, ti, yf, _ = adiabatic_kernel(
            y0s[i], pars, ims[i], order, t_end, rtol, atol,
            s_ref, im_ref, surf, max_steps)
        status[i] = s
        t_ion[i] = ti
        for m in range(5):
            finals[i, m] = yf[m]


# ---------------------------------------------------------------------------
# Sphere-tier kernel: state y = (Z1, Z2, Z3, gamma, t); gamma is the
# accumulated co-rotating-frame phase.


@njit(cache=True)
def _z_rhs_c(y, pars, In, im, order, gcoef, out):
    Z1, Z2, Z3, gam, t = y[0], y[1], y[2], y[3], y[4]
    F, Fdot = field_pair(t, pars)
    kappa = 0.5 * In ** 3

    enl = 0.0
    if order >= 2:
        enl += 0.375 * In ** 4 * Z3 * F * F
    if order >= 3:
        enl += (9.0 / 32.0) * In ** 7 * Z3 * Z3 * F ** 3

    a2 = (In + im) ** 2 - Z3 * Z3
    A = np.sqrt(a2) if a2 > 0.0 else 0.0
    dA = -Z3 / A if A > 0.0 else 0.0
    cg, sg = np.cos(gam), np.sin(gam)
    mix = Z2 * cg - Z1 * sg
    kf = kappa * Fdot

    out[0] = -2.0 * Z2 * enl + kf * (A * Z3 * cg - dA * Z2 * mix)
    out[1] = 2.0 * Z1 * enl + kf * (A * Z3 * sg + dA * Z1 * mix)
    out[2] = -kf * A * (Z1 * cg + Z2 * sg)
    acc = 0.0
    f2 = F * F
    for i in range(gcoef.shape[0] - 1, -1, -1):
        acc = acc * f2 + gcoef[i]
    out[3] = 3.0 * In * acc * F
    out[4] = 1.0


@njit(cache=True)
def _z_rk_step(y, h, pars, In, im, order, gcoef, K, ynew, ytmp):
    n = y.shape[0]
    for i in range(1, 12):
        for m in range(n):
            acc = 0.0
            for j in range(i):
                acc += _A[i, j] * K[j, m]
            ytmp[m] = y[m] + h * acc
        _z_rhs_c(ytmp, pars, In, im, order, gcoef, K[i])
    for m in range(n):
        acc = 0.0
        for j in range(12):
            acc += _B[j] * K[j, m]
        ynew[m] = y[m] + h * acc
    _z_rhs_c(ynew, pars, In, im, order, gcoef, K[12])


@njit(cache=True)
def meanmotion_kernel(y0, pars, In, im, order, gcoef, t_end, rtol, atol,
                      s_ref, im_ref, surf, max_steps):
    y = y0.copy()
    ynew = np.empty_like(y)
    ytmp = np.empty_like(y)
    K = np.empty((13, y.shape[0]))
    _z_rhs_c(y, pars, In, im, order, gcoef, K[0])
    r0 = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])

    h = 1e-2
    t_tol = 1e-10 * (1.0 + abs(t_end))
    steps = 0
    rejected = False
    while steps < max_steps:
        if y[4] >= t_end - t_tol:
            for _ in range(8):
                dt = t_end - y[4]
                if abs(dt) <= t_tol:
                    break
                _z_rk_step(y, dt, pars, In, im, order, gcoef, K, ynew, ytmp)
                for m in range(y.shape[0]):
                    y[m] = ynew[m]
                    K[0, m] = K[12, m]
            y[4] = t_end
            F, _ = field_pair(t_end, pars)
            if _ad_flagged(F, y[2], In, im, s_ref, im_ref, surf):
                return STATUS_IONISED, t_end, y, steps
            return STATUS_BOUND, 0.0, y, steps

        if h < 1e-14:
            return STATUS_FAILED, 0.0, y, steps
        if y[4] + h > t_end:
            h = t_end - y[4]

        _z_rk_step(y, h, pars, In, im, order, gcoef, K, ynew, ytmp)
        steps += 1
        err = _error_norm(K, h, y, ynew, rtol, atol)
        if err >= 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-0.125))
            rejected = True
            continue

        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * err ** (-0.125))
        if rejected:
            factor = min(1.0, factor)
        rejected = False
        h *= factor

        for m in range(y.shape[0]):
            y[m] = ynew[m]
        # project back onto the invariant sphere; refresh the reused stage
        r = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
        if r > 0.0 and r0 > 0.0:
            fac = r0 / r
            y[0] *= fac
            y[1] *= fac
            y[2] *= fac
            _z_rhs_c(y, pars, In, im, order, gcoef, K[0])
        else:
            for m in range(y.shape[0]):
                K[0, m] = K[12, m]

        F, _ = field_pair(y[4], pars)
        if _ad_flagged(F, y[2], In, im, s_ref, im_ref, surf):
            return STATUS_IONISED, y[4], y, steps

    return STATUS_FAILED, 0.0, y, steps


@njit(cache=True, parallel=True)
def meanmotion_batch_kernel(y0s, pars, In, ims, order, gcoefs, t_end,
                            rtol, atol, s_ref, im_ref, surf, max_steps,
                            status, t_ion, finals):
    for i in prange(y0s.shape[0]):
        s, ti, yf, _ = meanmotion_kernel(
            y0s[i], pars, In, ims[i], order, gcoefs[i], t_end, rtol, atol,
            s_ref, im_ref, surf, max_steps)
        status[i] = s
        t_ion[i] = ti
        for m in range(5):
            finals[i, m] = yf[m]
