"""Exact trajectory tier: three-dimensional orbits of the driven atom.

Initial conditions are generated on a field-free torus from its angle
variables, lifted to the regularised u-space, and advanced by the
compiled kernels.  All quantities are in scaled units (I_n = 1 maps to
unit semi-major axis and Kepler energy -1/2).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .series import Actions
from .units import Envelope, ScaledParams

__all__ = [
    "R_MAX", "TrajectoryState", "OrbitOutcome", "initial_state",
    "integrate", "trace", "ks_lift", "ks_project", "kepler_invariants",
    "actions_from_state", "pulse_pars",
]

R_MAX = 2000.0
MAX_STEPS = 50_000_000


@dataclass
class TrajectoryState:
    """Cartesian phase-space point; the field axis is z."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0
    s: float = 0.0


@dataclass
class OrbitOutcome:
    ionised: bool
    t_ion: float | None
    final_energy: float
    failed: bool = False


def initial_state(a: Actions, angles) -> TrajectoryState:
    """Phase-space point of the field-free torus at the given angles.

    The torus is parametrised by the two auxiliary angles of the
    separated motion and the azimuth: the squared parabolic radii
    oscillate harmonically in them between the quadratic turning
    points, and the radial momenta follow from the separated
    Hamilton-Jacobi integrands.
    """
    psi, chi, phi = angles
    In, Ie, Im = a.In, a.Ie, a.Im
    ima = abs(Im)
    I1 = 0.5 * (In - Ie - ima)
    I2 = 0.5 * (In + Ie - ima)
    if I1 < -1e-12 or I2 < -1e-12:
        raise ValueError("actions violate |Ie| + |Im| <= In")
    W = 0.5 / In ** 2
    a1 = (2.0 * max(I1, 0.0) + ima) / In
    a2 = (2.0 * max(I2, 0.0) + ima) / In

    def band(alpha):
        d = np.sqrt(max(alpha * alpha - 2.0 * W * Im * Im, 0.0))
        return (alpha - d) / (2.0 * W), (alpha + d) / (2.0 * W)

    y1, y2 = band(a1)
    u1, u2 = band(a2)
    ysq = 0.5 * (y2 + y1) - 0.5 * (y2 - y1) * np.cos(psi)
    usq = 0.5 * (u2 + u1) - 0.5 * (u2 - u1) * np.cos(chi)
    xi = np.sqrt(ysq)
    eta = np.sqrt(usq)

    def radial_momentum(rho2, alpha, ang):
        # sqrt(f)/rho with f = -2W rho^4 + 2 alpha rho^2 - Im^2
        if Im == 0.0:
            val = 2.0 * alpha - 2.0 * W * rho2
        else:
            val = -2.0 * W * rho2 + 2.0 * alpha - Im * Im / rho2
        return np.sign(np.sin(ang)) * np.sqrt(max(val, 0.0))

    pxi = radial_momentum(ysq, a1, psi)
    peta = radial_momentum(usq, a2, chi)

    rho = xi * eta
    denom = ysq + usq
    pz = (xi * pxi - eta * peta) / denom
    prho = (eta * pxi + xi * peta) / denom
    cphi, sphi = np.cos(phi), np.sin(phi)
    if Im == 0.0:
        px = prho * cphi
        py = prho * sphi
    else:
        px = prho * cphi - Im * sphi / rho
        py = prho * sphi + Im * cphi / rho
    q = np.array([rho * cphi, rho * sphi, 0.5 * (ysq - usq)])
    p = np.array([px, py, pz])
    return TrajectoryState(q=q, p=p, t=0.0, s=0.0)


def kepler_invariants(q, p):
    """(energy, L_z, A_z): two-body energy, axial angular momentum and
    the axial component of the eccentricity vector."""
    r = float(np.linalg.norm(q))
    energy = 0.5 * float(p @ p) - 1.0 / r
    L = np.cross(q, p)
    A = np.cross(p, L) - q / r
    return energy, float(L[2]), float(A[2])


def actions_from_state(q, p) -> Actions:
    """Recover (In, Ie, Im) from a bound Cartesian state."""
    energy, lz, az = kepler_invariants(q, p)
    if energy >= 0.0:
        raise ValueError("state is unbound")
    In = 1.0 / np.sqrt(-2.0 * energy)
    return Actions(In=In, Ie=In * az, Im=lz)


def pulse_pars(p: ScaledParams, env: Envelope) -> np.ndarray:
    ta, tc, tb = env.durations(p)
    return np.array([p.Fs, p.Fmu, p.Om0, ta, tc, tb])


def ks_lift(state: TrajectoryState, pars: np.ndarray) -> np.ndarray:
    """Kernel state (u, p_u, t, p_t) from a Cartesian state."""
    x, yy, z = state.q
    px, py, pz = state.p
    r = float(np.linalg.norm(state.q))
    u = np.empty(4)
    if z >= 0.0:
        u[0] = np.sqrt(0.5 * (r + z))
        u[3] = 0.0
        u[1] = 0.5 * x / u[0]
        u[2] = 0.5 * yy / u[0]
    else:
        u[1] = np.sqrt(0.5 * (r - z))
        u[2] = 0.0
        u[0] = 0.5 * x / u[1]
        u[3] = 0.5 * yy / u[1]
    pu = np.array([
        2.0 * (u[0] * pz + u[1] * px + u[2] * py),
        2.0 * (-u[1] * pz + u[0] * px + u[3] * py),
        2.0 * (-u[2] * pz - u[3] * px + u[0] * py),
        2.0 * (u[3] * pz - u[2] * px + u[1] * py),
    ])
    F, _ = kern.field_pair(state.t, pars)
    H = 0.5 * (px * px + py * py + pz * pz) - 1.0 / r + F * z
    y = np.empty(10)
    y[:4] = u
    y[4:8] = pu
    y[8] = state.t
    y[9] = -H
    return y


def ks_project(y: np.ndarray) -> TrajectoryState:
    """Cartesian state from a kernel state."""
    q = np.empty(3)
    p = np.empty(3)
    kern.ks_position(y, q)
    kern.ks_momentum(y, p)
    return TrajectoryState(q=q, p=p, t=float(y[8]), s=0.0)


def integrate(state: TrajectoryState, p: ScaledParams, env: Envelope,
              tol: float = 1e-10, rmax: float = R_MAX,
              max_steps: int = MAX_STEPS) -> OrbitOutcome:
    """Run one orbit through the pulse and report its fate.

    An orbit counts as ionised if it crossed the escape sphere moving
    outward with positive two-body energy, or if that energy is
    positive when the pulse ends.
    """
    pars = pulse_pars(p, env)
    t_end = float(pars[3] + pars[4] + pars[5])
    y0 = ks_lift(state, pars)
    status, t_ion, e_final, _ = kern.integrate_kernel(
        y0, pars, t_end, tol, tol, rmax, max_steps)
    if status == kern.STATUS_FAILED:
        return OrbitOutcome(ionised=False, t_ion=None,
                            final_energy=e_final, failed=True)
    if status == kern.STATUS_IONISED:
        return OrbitOutcome(ionised=True, t_ion=t_ion, final_energy=e_final)
    return OrbitOutcome(ionised=e_final > 0.0,
                        t_ion=t_end if e_final > 0.0 else None,
                        final_energy=e_final)


def trace(state: TrajectoryState, p: ScaledParams, env: Envelope,
          times, tol: float = 1e-10, rmax: float = R_MAX,
          max_steps: int = MAX_STEPS):
    """States at the requested times (stops early if the orbit escapes)."""
    pars = pulse_pars(p, env)
    y0 = ks_lift(state, pars)
    ts = np.asarray(times, dtype=float)
    out = np.empty((len(ts), 10))
    filled = kern.trace_kernel(y0, pars, ts, tol, tol, rmax, max_steps, out)
    return [ks_project(out[i]) for i in range(filled)]
