"""Monte-Carlo harness over torus initial conditions.

Orbits start on the field-free torus In = 1 with angles drawn uniformly
and, in microcanonical mode, (I_e, I_m) drawn uniformly over the diamond
|I_e| + |I_m| <= 1 (the energy-shell measure: the two conserved vector
halves are independently uniform on spheres, making their z components,
and hence I_m +- I_e, independently uniform).

Sampling is stratified: every variable's range is split into equally
probable intervals holding one uniform draw each.  The action pair uses
an n1 x n2 grid of equal-probability cells (square when N permits); the
angles use N strata shuffled independently so each orbit lands in one
cell per variable.  All draws come from counter-based generator streams
keyed by (seed, orbit index), so samples are bit-stable and independent
of any execution order.

The ionisation summary of a run is (Pi, sigma, Th): the ionised
fraction, its binomial error, and the time, in field periods and binned
at 1/32 of a period, at which the running ionised count reaches half
its final value.  Scans over the static field reuse one sample across
grid points, locate statistically significant local maxima, and measure
resonance widths between the flanking zero-probability points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .adiabatic import (AdiabaticState, _fcrit_surface_default,
                        integrate_adiabatic)
from .exact import (MAX_STEPS, R_MAX, initial_state, integrate, ks_lift,
                    pulse_pars)
from .meanmotion import integrate_z, phase_coeffs, ze_map
from .series import Actions
from .units import Envelope, ScaledParams

_MASK64 = (1 << 64) - 1

_TIERS = ("exact", "adiabatic", "mean-motion")
_MODES = ("microcanonical", "substate")


@dataclass(frozen=True)
class EnsembleSpec:
    """Which orbits to run and how to draw them."""

    N: int
    mode: str = "microcanonical"
    Ie: float | None = None
    Im: float | None = None
    tier: str = "exact"
    seed: int = 0
    stratified: bool = True
    order: int = 2
    tol: float = 1e-10

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("ensemble needs at least one orbit")
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.tier not in _TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.mode == "substate":
            if self.Ie is None or self.Im is None:
                raise ValueError("substate mode fixes (Ie, Im)")
            if abs(self.Ie) + abs(self.Im) > 1.0 + 1e-12:
                raise ValueError("substate violates |Ie| + |Im| <= 1")


@dataclass(frozen=True)
class IonisationResult:
    Pi: float
    sigma: float
    Th: float
    ionised: int
    completed: int
    excluded: int


@dataclass(frozen=True)
class WidthRecord:
    """One resonance of a scan: peak and flanking zero-Pi points."""

    Fs_peak: float
    Pi_peak: float
    left_zero: float
    right_zero: float

    @property
    def width(self) -> float:
        return self.right_zero - self.left_zero


@dataclass(frozen=True)
class IonisationCurve:
    Fs_grid: np.ndarray
    Pi: np.ndarray
    sigma: np.ndarray
    Th: np.ndarray
    maxima: tuple = ()
    widths: tuple = ()
    excluded: np.ndarray = field(default_factory=lambda: np.array([]))


# ---------------------------------------------------------------------------
# Sampling


def _orbit_stream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _shuffle_stream(seed: int, purpose: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, ((1 << 63) + purpose) & _MASK64],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def stratification_dims(N: int) -> tuple[int, int]:
    """Equal-probability cell grid for the action pair; square if possible."""
    n1 = max(d for d in range(1, int(math.isqrt(N)) + 1) if N % d == 0)
    return n1, N // n1


def _triangular_inverse(u: np.ndarray) -> np.ndarray:
    # density (1 - |x|) on [-1, 1]
    lo = u < 0.5
    out = np.empty_like(u)
    out[lo] = np.sqrt(2.0 * u[lo]) - 1.0
    out[~lo] = 1.0 - np.sqrt(2.0 * (1.0 - u[~lo]))
    return out


def sample(spec: EnsembleSpec) -> np.ndarray:
    """Initial conditions, one row (Ie, Im, psi, chi, phi) per orbit."""
    N = spec.N
    u = np.empty((N, 5))
    for i in range(N):
        u[i] = _orbit_stream(spec.seed, i).random(5)

    if spec.stratified:
        n1, n2 = stratification_dims(N)
        cells = np.arange(N)
        u[:, 0] = (cells // n2 + u[:, 0]) / n1
        u[:, 1] = (cells % n2 + u[:, 1]) / n2
        for j in range(2, 5):
            perm = _shuffle_stream(spec.seed, j).permutation(N)
            u[:, j] = (perm + u[:, j]) / N

    out = np.empty((N, 5))
    if spec.mode == "substate":
        out[:, 0] = spec.Ie
        out[:, 1] = spec.Im
    else:
        out[:, 1] = _triangular_inverse(u[:, 0])
        out[:, 0] = (2.0 * u[:, 1] - 1.0) * (1.0 - np.abs(out[:, 1]))
    out[:, 2:] = 2.0 * np.pi * u[:, 2:]
    return out


# ---------------------------------------------------------------------------
# Tier runners: initial-condition table -> (status, t_ion) arrays


def _run_exact(rows, spec, p, env):
    pars = pulse_pars(p, env)
    t_end = env.total(p)
    y0s = np.empty((len(rows), 10))
    for i, (ie, im, psi, chi, phi) in enumerate(rows):
        st = initial_state(Actions(In=1.0, Ie=ie, Im=im), (psi, chi, phi))
        y0s[i] = ks_lift(st, pars)
    status = np.empty(len(rows), np.int64)
    t_ion = np.empty(len(rows))
    e_final = np.empty(len(rows))
    if _kernels.NUMBA_AVAILABLE:
        _kernels.batch_kernel(y0s, pars, t_end, spec.tol, spec.tol,
                              R_MAX, MAX_STEPS, status, t_ion, e_final)
    else:
        for i, (ie, im, psi, chi, phi) in enumerate(rows):
            st = initial_state(Actions(In=1.0, Ie=ie, Im=im),
                               (psi, chi, phi))
            out = integrate(st, p, env, tol=spec.tol)
            status[i] = (_kernels.STATUS_FAILED if out.failed
                         else _kernels.STATUS_IONISED if out.ionised
                         else _kernels.STATUS_BOUND)
            t_ion[i] = out.t_ion if out.ionised else 0.0
    return status, t_ion


def _run_adiabatic(rows, spec, p, env):
    t_end = env.total(p)
    n = len(rows)
    status = np.empty(n, np.int64)
    t_ion = np.empty(n)
    if _kernels.NUMBA_AVAILABLE:
        s_ref, im_ref, surf = _fcrit_surface_default()
        pars = np.array([p.Fs, p.Fmu, p.Om0, *env.durations(p)])
        y0s = np.empty((n, 5))
        ims = np.empty(n)
        for i, (ie, im, psi, chi, _) in enumerate(rows):
            ima = abs(im)
            y0s[i] = (0.5 * (1.0 - ie - ima), 0.5 * (1.0 + ie - ima),
                      psi, chi, 0.0)
            ims[i] = ima
        finals = np.empty((n, 5))
        _kernels.adiabatic_batch_kernel(
            y0s, pars, ims, spec.order, t_end, spec.tol, spec.tol,
            s_ref, im_ref, surf, 10_000_000, status, t_ion, finals)
    else:
        for i, (ie, im, psi, chi, _) in enumerate(rows):
            st = AdiabaticState.from_actions(Actions(In=1.0, Ie=ie, Im=im),
                                             psi, chi)
            out = integrate_adiabatic(st, p, env, order=spec.order,
                                      rtol=spec.tol, atol=spec.tol)
            status[i] = (_kernels.STATUS_FAILED if out.failed
                         else _kernels.STATUS_IONISED if out.ionised
                         else _kernels.STATUS_BOUND)
            t_ion[i] = out.t_ion if out.ionised else 0.0
    return status, t_ion


def _phase_coeff_rows(ims: np.ndarray, K: int = 11) -> np.ndarray:
    """phase_coeffs for many Im at once.

    Each coefficient is a polynomial of known degree in Im^2, so values
    at a few nodes extend exactly to the whole range.
    """
    nc = (K + 1) // 2
    nodes = np.linspace(0.0, 0.9, nc)
    base = np.array([phase_coeffs(1.0, float(v), K) for v in nodes])
    V = np.vander(nodes ** 2, nc, increasing=True)
    poly = np.linalg.solve(V, base)            # (nc, nc): power -> coeff
    X = np.vander(ims ** 2, nc, increasing=True)
    return X @ poly


def _run_meanmotion(rows, spec, p, env):
    t_end = env.total(p)
    n = len(rows)
    status = np.empty(n, np.int64)
    t_ion = np.empty(n)
    if _kernels.NUMBA_AVAILABLE:
        s_ref, im_ref, surf = _fcrit_surface_default()
        pars = np.array([p.Fs, p.Fmu, p.Om0, *env.durations(p)])
        ims = np.abs(rows[:, 1])
        gcoefs = _phase_coeff_rows(ims)
        y0s = np.empty((n, 5))
        for i, (ie, im, psi, chi, _) in enumerate(rows):
            z = ze_map(ie, 0.5 * (chi - psi), Actions(In=1.0, Ie=ie, Im=im))
            y0s[i] = (z.Z1, z.Z2, z.Z3, 0.0, 0.0)
        finals = np.empty((n, 5))
        _kernels.meanmotion_batch_kernel(
            y0s, pars, 1.0, ims, spec.order, gcoefs, t_end,
            spec.tol, spec.tol, s_ref, im_ref, surf,
            10_000_000, status, t_ion, finals)
    else:
        for i, (ie, im, psi, chi, _) in enumerate(rows):
            a = Actions(In=1.0, Ie=ie, Im=im)
            out = integrate_z(ze_map(ie, 0.5 * (chi - psi), a), p, env, a,
                              order=spec.order, rtol=spec.tol,
                              atol=spec.tol)
            status[i] = (_kernels.STATUS_FAILED if out.failed
                         else _kernels.STATUS_IONISED if out.ionised
                         else _kernels.STATUS_BOUND)
            t_ion[i] = out.t_ion if out.ionised else 0.0
    return status, t_ion


_RUNNERS = {"exact": _run_exact, "adiabatic": _run_adiabatic,
            "mean-motion": _run_meanmotion}


# ---------------------------------------------------------------------------
# Summaries


def _half_time(t_ion: np.ndarray, p: ScaledParams) -> float:
    """Field periods until half the final ionised count, 1/32 bins."""
    if len(t_ion) == 0:
        return math.nan
    period = 2.0 * np.pi / p.Om0
    bins = np.floor(np.sort(t_ion) / (period / 32.0)).astype(np.int64)
    half = (len(bins) + 1) // 2
    return bins[half - 1] / 32.0


def summarise(status: np.ndarray, t_ion: np.ndarray,
              p: ScaledParams) -> IonisationResult:
    done = status != _kernels.STATUS_FAILED
    excluded = int((~done).sum())
    ion = status == _kernels.STATUS_IONISED
    n_eff = int(done.sum())
    m = int(ion.sum())
    pi = m / n_eff if n_eff else math.nan
    sigma = math.sqrt(pi * (1.0 - pi) / n_eff) if n_eff else math.nan
    th = _half_time(t_ion[ion], p)
    return IonisationResult(pi, sigma, th, m, n_eff, excluded)


def ionisation_probability(spec: EnsembleSpec, p: ScaledParams,
                           env: Envelope,
                           rows: np.ndarray | None = None
                           ) -> IonisationResult:
    """Run the ensemble across the pulse and summarise the losses."""
    if rows is None:
        rows = sample(spec)
    status, t_ion = _RUNNERS[spec.tier](rows, spec, p, env)
    return summarise(status, t_ion, p)


def _find_maxima(fs: np.ndarray, pi: np.ndarray, sigma: np.ndarray):
    """Strict local maxima whose prominence over the nearest flanking
    minima exceeds twice the local statistical error."""
    keep = []
    for i in range(1, len(pi) - 1):
        if not (pi[i] > pi[i - 1] and pi[i] > pi[i + 1]):
            continue
        l = i - 1
        while l > 0 and pi[l - 1] < pi[l]:
            l -= 1
        r = i + 1
        while r < len(pi) - 1 and pi[r + 1] < pi[r]:
            r += 1
        if pi[i] - max(pi[l], pi[r]) > 2.0 * sigma[i]:
            keep.append(i)
    return keep


def scan(spec: EnsembleSpec, fs_values, p: ScaledParams,
         env: Envelope) -> IonisationCurve:
    """Ionisation curve over a static-field grid, one shared sample."""
    fs = np.asarray(fs_values, dtype=float)
    if len(fs) == 0:
        raise ValueError("empty field grid")
    if np.any(np.diff(fs) <= 0.0):
        raise ValueError("field grid must increase strictly")
    rows = sample(spec)
    n = len(fs)
    pi = np.empty(n)
    sg = np.empty(n)
    th = np.empty(n)
    ex = np.empty(n, np.int64)
    for k, f in enumerate(fs):
        pk = ScaledParams(Fs=float(f), Fmu=p.Fmu, Om0=p.Om0)
        res = ionisation_probability(spec, pk, env, rows=rows)
        pi[k], sg[k], th[k], ex[k] = res.Pi, res.sigma, res.Th, res.excluded

    idx = _find_maxima(fs, pi, sg)
    widths = []
    for i in idx:
        l = i
        while l > 0 and pi[l] > 0.0:
            l -= 1
        r = i
        while r < n - 1 and pi[r] > 0.0:
            r += 1
        widths.append(WidthRecord(
            Fs_peak=float(fs[i]), Pi_peak=float(pi[i]),
            left_zero=float(fs[l]) if pi[l] == 0.0 else math.nan,
            right_zero=float(fs[r]) if pi[r] == 0.0 else math.nan))
    return IonisationCurve(Fs_grid=fs, Pi=pi, sigma=sg, Th=th,
                           maxima=tuple(float(fs[i]) for i in idx),
                           widths=tuple(widths), excluded=ex)


# ---------------------------------------------------------------------------
# Background-subtracted resonance shape


@dataclass(frozen=True)
class WidthFit:
    Fs: np.ndarray
    adjusted: np.ndarray
    peak_Fs: float
    peak_height: float
    half_width: float
    base_width: float
    slopes: tuple
    intercepts: tuple
    blend: tuple                  # (alpha, beta)


def _crossing(fs, y, i0, level, step):
    """Interpolated F where y crosses `level`, walking from i0 by step."""
    i = i0
    while 0 <= i + step < len(y):
        j = i + step
        if (y[i] - level) * (y[j] - level) <= 0.0 and y[i] != y[j]:
            f = (level - y[i]) / (y[j] - y[i])
            return fs[i] + f * (fs[j] - fs[i])
        i = j
    return math.nan


def width_fit(fs, pi, flanks) -> WidthFit:
    """Resonance shape after removing a blended linear background.

    flanks gives the two windows ((F1, F2), (F3, F4)) strictly outside
    the resonance; a line is fitted on each and the background blends
    between them through tanh(alpha F + beta) with alpha = 4/(F3 - F2),
    beta = -2 (F3 + F2)/(F3 - F2).
    """
    fs = np.asarray(fs, dtype=float)
    pi = np.asarray(pi, dtype=float)
    (f1, f2), (f3, f4) = flanks
    left = (fs >= f1) & (fs <= f2)
    right = (fs >= f3) & (fs <= f4)
    if left.sum() < 3 or right.sum() < 3:
        raise ValueError("flank windows need at least 3 points each")
    m2, c2 = np.polyfit(fs[left], pi[left], 1)
    m3, c3 = np.polyfit(fs[right], pi[right], 1)
    alpha = 4.0 / (f3 - f2)
    beta = -2.0 * (f3 + f2) / (f3 - f2)
    w = 0.5 * (1.0 + np.tanh(alpha * fs + beta))
    background = (m2 + (m3 - m2) * w) * fs + (c2 + (c3 - c2) * w)
    adj = pi - background

    inside = (fs > f2) & (fs < f3)
    if not inside.any():
        raise ValueError("no points between the flank windows")
    i_pk = int(np.flatnonzero(inside)[np.argmax(adj[inside])])
    h = adj[i_pk]
    half_l = _crossing(fs, adj, i_pk, 0.5 * h, -1)
    half_r = _crossing(fs, adj, i_pk, 0.5 * h, +1)
    base_l = _crossing(fs, adj, i_pk, 0.0, -1)
    base_r = _crossing(fs, adj, i_pk, 0.0, +1)
    return WidthFit(Fs=fs, adjusted=adj, peak_Fs=float(fs[i_pk]),
                    peak_height=float(h),
                    half_width=half_r - half_l,
                    base_width=base_r - base_l,
                    slopes=(float(m2), float(m3)),
                    intercepts=(float(c2), float(c3)),
                    blend=(alpha, beta))
