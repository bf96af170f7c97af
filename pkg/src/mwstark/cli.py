"""Command-line front end.

Every subcommand reads an optional JSON config file, applies explicit
flag overrides on top, validates the result, and emits CSV whose '#'
header echoes the resolved configuration as one JSON line, so a run is
fully reconstructible from its output.  Identical config and seed give
byte-identical output.  Laboratory units appear only here; the library
underneath works in scaled units throughout.

Subcommands:

- ``units``       convert between laboratory and scaled parameters
- ``fcrit``       critical-field table dump or single (Ie, Im) query
- ``resonances``  static-field positions of the dynamical resonances
- ``disappear``   drive amplitudes where a resonance loses its island
- ``island``      resonance-island contours, separatrix, phase line
- ``orbit``       single-trajectory trace in any tier
- ``scan``        Monte-Carlo ionisation curve over the static field

``--plot FILE.png`` renders a figure of the tabulated data alongside
the CSV; ``--threads`` caps the compiled-kernel pool without changing
any numbers.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .adiabatic import AdiabaticState, trace_adiabatic
from .critical import CritQuery, default_table, f_crit
from .ensemble import EnsembleSpec, scan as ensemble_scan
from .exact import actions_from_state, initial_state, trace
from .meanmotion import ze_map, trace_z
from .resonance import (bessel_jprime_zero, disappearance_field,
                        island_params, phase_line_evolution,
                        resonance_contours, resonance_position)
from .series import Actions
from .units import Envelope, LabParams, ScaledParams, scale, unscale


class ConfigError(ValueError):
    """Rejected before any computation; exits with status 2."""


# ---------------------------------------------------------------------------
# Config resolution and CSV emission


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < JSON config file < explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        cmd = loaded.pop("command", None)
        if cmd is not None and cmd != args.command:
            raise ConfigError(
                f"config file is for command {cmd!r}, not {args.command!r}")
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _require(cfg: dict, *keys: str):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"missing required settings: {', '.join(missing)}")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _render(command: str, cfg: dict, columns, rows,
            extra_header: dict | None = None) -> str:
    lines = [f"# mwstark {command}",
             f"# config = {json.dumps(cfg, sort_keys=True)}"]
    for key, val in (extra_header or {}).items():
        lines.append(f"# {key} = {json.dumps(val, sort_keys=True)}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _write(path: str | None, text: str):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sibling(path: str | None, tag: str) -> str | None:
    if path is None:
        return None
    stem, dot, ext = path.rpartition(".")
    return f"{stem}.{tag}.{ext}" if dot else f"{path}.{tag}"


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


# ---------------------------------------------------------------------------
# Shared flag groups


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="JSON file with settings for this command")
    sub.add_argument("--out", help="CSV output path (default: stdout)")
    sub.add_argument("--plot", help="render a PNG of the output here")
    sub.add_argument("--threads", type=int,
                     help="cap the compiled-kernel thread pool")


def _add_fields(sub, *, static=True):
    if static:
        sub.add_argument("--fs", type=float, help="static field, scaled")
    sub.add_argument("--fmu", type=float, help="microwave amplitude, scaled")
    sub.add_argument("--om0", type=float, help="microwave frequency, scaled")


def _add_envelope(sub):
    sub.add_argument("--na", type=float, help="rise length, field periods")
    sub.add_argument("--nc", type=float, help="flat length, field periods")
    sub.add_argument("--nb", type=float, help="fall length, field periods")


def _add_actions(sub):
    sub.add_argument("--in", dest="In", type=float,
                     help="principal action (default 1)")
    sub.add_argument("--ie", type=float, help="electric action")
    sub.add_argument("--im", type=float, help="axial action")


def _apply_threads(n: int | None):
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


# ---------------------------------------------------------------------------
# units


_UNITS_DEFAULTS = {"omega_ghz": None, "om0": None, "n0": None,
                   "fs_vcm": 0.0, "fmu_vcm": 0.0, "fs": 0.0, "fmu": 0.0}


def _cmd_units(args) -> int:
    cfg = _resolve(args, _UNITS_DEFAULTS)
    _require(cfg, "n0")
    lab_given = cfg["omega_ghz"] is not None
    scl_given = cfg["om0"] is not None
    if lab_given == scl_given:
        raise ConfigError("give exactly one of --omega-ghz and --om0")
    if lab_given:
        lab = LabParams(Fs_vcm=cfg["fs_vcm"], Fmu_vcm=cfg["fmu_vcm"],
                        Omega_ghz=cfg["omega_ghz"], n0=int(cfg["n0"]))
        p = scale(lab)
    else:
        p = ScaledParams(Fs=cfg["fs"], Fmu=cfg["fmu"], Om0=cfg["om0"])
        lab = unscale(p, int(cfg["n0"]))
    rows = [("Omega", lab.Omega_ghz, p.Om0),
            ("Fs", lab.Fs_vcm, p.Fs),
            ("Fmu", lab.Fmu_vcm, p.Fmu),
            ("n0", lab.n0, lab.n0)]
    _write(args.out, _render("units", cfg, ("quantity", "lab", "scaled"), rows))
    return 0


# ---------------------------------------------------------------------------
# fcrit


_FCRIT_DEFAULTS = {"ie": None, "im": None, "ftol": 1e-6, "fmax": 0.5}


def _cmd_fcrit(args) -> int:
    cfg = _resolve(args, _FCRIT_DEFAULTS)
    if (cfg["ie"] is None) != (cfg["im"] is None):
        raise ConfigError("give --ie and --im together, or neither")
    if cfg["ie"] is not None:
        val = f_crit(CritQuery(cfg["ie"], cfg["im"]),
                     fmax=cfg["fmax"], ftol=cfg["ftol"])
        rows = [(cfg["ie"], cfg["im"], val)]
    else:
        rows = list(default_table().rows_csv())
    _write(args.out, _render("fcrit", cfg, ("Ie", "Im", "Fcrit"), rows))
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5, 4))
        data = np.array(rows)
        for im in np.unique(data[:, 1])[::16]:
            sel = data[:, 1] == im
            ax.plot(data[sel, 0], data[sel, 2], label=f"Im={im:.2f}")
        ax.set_xlabel("electric action")
        ax.set_ylabel("critical static field")
        ax.legend(fontsize=7)
        fig.savefig(args.plot, dpi=150)
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------
# resonances


_RES_DEFAULTS = {"om0": None, "fmu": None, "In": 1.0, "im": 0.0,
                 "jmin": 1, "jmax": 15, "method": "pade", "order": None}


def _cmd_resonances(args) -> int:
    cfg = _resolve(args, _RES_DEFAULTS)
    _require(cfg, "om0", "fmu")
    if cfg["jmin"] < 1 or cfg["jmax"] < cfg["jmin"]:
        raise ConfigError("need 1 <= jmin <= jmax")
    p = ScaledParams(Fs=0.0, Fmu=cfg["fmu"], Om0=cfg["om0"])
    a = Actions(In=cfg["In"], Ie=0.0, Im=cfg["im"])
    rows = []
    for j in range(int(cfg["jmin"]), int(cfg["jmax"]) + 1):
        est = resonance_position(j, p, a, method=cfg["method"],
                                 order=cfg["order"])
        rows.append((j, float(est), int(est.convergence_warning)))
    _write(args.out, _render("resonances", cfg,
                             ("j", "Fs", "flagged"), rows))
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5, 4))
        js = [r[0] for r in rows]
        ax.plot(js, [r[1] for r in rows], "o-")
        ax.set_xlabel("resonance index j")
        ax.set_ylabel("resonant static field")
        fig.savefig(args.plot, dpi=150)
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------
# disappear


_DIS_DEFAULTS = {"om0": None, "In": 1.0, "im": 0.0, "jmin": None,
                 "jmax": None, "j": None, "k": 1, "method": "pade",
                 "harmonics": "leading", "fmu_target": None}


def _cmd_disappear(args) -> int:
    cfg = _resolve(args, _DIS_DEFAULTS)
    _require(cfg, "om0")
    if cfg["j"] is not None:
        js = [int(cfg["j"])]
    elif cfg["jmin"] is not None and cfg["jmax"] is not None:
        js = list(range(int(cfg["jmin"]), int(cfg["jmax"]) + 1))
    else:
        raise ConfigError("give --j, or both --jmin and --jmax")
    a = Actions(In=cfg["In"], Ie=0.0, Im=cfg["im"])
    k = int(cfg["k"])
    rows = []
    for j in js:
        target = cfg["fmu_target"]
        if target is None:
            target = bessel_jprime_zero(j, k) * cfg["om0"] / 3.0
        fs_j, fmu_jk = disappearance_field(j, cfg["om0"], a, target,
                                           method=cfg["method"],
                                           harmonics=cfg["harmonics"])
        rows.append((j, k, fs_j, fmu_jk))
    _write(args.out, _render("disappear", cfg,
                             ("j", "k", "Fs", "Fmu"), rows))
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot([r[0] for r in rows], [r[3] for r in rows], "s-")
        ax.set_xlabel("resonance index j")
        ax.set_ylabel("disappearance drive amplitude")
        fig.savefig(args.plot, dpi=150)
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------
# island


_ISLAND_DEFAULTS = {"j": None, "fs": None, "fmu": None, "om0": None,
                    "In": 1.0, "ie": 0.0, "im": 0.0, "grid": 600,
                    "levels": 12, "gbar_order": None, "phase_ie": None,
                    "na": 35.0, "npts": 256}


def _cmd_island(args) -> int:
    cfg = _resolve(args, _ISLAND_DEFAULTS)
    _require(cfg, "j", "fmu", "om0")
    a = Actions(In=cfg["In"], Ie=cfg["ie"], Im=cfg["im"])
    j = int(cfg["j"])
    if cfg["fs"] is None:
        p0 = ScaledParams(Fs=0.0, Fmu=cfg["fmu"], Om0=cfg["om0"])
        cfg["fs"] = float(resonance_position(j, p0, a))
    p = ScaledParams(Fs=cfg["fs"], Fmu=cfg["fmu"], Om0=cfg["om0"])
    ip = island_params(j, p, a, gbar_order=cfg["gbar_order"])
    rc = resonance_contours(j, p, a, n_grid=int(cfg["grid"]),
                            n_levels=int(cfg["levels"]),
                            gbar_order=cfg["gbar_order"])
    rows = []
    for level, branches in rc.contours:
        for b, line in enumerate(branches):
            for th, ie in line:
                rows.append(("contour", level, b, th, ie))
    sep_level = _sep_level(rc)
    for b, line in enumerate(rc.separatrix):
        for th, ie in line:
            rows.append(("separatrix", sep_level, b, th, ie))
    curve = None
    if cfg["phase_ie"] is not None:
        env = Envelope(cfg["na"], 0.0, 0.0)
        curve = phase_line_evolution(cfg["phase_ie"], p, a, env,
                                     Npts=int(cfg["npts"]), j=j)
        for th, ie in zip(curve.theta, curve.Ie):
            rows.append(("phaseline", curve.time, 0, th, ie))
    summary = {"alpha": ip.alpha_j, "nu": ip.nu_j,
               "area_over_2pi": ip.area / (2.0 * math.pi),
               "omega_j": ip.omega_j,
               "half_period_field_periods": ip.half_period_field_periods,
               "saddle": list(rc.saddle), "centre": list(rc.centre),
               "delta_Ie": rc.delta_Ie}
    if curve is not None:
        summary["phase_arc_length"] = curve.arc_length()
    _write(args.out, _render("island", cfg,
                             ("kind", "level", "branch", "theta", "Ie"),
                             rows, extra_header={"island": summary}))
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5, 4))
        for level, branches in rc.contours:
            for line in branches:
                ax.plot(line[:, 0], line[:, 1], color="0.7", lw=0.6)
        for line in rc.separatrix:
            ax.plot(line[:, 0], line[:, 1], color="C3", lw=1.4)
        ax.plot([rc.centre[0]], [rc.centre[1]], "+", color="C3")
        if curve is not None:
            ax.plot(curve.theta, curve.Ie, ".", ms=1.5, color="C0")
        ax.set_xlabel("island angle")
        ax.set_ylabel("electric action")
        fig.savefig(args.plot, dpi=150)
        plt.close(fig)
    return 0


def _sep_level(rc) -> float:
    # saddle value of the island Hamiltonian labels the separatrix rows
    th, ie = rc.saddle
    ti = np.searchsorted(rc.theta, th)
    ii = np.searchsorted(rc.Ie, ie)
    ti = min(max(ti, 0), len(rc.theta) - 1)
    ii = min(max(ii, 0), len(rc.Ie) - 1)
    return float(rc.K[ii, ti])


# ---------------------------------------------------------------------------
# orbit


_ORBIT_DEFAULTS = {"tier": "exact", "In": 1.0, "ie": None, "im": 0.0,
                   "psi": 0.0, "chi": 0.0, "phi": 0.0, "fs": None,
                   "fmu": None, "om0": None, "na": 4.0, "nc": 20.0,
                   "nb": 4.0, "samples": 512, "tol": 1e-10, "order": 2}


def _cmd_orbit(args) -> int:
    cfg = _resolve(args, _ORBIT_DEFAULTS)
    _require(cfg, "ie", "fs", "fmu", "om0")
    if cfg["tier"] not in ("exact", "adiabatic", "mean-motion"):
        raise ConfigError(f"unknown tier {cfg['tier']!r}")
    if int(cfg["samples"]) < 2:
        raise ConfigError("need at least 2 samples")
    a = Actions(In=cfg["In"], Ie=cfg["ie"], Im=cfg["im"])
    p = ScaledParams(Fs=cfg["fs"], Fmu=cfg["fmu"], Om0=cfg["om0"])
    env = Envelope(cfg["na"], cfg["nc"], cfg["nb"])
    times = np.linspace(0.0, env.total(p), int(cfg["samples"]))

    if cfg["tier"] == "exact":
        st0 = initial_state(a, (cfg["psi"], cfg["chi"], cfg["phi"]))
        rows = []
        for st in trace(st0, p, env, times, tol=cfg["tol"]):
            try:
                act = actions_from_state(st.q, st.p)
                ain, aie, aim = act.In, act.Ie, act.Im
            except ValueError:
                ain = aie = aim = math.nan
            rows.append((st.t, *st.q, *st.p, ain, aie, aim))
        cols = ("t", "x", "y", "z", "px", "py", "pz", "In", "Ie", "Im")
    elif cfg["tier"] == "adiabatic":
        st0 = AdiabaticState.from_actions(a, cfg["psi"], cfg["chi"])
        rows = [(st.t, st.I1, st.I2, st.psi, st.chi, st.Ie)
                for st in trace_adiabatic(st0, p, env, times,
                                          order=int(cfg["order"]),
                                          rtol=cfg["tol"], atol=cfg["tol"])]
        cols = ("t", "I1", "I2", "psi", "chi", "Ie")
    else:
        z0 = ze_map(a.Ie, 0.5 * (cfg["chi"] - cfg["psi"]), a)
        rows = [(t, z.Z1, z.Z2, z.Z3, g)
                for t, z, g in trace_z(z0, p, env, a,
                                       times, order=int(cfg["order"]),
                                       rtol=cfg["tol"], atol=cfg["tol"])]
        cols = ("t", "Z1", "Z2", "Z3", "gamma")
    _write(args.out, _render("orbit", cfg, cols, rows))
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5, 4))
        data = np.array([list(r) for r in rows])
        if cfg["tier"] == "exact":
            ax.plot(data[:, 1], data[:, 3], lw=0.4)
            ax.set_xlabel("x")
            ax.set_ylabel("z")
        else:
            period = 2.0 * math.pi / p.Om0
            ie = data[:, 5] if cfg["tier"] == "adiabatic" else data[:, 3]
            ax.plot(data[:, 0] / period, ie)
            ax.set_xlabel("time, field periods")
            ax.set_ylabel("electric action")
        fig.savefig(args.plot, dpi=150)
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------
# scan


_SCAN_DEFAULTS = {"N": None, "mode": "microcanonical", "ie": None,
                  "im": None, "tier": "adiabatic", "seed": None,
                  "stratified": True, "order": 2, "tol": 1e-10,
                  "fs_min": None, "fs_max": None, "fs_step": None,
                  "fmu": None, "om0": None, "na": 16.0, "nc": 50.0,
                  "nb": 16.0}


def _cmd_scan(args) -> int:
    cfg = _resolve(args, _SCAN_DEFAULTS)
    _require(cfg, "N", "fs_min", "fs_max", "fs_step", "fmu", "om0")
    if cfg["seed"] is None:
        raise ConfigError("scan draws random orbits; --seed is required")
    if cfg["fs_step"] <= 0.0 or cfg["fs_max"] < cfg["fs_min"]:
        raise ConfigError("need fs_min <= fs_max and fs_step > 0")
    try:
        spec = EnsembleSpec(N=int(cfg["N"]), mode=cfg["mode"],
                            Ie=cfg["ie"], Im=cfg["im"], tier=cfg["tier"],
                            seed=int(cfg["seed"]),
                            stratified=bool(cfg["stratified"]),
                            order=int(cfg["order"]), tol=cfg["tol"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    p = ScaledParams(Fs=cfg["fs_min"], Fmu=cfg["fmu"], Om0=cfg["om0"])
    env = Envelope(cfg["na"], cfg["nc"], cfg["nb"])
    n_pts = int(math.floor((cfg["fs_max"] - cfg["fs_min"]) / cfg["fs_step"]
                           + 0.5)) + 1
    fs = cfg["fs_min"] + cfg["fs_step"] * np.arange(n_pts)

    curve = ensemble_scan(spec, fs, p, env)

    body = _render("scan", cfg, ("Fs", "Pi", "sigma", "Th", "excluded"),
                   zip(curve.Fs_grid, curve.Pi, curve.sigma, curve.Th,
                       curve.excluded))
    _write(args.out, body)
    peak_rows = [(w.Fs_peak, w.Pi_peak, w.left_zero, w.right_zero, w.width)
                 for w in curve.widths]
    peaks = _render("scan", cfg,
                    ("Fs_peak", "Pi_peak", "left_zero", "right_zero",
                     "width"), peak_rows)
    peak_path = _sibling(args.out, "maxima")
    if peak_path:
        _write(peak_path, peaks)
    else:
        sys.stdout.write(peaks)
    if args.plot:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(5.5, 4))
        ax.errorbar(curve.Fs_grid, curve.Pi, yerr=curve.sigma,
                    lw=1.0, elinewidth=0.5, capsize=0)
        for w in curve.widths:
            ax.axvline(w.Fs_peak, color="C3", lw=0.6, ls="--")
        ax.set_xlabel("static field, scaled")
        ax.set_ylabel("ionisation probability")
        ax.set_ylim(-0.02, 1.02)
        fig.savefig(args.plot, dpi=150)
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mwstark",
        description="Hydrogen in parallel static and microwave fields: "
                    "resonance analysis and ionisation Monte-Carlo.")
    subs = ap.add_subparsers(dest="command", required=True)

    s = subs.add_parser("units", help="convert lab and scaled parameters")
    _add_common(s)
    s.add_argument("--omega-ghz", dest="omega_ghz", type=float,
                   help="lab microwave frequency, GHz")
    s.add_argument("--om0", type=float, help="scaled microwave frequency")
    s.add_argument("--n0", type=int, help="initial principal quantum number")
    s.add_argument("--fs-vcm", dest="fs_vcm", type=float,
                   help="lab static field, V/cm")
    s.add_argument("--fmu-vcm", dest="fmu_vcm", type=float,
                   help="lab microwave amplitude, V/cm")
    s.add_argument("--fs", type=float, help="scaled static field")
    s.add_argument("--fmu", type=float, help="scaled microwave amplitude")
    s.set_defaults(run=_cmd_units)

    s = subs.add_parser("fcrit", help="critical static field of a torus")
    _add_common(s)
    s.add_argument("--ie", type=float, help="electric action")
    s.add_argument("--im", type=float, help="axial action")
    s.add_argument("--ftol", type=float, help="field bisection tolerance")
    s.add_argument("--fmax", type=float, help="search ceiling")
    s.set_defaults(run=_cmd_fcrit)

    s = subs.add_parser("resonances",
                        help="resonant static fields by series method")
    _add_common(s)
    _add_fields(s, static=False)
    s.add_argument("--in", dest="In", type=float, help="principal action")
    s.add_argument("--im", type=float, help="axial action")
    s.add_argument("--jmin", type=int)
    s.add_argument("--jmax", type=int)
    s.add_argument("--method",
                   choices=("lowest", "truncated", "richardson", "pade"))
    s.add_argument("--order", type=int,
                   help="correction terms kept by method=truncated")
    s.set_defaults(run=_cmd_resonances)

    s = subs.add_parser("disappear",
                        help="drive amplitudes cancelling a resonance")
    _add_common(s)
    s.add_argument("--om0", type=float, help="scaled microwave frequency")
    s.add_argument("--in", dest="In", type=float, help="principal action")
    s.add_argument("--im", type=float, help="axial action")
    s.add_argument("--j", type=int, help="single resonance index")
    s.add_argument("--jmin", type=int)
    s.add_argument("--jmax", type=int)
    s.add_argument("--k", type=int, help="which zero of the coupling (1-based)")
    s.add_argument("--method", choices=("lowest", "pade", "truncated"))
    s.add_argument("--harmonics", choices=("leading", "full"))
    s.add_argument("--fmu-target", dest="fmu_target", type=float,
                   help="search near this drive amplitude")
    s.set_defaults(run=_cmd_disappear)

    s = subs.add_parser("island", help="resonance-island geometry")
    _add_common(s)
    _add_fields(s)
    _add_actions(s)
    s.add_argument("--j", type=int, help="resonance index")
    s.add_argument("--grid", type=int, help="contour grid resolution")
    s.add_argument("--levels", type=int, help="number of contour levels")
    s.add_argument("--gbar-order", dest="gbar_order", type=int,
                   help="rotation-series truncation for the detuning")
    s.add_argument("--phase-ie", dest="phase_ie", type=float,
                   help="evolve a phase line from this electric action")
    s.add_argument("--na", type=float, help="switch-on length, field periods")
    s.add_argument("--npts", type=int, help="points on the phase line")
    s.set_defaults(run=_cmd_island)

    s = subs.add_parser("orbit", help="trace a single trajectory")
    _add_common(s)
    _add_fields(s)
    _add_actions(s)
    _add_envelope(s)
    s.add_argument("--tier", choices=("exact", "adiabatic", "mean-motion"))
    s.add_argument("--psi", type=float, help="first auxiliary angle")
    s.add_argument("--chi", type=float, help="second auxiliary angle")
    s.add_argument("--phi", type=float, help="azimuthal angle")
    s.add_argument("--samples", type=int, help="number of trace times")
    s.add_argument("--tol", type=float, help="integrator tolerance")
    s.add_argument("--order", type=int, help="reduced-tier energy order")
    s.set_defaults(run=_cmd_orbit)

    s = subs.add_parser("scan", help="ionisation probability over Fs")
    _add_common(s)
    _add_fields(s, static=False)
    _add_envelope(s)
    s.add_argument("--n", dest="N", type=int, help="orbits per grid point")
    s.add_argument("--mode", choices=("microcanonical", "substate"))
    s.add_argument("--ie", type=float, help="substate electric action")
    s.add_argument("--im", type=float, help="substate axial action")
    s.add_argument("--tier", choices=("exact", "adiabatic", "mean-motion"))
    s.add_argument("--seed", type=int, help="RNG seed (required)")
    s.add_argument("--stratified", action=argparse.BooleanOptionalAction,
                   default=None, help="stratify the sample (default on)")
    s.add_argument("--order", type=int, help="reduced-tier energy order")
    s.add_argument("--tol", type=float, help="integrator tolerance")
    s.add_argument("--fs-min", dest="fs_min", type=float)
    s.add_argument("--fs-max", dest="fs_max", type=float)
    s.add_argument("--fs-step", dest="fs_step", type=float)
    s.set_defaults(run=_cmd_scan)

    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _apply_threads(args.threads)
        return args.run(args)
    except ConfigError as exc:
        print(f"mwstark {args.command}: invalid config: {exc}",
              file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"mwstark {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
