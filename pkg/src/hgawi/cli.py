"""Command-line front end.

    hgawi angles                      Doppler-free beam angles
    hgawi scan --preset d --out d.csv transmission spectrum (+ d.csv.ini)
    hgawi awi --powers-mw 40 --widths-mhz 0.5,100 --out grid.csv
    hgawi fit d.csv --window=-5e6,5e6 Lorentzian fit of the difference signal
    hgawi chi --out chi.csv           closed-form susceptibility on a grid

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from . import config as cfgio
from .atom import GAMMA_12, GAMMA_23, GAMMA_34, LAMBDA_PROBE, LAMBDA_STRONG, LAMBDA_WEAK
from .atom import mercury_five_level_preset
from .constants import hz_to_rad, mhz_to_rad, rad_to_hz
from .doppler import BeamGeometry, doppler_free_angles
from .errors import ConfigError, DomainError, FitError, GeometryError, NumericalError
from .response import chi_analytic
from .spectra import (
    Spectrum, awi_preset, awi_sweep, calibrated, lorentzian_fit, scan_detunings, two_grid,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

#: Enable masks of the four measurement configurations: (strong, weak, repump).
SCENARIOS = {
    "a": (False, False, False),
    "b": (True, False, True),
    "c": (True, True, False),
    "d": (True, True, True),
}


class UsageError(Exception):
    pass


def apply_scenario(config, name):
    """Probe always on; the other beams per the configuration mask."""
    try:
        strong, weak, repump = SCENARIOS[name]
    except KeyError:
        raise UsageError(f"unknown preset {name!r}; choose from {', '.join(SCENARIOS)}") from None
    return config.with_lasers(strong=strong, weak=weak, repump=repump)


def _float_list(text):
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _window(text):
    vals = _float_list(text)
    if len(vals) == 1 and vals[0] > 0:
        return (-vals[0], vals[0])
    if len(vals) != 2 or not vals[1] > vals[0]:
        raise argparse.ArgumentTypeError("expected LO,HI with LO < HI or a positive half-width")
    return tuple(vals)


def _load(path):
    if path is None:
        return mercury_five_level_preset(), {}
    return cfgio.load(path)


# --- subcommands ---------------------------------------------------------------

def cmd_angles(args):
    lp, ls, lw = (x * 1e-9 for x in (args.probe_nm, args.strong_nm, args.weak_nm))
    try:
        theta_s, theta_w = doppler_free_angles(lp, ls, lw)
    except GeometryError as exc:
        print(f"error: geometry infeasible: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t = math.pi - theta_s
    geom = BeamGeometry(np.array([1.0, 0.0, 0.0]),
                        np.array([math.cos(t), math.sin(t), 0.0]),
                        np.array([math.cos(theta_w), math.sin(theta_w), 0.0]),
                        np.array([1.0, 0.0, 0.0]), (lp, ls, lw, lp))
    print(f"theta_s = {math.degrees(theta_s):.1f} deg, theta_w = {math.degrees(theta_w):.1f} deg")
    print(f"theta_s = {math.degrees(theta_s)!r} deg (strong, counterpropagating)")
    print(f"theta_w = {math.degrees(theta_w)!r} deg (weak, copropagating)")
    print(f"closure residual |kp + ks - kw| / |kp| = {geom.closure_residual():.3e}")
    return EXIT_OK


def _scan_config(args):
    config, run = _load(args.config)
    preset = args.preset or run.get("preset")
    if preset:
        config = apply_scenario(config, preset)
    if args.detune_strong is not None:
        config = replace(config, strong=replace(config.strong, detuning=hz_to_rad(args.detune_strong)))
    if args.detune_weak is not None:
        config = replace(config, weak=replace(config.weak, detuning=hz_to_rad(args.detune_weak)))
    calibrate = run.get("calibrate", True) if args.calibrate is None else args.calibrate
    if calibrate:
        config = calibrated(config)
    return config, run, preset


def cmd_scan(args):
    config, run, preset = _scan_config(args)

    def pick(name, default):
        v = getattr(args, name)
        return v if v is not None else run.get(name, default)

    span, points = pick("span_hz", 7e9), pick("points", 2001)
    dspan, dpoints = pick("dense_span_hz", 10e6), pick("dense_points", 401)
    center = args.center_hz
    if center is None:
        center = run.get("center_hz", rad_to_hz(config.weak.detuning - config.strong.detuning))
    if points < 2 and dpoints < 2:
        raise UsageError("at least one grid needs two or more points")
    det = two_grid(span, points, dspan, dpoints, center)
    spec = scan_detunings(config, det, threads=args.threads)
    # the resolved config already carries the preset mask and calibrated kappa
    record = {"command": "scan", "span_hz": span, "points": points,
              "dense_span_hz": dspan, "dense_points": dpoints, "center_hz": center,
              "calibrate": False}
    spec.write_csv(args.out, sidecar=cfgio.dumps(config, record))
    print(f"wrote {len(spec)} rows to {args.out} (preset {preset or '-'}, "
          f"kappa = {config.cell.kappa:.6g} 1/s)")
    return EXIT_OK


def cmd_awi(args):
    if not args.powers_mw or not args.widths_mhz:
        raise UsageError("power and width lists must be non-empty")
    if args.config is None:
        config = awi_preset()
    else:
        config, run = cfgio.load(args.config)
        calibrate = run.get("calibrate", True) if args.calibrate is None else args.calibrate
        if calibrate:
            config = calibrated(config)
    if args.rate_scale is not None:
        config = replace(config, pump=replace(config.pump, rate_scale=args.rate_scale))
    powers = [p * 1e-3 for p in args.powers_mw]
    widths = [w * 1e6 for w in args.widths_mhz]
    grid = awi_sweep(config, powers, widths, points=args.points, threads=args.threads)
    grid.write_csv(args.out)
    cfg_path = args.out + ".ini"
    with open(cfg_path, "w") as fh:
        fh.write(cfgio.dumps(config, {"command": "awi", "calibrate": False}))
    for i, p in enumerate(grid.powers):
        cells = "  ".join(
            f"{grid.max_t[i, j]:.4f}{'*' if grid.awi[i, j] else ' '}" for j in range(grid.widths.size))
        print(f"{p * 1e3:8.2f} mW  {cells}")
    print("widths (MHz): " + ", ".join(f"{w / 1e6:g}" for w in grid.widths) + "   (* = AWI, T > 1)")
    return EXIT_OK


def _print_fit(fit, prefix="FIT:"):
    print(f"center    = {fit.center / 1e6:.6f} MHz")
    print(f"fwhm      = {fit.fwhm / 1e3:.3f} kHz")
    print(f"amplitude = {fit.amplitude:.6g}")
    print(f"baseline  = {fit.offset:.6g} + {fit.slope:.6g} * detuning_hz")
    print(f"residual  = {fit.residual:.3e}")
    print(f"{prefix} center_hz={fit.center!r} fwhm_hz={fit.fwhm!r} amplitude={fit.amplitude!r} "
          f"offset={fit.offset!r} slope={fit.slope!r} residual={fit.residual!r}")


def cmd_fit(args):
    spec = Spectrum.read_csv(args.csv)
    y = getattr(spec, args.column)
    window = args.window
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fit = lorentzian_fit(spec.detuning, y, window=window)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.last is not None:
            _print_fit(exc.last, prefix="FIT-FAILED:")
        return EXIT_NUMERICAL
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _print_fit(fit)
    return EXIT_OK


def cmd_chi(args):
    dp = mhz_to_rad(np.linspace(args.start_mhz, args.stop_mhz, args.points))
    chi = chi_analytic(dp, mhz_to_rad(args.ds_mhz), mhz_to_rad(args.dw_mhz),
                       mhz_to_rad(args.ws_mhz), mhz_to_rad(args.ww_mhz),
                       GAMMA_12, GAMMA_23, GAMMA_34, args.kappa).chi
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        out.write("detuning_hz,chi_re,chi_im\n")
        for d, c in zip(rad_to_hz(dp), np.atleast_1d(chi)):
            out.write(f"{float(d)!r},{float(c.real)!r},{float(c.imag)!r}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def _add_calibrate(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--calibrate", dest="calibrate", action="store_true", default=None,
                   help="scale kappa to the reference transmission target (default)")
    g.add_argument("--no-calibrate", dest="calibrate", action="store_false",
                   help="use kappa from the configuration as is")


def build_parser():
    ap = argparse.ArgumentParser(prog="hgawi", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("angles", help="Doppler-free angles of the coupling beams")
    p.add_argument("--probe-nm", type=float, default=LAMBDA_PROBE * 1e9)
    p.add_argument("--strong-nm", type=float, default=LAMBDA_STRONG * 1e9)
    p.add_argument("--weak-nm", type=float, default=LAMBDA_WEAK * 1e9)
    p.set_defaults(func=cmd_angles)

    p = sub.add_parser("scan", help="probe and reference transmission spectrum")
    p.add_argument("--config", help="configuration file (default: mercury preset)")
    p.add_argument("--preset", choices=sorted(SCENARIOS), help="laser enable mask")
    p.add_argument("--out", required=True, help="output CSV; the config lands in OUT.ini")
    p.add_argument("--span-hz", type=float, help="coarse grid span (default 7e9)")
    p.add_argument("--points", type=int, help="coarse grid points (default 2001)")
    p.add_argument("--dense-span-hz", type=float, help="dense grid span (default 10e6)")
    p.add_argument("--dense-points", type=int, help="dense grid points (default 401)")
    p.add_argument("--center-hz", type=float,
                   help="dense grid centre (default: expected three-photon resonance)")
    p.add_argument("--detune-strong", type=float, metavar="HZ",
                   help="strong-laser detuning Delta_s/2pi in Hz")
    p.add_argument("--detune-weak", type=float, metavar="HZ",
                   help="weak-laser detuning Delta_w/2pi in Hz")
    p.add_argument("--threads", type=int, default=1)
    _add_calibrate(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("awi", help="peak transmission versus pump power and width")
    p.add_argument("--config", help="configuration file (default: AWI preset)")
    p.add_argument("--powers-mw", type=_float_list, required=True, help="comma-separated, mW")
    p.add_argument("--widths-mhz", type=_float_list, required=True,
                   help="comma-separated pump FWHM, MHz")
    p.add_argument("--rate-scale", type=float, help="override the pump rate scale (m^2)")
    p.add_argument("--points", type=int, default=41, help="coarse points over +-5 MHz")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_calibrate(p)
    p.set_defaults(func=cmd_awi)

    p = sub.add_parser("fit", help="Lorentzian fit of a spectrum column")
    p.add_argument("csv")
    p.add_argument("--window", type=_window, metavar="LO,HI",
                   help="fit range in Hz, e.g. --window=-5e6,5e6; a single value H means -H,H")
    p.add_argument("--column", default="diff", choices=["diff", "t_probe", "t_ref", "chi_im"])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("chi", help="closed-form weak-probe susceptibility")
    p.add_argument("--start-mhz", type=float, default=-60.0)
    p.add_argument("--stop-mhz", type=float, default=60.0)
    p.add_argument("--points", type=int, default=1201)
    p.add_argument("--ds-mhz", type=float, default=0.0)
    p.add_argument("--dw-mhz", type=float, default=0.0)
    p.add_argument("--ws-mhz", type=float, default=30.0)
    p.add_argument("--ww-mhz", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=7.57e4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_chi)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
