"""Transmission spectra, density calibration, peak fitting and AWI sweeps.

A spectrum holds, per probe detuning (Hz), the probe transmission with all
enabled beams, the probe-only reference transmission, their difference and
the averaged susceptibility. Transmission follows Beer-Lambert for a dilute
medium, T = exp(-k_p chi'' L).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares, minimize_scalar

from .constants import TWO_PI, hz_to_rad, mhz_to_rad
from .doppler import DopplerAverager
from .errors import DomainError, FitError

CSV_HEADER = ("detuning_hz", "t_probe", "t_ref", "diff", "chi_re", "chi_im")
GRID_HEADER = ("power_w", "fwhm_hz", "max_transmission", "awi")

#: Probe power and Rabi frequency used for the AWI measurements.
AWI_PROBE_POWER = 15e-6
AWI_PROBE_RABI = mhz_to_rad(0.175)
#: (power W, spectral FWHM Hz, peak transmission) anchoring the pump rate scale.
AWI_ANCHOR = (40e-3, 0.5e6, 0.869)


def transmission(chi_imag, wavelength, length):
    """Beer-Lambert transmission exp(-(2 pi / lambda) chi'' L)."""
    if not length > 0:
        raise DomainError("path length must be positive")
    return np.exp(-(TWO_PI / wavelength) * np.asarray(chi_imag) * length)


def _reference_chi_per_kappa(config) -> float:
    ref = replace(config.reference(), cell=replace(config.cell, kappa=1.0))
    return DopplerAverager(ref).chi(0.0).imag


def calibrate_density(config, target_t: Optional[float] = None) -> float:
    """kappa (1/s) giving the probe-only line-centre transmission ``target_t``.

    chi is linear in kappa, so one reference evaluation with kappa = 1 fixes
    it. The result does not depend on the kappa already stored in ``config``.
    """
    if target_t is None:
        target_t = config.cell.reference_transmission_target
    if not 0 < target_t < 1:
        raise DomainError("target transmission must lie strictly between 0 and 1")
    unit_chi = _reference_chi_per_kappa(config)
    if not unit_chi > 0:
        raise DomainError("reference absorption vanishes; density cannot be calibrated")
    k = TWO_PI / config.probe.wavelength
    return -math.log(target_t) / (k * config.cell.path_length * unit_chi)


def calibrated(config, target_t: Optional[float] = None):
    """Copy of ``config`` with kappa set by :func:`calibrate_density`."""
    return replace(config, cell=replace(config.cell, kappa=calibrate_density(config, target_t)))


@dataclass(frozen=True)
class Spectrum:
    detuning: np.ndarray
    t_probe: np.ndarray
    t_ref: np.ndarray
    diff: np.ndarray
    chi_re: np.ndarray
    chi_im: np.ndarray
    config: object = None

    def __post_init__(self):
        if self.detuning.size > 1 and not np.all(np.diff(self.detuning) > 0):
            raise DomainError("spectrum detunings must be strictly increasing")

    def __len__(self):
        return self.detuning.size

    def columns(self):
        return (self.detuning, self.t_probe, self.t_ref, self.diff, self.chi_re, self.chi_im)

    def window(self, lo, hi) -> "Spectrum":
        m = (self.detuning >= lo) & (self.detuning <= hi)
        return Spectrum(*(c[m] for c in self.columns()), config=self.config)

    def write_csv(self, path, sidecar: Optional[str] = None) -> Path:
        """Write rows with full double precision; optionally a config sidecar.

        ``sidecar`` is the already serialised config text; it lands next to
        the CSV as ``<name>.ini``.
        """
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in zip(*self.columns()):
                w.writerow([repr(float(x)) for x in row])
        if sidecar is not None:
            sidecar_path(path).write_text(sidecar)
        return path

    @classmethod
    def read_csv(cls, path) -> "Spectrum":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
            raise DomainError(f"{path}: header must be {','.join(CSV_HEADER)}")
        try:
            data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise DomainError(f"{path}: {exc}") from exc
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(CSV_HEADER):
            raise DomainError(f"{path}: expected {len(CSV_HEADER)} numeric columns")
        return cls(*data.T.copy())


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".ini")


def scan_detunings(config, detunings_hz: Sequence[float], threads: int = 1) -> Spectrum:
    """Probe and reference transmission at the given probe detunings (Hz)."""
    det = np.asarray(detunings_hz, dtype=float)
    dps = hz_to_rad(det)
    chi = DopplerAverager(config).chi_many(dps, threads)
    chi_ref = DopplerAverager(config.reference()).chi_many(dps, threads)
    lam, length = config.probe.wavelength, config.cell.path_length
    t = transmission(chi.imag, lam, length)
    t_ref = transmission(chi_ref.imag, lam, length)
    return Spectrum(det, t, t_ref, t - t_ref, chi.real.copy(), chi.imag.copy(), config)


def scan(config, start_hz: float, stop_hz: float, points: int, threads: int = 1) -> Spectrum:
    if points < 2:
        raise DomainError("a scan needs at least two points")
    if not stop_hz > start_hz:
        raise DomainError("scan range must be increasing")
    return scan_detunings(config, np.linspace(start_hz, stop_hz, points), threads)


def two_grid(span_hz=7e9, points=2001, dense_span_hz=10e6, dense_points=401, center_hz=0.0):
    """Union of a coarse survey grid and a dense grid around ``center_hz``."""
    coarse = np.linspace(-span_hz / 2, span_hz / 2, points) if points >= 2 else np.empty(0)
    dense = (center_hz + np.linspace(-dense_span_hz / 2, dense_span_hz / 2, dense_points)
             if dense_points >= 2 else np.empty(0))
    return np.unique(np.concatenate([coarse, dense]))


@dataclass(frozen=True)
class FitResult:
    center: float
    fwhm: float
    amplitude: float
    offset: float
    slope: float
    residual: float
    iterations: int = 0


def lorentzian(x, amplitude, center, fwhm, offset=0.0, slope=0.0):
    h = 0.5 * fwhm
    return amplitude * h * h / ((x - center) ** 2 + h * h) + offset + slope * x


def _half_max_width(u, v, k, base):
    """Full width where v - base first drops below half its value at k."""
    w = v - base
    half = 0.5 * w[k]
    lo = k
    while lo > 0 and w[lo] > half:
        lo -= 1
    hi = k
    while hi < u.size - 1 and w[hi] > half:
        hi += 1
    return max(u[hi] - u[lo], 2.0 * (u[1] - u[0]))


def lorentzian_fit(x, y=None, window=None, max_iter: int = 200) -> FitResult:
    """Least-squares Lorentzian plus linear baseline.

    ``x`` may be a :class:`Spectrum` (fitting its ``diff`` column) or an array
    with ``y`` given. Start points are deterministic: baseline through the two
    end samples, centre at the sample furthest above it, and FWHM either half the
    window or the half-maximum width around the largest sample. Both are run
    with Levenberg-Marquardt on rescaled coordinates and the better converged
    fit is returned, so a narrow peak on a curved background is not traded
    for a broad one.
    """
    if isinstance(x, Spectrum):
        x, y = x.detuning, x.diff
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        m = (x >= window[0]) & (x <= window[1])
        x, y = x[m], y[m]
    if x.size < 10:
        raise DomainError("fit window must contain at least 10 samples")

    x0, xs = 0.5 * (x[0] + x[-1]), 0.5 * (x[-1] - x[0])
    ys = max(float(np.max(np.abs(y))), 1e-300)
    u, v = (x - x0) / xs, y / ys
    b1 = (v[-1] - v[0]) / (u[-1] - u[0])
    b0 = v[0] - b1 * u[0]
    base = b0 + b1 * u
    k = int(np.argmax(v - base))
    starts = [np.array([v[k] - base[k], u[k], g, b0, b1])
              for g in (1.0, _half_max_width(u, v, k, base))]

    def resid(p):
        return lorentzian(u, *p) - v

    def jac(p):
        a, c, g, _, _ = p
        h = 0.5 * g
        d = (u - c) ** 2 + h * h
        shape = h * h / d
        return np.column_stack([
            shape,
            a * shape * 2.0 * (u - c) / d,
            a * (h / d - h ** 3 / d ** 2),
            np.ones_like(u),
            u,
        ])

    sols = [least_squares(resid, p0, jac=jac, method="lm", max_nfev=max_iter,
                          xtol=1e-14, ftol=1e-14, gtol=1e-14) for p0 in starts]
    good = [s for s in sols if s.status > 0 and np.all(np.isfinite(s.x))]
    sol = min(good or sols, key=lambda s: s.cost)
    a, c, g, o, s = sol.x
    result = FitResult(
        center=float(x0 + c * xs),
        fwhm=float(abs(g) * xs),
        amplitude=float(a * ys),
        offset=float((o - s * x0 / xs) * ys),
        slope=float(s * ys / xs),
        residual=float(np.linalg.norm(sol.fun) * ys),
        iterations=int(sum(s.nfev for s in sols)),
    )
    if not good:
        raise FitError(f"Lorentzian fit did not converge: {sol.message}", last=result)
    if abs(result.amplitude) <= 3.0 * result.residual / math.sqrt(x.size) + 1e-12 * ys:
        warnings.warn("no peak resolved in the fit window (amplitude compatible with zero)",
                      RuntimeWarning, stacklevel=2)
    return result


def awi_config(config, power: float, width_hz: float, rate_scale: Optional[float] = None):
    """``config`` with the pump enabled at ``power`` (W) and spectral FWHM (Hz)."""
    pump = replace(config.pump, enabled=True, power=power, spectral_fwhm=width_hz)
    if rate_scale is not None:
        pump = replace(pump, rate_scale=rate_scale)
    return replace(config, pump=pump)


def awi_preset(base=None):
    """Configuration (d) as used for the pump measurements.

    Density is calibrated with the regular probe, then the probe is reduced
    to 15 uW; the pump is on at the anchor power and width.
    """
    from .atom import mercury_five_level_preset

    cfg = calibrated(base if base is not None else mercury_five_level_preset())
    cfg = replace(cfg, probe=replace(cfg.probe, rabi=AWI_PROBE_RABI, power=AWI_PROBE_POWER))
    power, width, _ = AWI_ANCHOR
    return awi_config(cfg, power, width)


def peak_transmission(config, span_hz: float = 10e6, points: int = 41, threads: int = 1):
    """Largest probe transmission within +-span/2 of line centre.

    A uniform scan brackets the maximum, which is then refined by a bounded
    scalar search between the neighbouring samples.
    """
    avg = DopplerAverager(config)
    lam, length = config.probe.wavelength, config.cell.path_length
    det = np.linspace(-span_hz / 2, span_hz / 2, points)
    t = transmission(avg.chi_many(hz_to_rad(det), threads).imag, lam, length)
    k = int(np.argmax(t))
    lo, hi = det[max(k - 1, 0)], det[min(k + 1, points - 1)]

    def neg(d):
        return -float(transmission(avg.chi(hz_to_rad(d)).imag, lam, length))

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-4 * (det[1] - det[0])})
    return max(float(t[k]), -float(res.fun))


@dataclass(frozen=True)
class AwiGrid:
    powers: np.ndarray
    widths: np.ndarray
    max_t: np.ndarray

    @property
    def awi(self) -> np.ndarray:
        return self.max_t > 1.0

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(GRID_HEADER)
            for i, p in enumerate(self.powers):
                for j, f in enumerate(self.widths):
                    t = self.max_t[i, j]
                    w.writerow([repr(float(p)), repr(float(f)), repr(float(t)), int(t > 1.0)])
        return path


def awi_sweep(config, powers: Sequence[float], widths: Sequence[float],
              span_hz: float = 10e6, points: int = 41, threads: int = 1) -> AwiGrid:
    """Peak transmission for every (pump power W, spectral FWHM Hz) pair."""
    powers = np.asarray(powers, dtype=float)
    widths = np.asarray(widths, dtype=float)
    if powers.size == 0 or widths.size == 0:
        raise DomainError("power and width lists must be non-empty")
    out = np.empty((powers.size, widths.size))
    for i, p in enumerate(powers):
        for j, f in enumerate(widths):
            out[i, j] = peak_transmission(awi_config(config, p, f), span_hz, points, threads)
    return AwiGrid(powers, widths, out)


def calibrate_pump_scale(config=None, anchor=AWI_ANCHOR, bracket=(1e-9, 1e-5)) -> float:
    """Rate scale that reproduces the anchor peak transmission.

    Peak transmission grows monotonically with the rate scale, so a
    logarithmic bracketing root find suffices.
    """
    cfg = config if config is not None else awi_preset()
    power, width, target = anchor

    def f(log_c):
        return peak_transmission(awi_config(cfg, power, width, math.exp(log_c))) - target

    return math.exp(brentq(f, math.log(bracket[0]), math.log(bracket[1]), xtol=1e-10))
