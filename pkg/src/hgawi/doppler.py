"""Beam geometry, velocity-dependent detunings and thermal averaging.

All beams lie in the x-y plane with the probe along +x, so only the in-plane
velocity (vx, vy) shifts any detuning. An atom moving with velocity v sees

    delta_i(v) = delta_i - k_i . v

for every beam i, which makes the three-photon detuning
dp + ds - dw - (k_p + k_s - k_w) . v velocity independent once the wave
vectors close the triangle k_p + k_s = k_w.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .atom import GROUND, P1
from .bloch import SteadyStateBatch, dephasing_matrix
from .constants import K_BOLTZMANN, TWO_PI
from .errors import DomainError, GeometryError, SolverError
from .pump import rate_at
from .response import Susceptibility


@dataclass(frozen=True)
class BeamGeometry:
    probe: np.ndarray
    strong: np.ndarray
    weak: np.ndarray
    pump: np.ndarray
    wavelengths: tuple[float, float, float, float]

    @classmethod
    def from_config(cls, config):
        return cls(
            np.asarray(config.probe.unit_k, dtype=float),
            np.asarray(config.strong.unit_k, dtype=float),
            np.asarray(config.weak.unit_k, dtype=float),
            np.asarray(config.pump.unit_k, dtype=float),
            (config.probe.wavelength, config.strong.wavelength,
             config.weak.wavelength, config.pump.wavelength),
        )

    def k_vectors(self):
        """Wave vectors (rad/m) of probe, strong, weak and pump."""
        units = (self.probe, self.strong, self.weak, self.pump)
        return tuple(TWO_PI / wl * u for u, wl in zip(units, self.wavelengths))

    @property
    def three_photon_k(self) -> np.ndarray:
        kp, ks, kw, _ = self.k_vectors()
        return kp + ks - kw

    def closure_residual(self) -> float:
        """|k_p + k_s - k_w| / |k_p|."""
        kp = self.k_vectors()[0]
        return float(np.linalg.norm(self.three_photon_k) / np.linalg.norm(kp))


def doppler_free_angles(lp, ls, lw, strong_counterpropagating=True):
    """Angles (rad) of the strong and weak beams that close k_p + k_s = k_w.

    The probe runs along +x. By default the strong beam is counterpropagating
    and ``theta_s`` is measured from -x; ``theta_w`` is measured from +x with
    the weak beam on the same side as the strong one. With
    ``strong_counterpropagating=False`` both angles are measured from +x.
    """
    for name, wl in (("lp", lp), ("ls", ls), ("lw", lw)):
        if not wl > 0:
            raise DomainError(f"{name} must be positive")
    kp, ks, kw = 1.0 / lp, 1.0 / ls, 1.0 / lw
    # |kp + ks|^2 = kw^2 with ks at angle phi from +x
    cos_phi = (kw * kw - kp * kp - ks * ks) / (2.0 * kp * ks)
    if not -1.0 - 1e-12 <= cos_phi <= 1.0 + 1e-12:
        raise GeometryError(
            f"no beam geometry closes the wave-vector triangle for "
            f"({lp:g}, {ls:g}, {lw:g}) m")
    phi = math.acos(min(1.0, max(-1.0, cos_phi)))
    wx = kp + ks * math.cos(phi)
    wy = ks * math.sin(phi)
    theta_w = math.atan2(wy, wx)
    theta_s = math.pi - phi if strong_counterpropagating else phi
    return theta_s, theta_w


def shifted_detunings(fields, geometry: BeamGeometry, v):
    """Detunings seen by an atom with in-plane velocity ``v`` (m/s).

    ``fields`` maps 'probe', 'strong', 'weak' (and optionally 'pump') to
    unshifted detunings in rad/s. Returns a dict of the same keys.
    """
    v = np.asarray(v, dtype=float)
    kp, ks, kw, kpump = geometry.k_vectors()
    ks_by_name = {"probe": kp, "strong": ks, "weak": kw, "pump": kpump}
    return {name: d - v @ ks_by_name[name][:2] for name, d in fields.items()}


def thermal_speed(temperature, mass):
    """One-dimensional rms speed sqrt(kT/m)."""
    if not (temperature > 0 and mass > 0):
        raise DomainError("temperature and mass must be positive")
    return math.sqrt(K_BOLTZMANN * temperature / mass)


def most_probable_speed(temperature, mass):
    return math.sqrt(2.0) * thermal_speed(temperature, mass)


def doppler_width(wavelength, temperature, mass):
    """Doppler FWHM in Hz: sqrt(8 kT ln2 / m) / lambda."""
    return math.sqrt(8.0 * math.log(2.0)) * thermal_speed(temperature, mass) / wavelength


@dataclass(frozen=True)
class VelocityGrid:
    """Quadrature nodes (N, 2) in m/s with weights summing to one."""

    nodes: np.ndarray
    weights: np.ndarray
    temperature: float = 0.0
    mass: float = 0.0

    @classmethod
    def at_rest(cls):
        return cls(np.zeros((1, 2)), np.ones(1))

    def moment(self, f):
        return float(self.weights @ f(self.nodes))


def hermite_nodes(order, sigma):
    """Gauss-Hermite nodes and normalised weights for N(0, sigma^2)."""
    x, w = np.polynomial.hermite.hermgauss(order)
    return math.sqrt(2.0) * sigma * x, w / math.sqrt(math.pi)


def transverse_nodes(step, extent, sigma):
    """Uniform trapezoid nodes on +-extent*sigma with normalised Gaussian weights."""
    n = int(math.ceil(extent * sigma / step))
    v = np.linspace(-extent * sigma, extent * sigma, 2 * n + 1)
    w = trapezoid_weights(v) * np.exp(-0.5 * (v / sigma) ** 2)
    return v, w / w.sum()


def velocity_grid(temperature, mass, order) -> VelocityGrid:
    """Two-dimensional Gauss-Hermite product grid for a Maxwell-Boltzmann gas."""
    if order < 4:
        raise DomainError("quadrature order must be at least 4")
    sigma = thermal_speed(temperature, mass)
    v, w = hermite_nodes(order, sigma)
    vx, vy = np.meshgrid(v, v, indexing="ij")
    weights = np.outer(w, w).ravel()
    nodes = np.column_stack([vx.ravel(), vy.ravel()])
    return VelocityGrid(nodes, weights / weights.sum(), temperature, mass)


def _march(start, stop, step, growth):
    """Points from ``start`` (excluded) to ``stop`` (included) with spacing
    step + growth * distance-from-start."""
    direction = 1.0 if stop > start else -1.0
    pts = []
    x = start
    while (stop - x) * direction > 0:
        x = x + direction * (step + growth * abs(x - start))
        pts.append(x)
    if pts:
        pts[-1] = stop
    return pts


def axial_nodes(zones, step, growth, limit):
    """Nodes on [-limit, limit]: spacing ``step`` inside the ``zones``
    (list of (lo, hi)), growing linearly with distance outside them."""
    clipped = sorted((max(lo, -limit), min(hi, limit))
                     for lo, hi in zones if hi > -limit and lo < limit)
    merged = []
    for lo, hi in clipped:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
        else:
            merged.append((lo, hi))
    if not merged:
        merged = [(0.0, 0.0)]
    pts = []
    for lo, hi in merged:
        n = max(1, int(math.ceil((hi - lo) / step)))
        pts.extend(np.linspace(lo, hi, n + 1).tolist())
    for (_, a), (b, _) in zip(merged[:-1], merged[1:]):
        mid = 0.5 * (a + b)
        pts.extend(_march(a, mid, step, growth))
        pts.extend(_march(b, mid, step, growth))
    pts.extend(_march(merged[0][0], -limit, step, growth))
    pts.extend(_march(merged[-1][1], limit, step, growth))
    return np.unique(np.array(pts))


def trapezoid_weights(x):
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


class DopplerAverager:
    """Thermal average of the probe susceptibility for one configuration.

    Across the probe axis (vy) a Gauss-Hermite rule of ``numerics.order`` is
    used. Along the probe axis (vx) the integrand carries structure as narrow
    as the natural width (~0.3 m/s), so a trapezoid grid with fine spacing
    around the probe-resonant and pump-resonant velocity classes is used.
    """

    def __init__(self, config, grid: Optional[VelocityGrid] = None):
        self.config = config
        scheme = config.resolved_scheme()
        self.scheme = scheme
        cell = config.cell
        self.kappa = cell.kappa
        p, s, w = config.probe, config.strong, config.weak
        self.wp = p.active_rabi
        if self.wp == 0:
            raise DomainError("probe must be enabled with a non-zero Rabi frequency")
        self.detunings = (p.detuning, s.detuning if s.enabled else 0.0,
                          w.detuning if w.enabled else 0.0)
        deph = dephasing_matrix(scheme.n, p.active_linewidth, s.active_linewidth,
                                w.active_linewidth)
        self.pump = config.pump
        self.pumped = config.pump.enabled and config.pump.peak > 0
        self.batch = SteadyStateBatch(scheme, self.wp, s.active_rabi, w.active_rabi,
                                      transit_rate=cell.transit_rate, dephasing=deph,
                                      pumped=self.pumped, tol=config.numerics.solver_tol)
        self.i21 = self.batch.element(P1, GROUND)
        geom = config.geometry
        self.kp, self.ks, self.kw, self.kpump = (k[:2] for k in geom.k_vectors())
        self.grid = grid
        num = config.numerics
        self.sigma = thermal_speed(cell.atom_temperature, cell.atomic_mass)
        enabled = [self.kp, self.ks if s.enabled else None, self.kw if w.enabled else None,
                   self.kpump if self.pumped else None]
        needs_vy = any(k is not None and abs(k[1]) > 0 for k in enabled)
        if not needs_vy:
            self.vy, self.wy = np.zeros(1), np.ones(1)
        elif num.transverse_step is not None:
            self.vy, self.wy = transverse_nodes(num.transverse_step, num.axial_extent, self.sigma)
        else:
            self.vy, self.wy = hermite_nodes(num.order, self.sigma)
            if s.enabled and w.enabled and geom.closure_residual() > 1e-6:
                warnings.warn(
                    "beam geometry is not Doppler-free; the Gauss-Hermite transverse rule "
                    "does not resolve the three-photon resonance (set numerics.transverse_step)",
                    RuntimeWarning, stacklevel=2)
        self.numerics = num

    def _zones(self, dp, vy):
        num = self.numerics
        kpx = self.kp[0]
        zones = [(dp / kpx - num.axial_core, dp / kpx + num.axial_core)]
        if self.pumped:
            kx, ky = self.kpump
            half = 0.5 * self.pump.effective_width
            width = 8.0 * half / abs(kx)
            if width < num.axial_core:
                c = (self.pump.detuning - ky * vy) / kx
                zones.append((c - width, c + width))
        return zones

    def _axial(self, dp, vy):
        num = self.numerics
        limit = num.axial_extent * self.sigma + abs(dp) / self.kp[0]
        vx = axial_nodes(self._zones(dp, vy), num.axial_step, num.axial_growth, limit)
        w = trapezoid_weights(vx) * np.exp(-0.5 * (vx / self.sigma) ** 2)
        return vx, w / w.sum()

    def nodes(self, dp):
        """Velocity nodes (N, 2) and weights used for probe detuning ``dp``."""
        if self.grid is not None:
            return self.grid.nodes, self.grid.weights
        vs, ws = [], []
        shared = None if self.pumped else self._axial(dp, 0.0)
        for vy, wy in zip(self.vy, self.wy):
            vx, wx = shared if shared is not None else self._axial(dp, vy)
            vs.append(np.column_stack([vx, np.full_like(vx, vy)]))
            ws.append(wx * wy)
        return np.concatenate(vs), np.concatenate(ws)

    def rho_nodes(self, dp):
        """Reduced steady states at every velocity node for probe detuning dp."""
        v, w = self.nodes(dp)
        d0p, d0s, d0w = self.detunings
        dps = dp - v @ self.kp
        dss = d0s - v @ self.ks
        dws = d0w - v @ self.kw
        r = rate_at(self.pump, v) if self.pumped else None
        try:
            x = self.batch.solve(dps, dss, dws, r)
        except SolverError as exc:
            k = exc.node
            where = f" (velocity node {k}: v = {v[k].tolist()} m/s)" if k is not None else ""
            raise SolverError(f"{exc}{where}", node=None if k is None else v[k]) from exc
        return v, w, x

    def chi(self, dp) -> complex:
        v, w, x = self.rho_nodes(dp)
        rho21 = x[:, self.i21]
        return complex(self.kappa * np.dot(w, rho21) / np.conj(self.wp))

    def populations(self, dp):
        v, w, x = self.rho_nodes(dp)
        n = self.scheme.n
        return np.array([np.real(np.dot(w, x[:, self.batch.element(k, k)])) for k in range(n)])

    def chi_many(self, dps, threads=1):
        dps = [float(d) for d in np.atleast_1d(dps)]
        if threads <= 1 or len(dps) < 2:
            return np.array([self.chi(d) for d in dps])
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(self.chi, dps)))


def average_chi(config, dp, grid: Optional[VelocityGrid] = None, threads=1) -> Susceptibility:
    """Thermally averaged probe susceptibility at probe detuning(s) ``dp`` (rad/s).

    Each velocity class sees its own Doppler-shifted detunings and pump rate.
    ``grid`` replaces the default quadrature (e.g. ``VelocityGrid.at_rest()``).
    """
    avg = DopplerAverager(config, grid)
    if np.ndim(dp) == 0:
        return Susceptibility(avg.chi(float(dp)), float(dp))
    return Susceptibility(avg.chi_many(dp, threads))
