"""Level schemes, laser fields, vapour-cell parameters and the mercury presets.

Level indices (0-based) used everywhere in the package:

====  =========  ==========================================
idx   term       role
====  =========  ==========================================
0     6 1S0      ground state, lower level of the probe
1     6 3P1      upper probe level, lower strong-coupling level
2     7 3S1      upper strong- and weak-coupling level
3     6 3P2      metastable, weak coupling (546.1 nm)
4     6 3P0      optional trap level, repumped at 404.7 nm
====  =========  ==========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constants import H_PLANCK, C_LIGHT, MASS_HG202, TWO_PI, mhz_to_rad
from .errors import ConfigError, DomainError

GROUND, P1, S1, P2, P0 = range(5)

# Radiative rates of the 4-level core, in rad/s.
GAMMA_12 = mhz_to_rad(1.27)
GAMMA_23 = mhz_to_rad(8.86)
GAMMA_34 = mhz_to_rad(7.75)

#: 7 3S1 -> 6 3P0 (404.7 nm) Einstein A coefficient, NIST ASD. Not part of the
#: four-level model; only used by the five-level preset.
GAMMA_TRAP_LITERATURE = 2.1e7

LAMBDA_PROBE = 253.7e-9
LAMBDA_STRONG = 435.8e-9
LAMBDA_WEAK = 546.1e-9
LAMBDA_REPUMP = 404.7e-9

PUMP_ANGLE_DEG = 5.0


@dataclass(frozen=True)
class TrapExtension:
    """Incoherently coupled trap level fed by spontaneous decay.

    ``source`` decays into ``index`` at ``decay_rate``; the repumper returns
    population from ``index`` to ``source`` at ``repump_rate`` (one way).
    """

    index: int = P0
    source: int = S1
    decay_rate: float = GAMMA_TRAP_LITERATURE
    repump_rate: float = 0.0


@dataclass(frozen=True)
class LevelScheme:
    labels: tuple[str, ...]
    decays: tuple[tuple[int, int, float], ...]
    trap_extension: Optional[TrapExtension] = None

    def __post_init__(self):
        n = len(self.labels)
        for upper, lower, rate in self.decays:
            if not (0 <= upper < n and 0 <= lower < n) or upper == lower:
                raise ConfigError(f"decay ({upper}, {lower}) outside the level set")
            if not rate >= 0:
                raise ConfigError(f"decay rate {rate} must be non-negative")
        pairs = {(u, l) for u, l, _ in self.decays}
        for needed in ((P1, GROUND), (S1, P1), (S1, P2)):
            if needed not in pairs:
                raise ConfigError(f"core transition {needed} missing from decays")
        if _has_cycle(n, pairs):
            raise ConfigError("decay graph must be acyclic")
        trap = self.trap_extension
        if trap is not None:
            if not (0 <= trap.index < n and 0 <= trap.source < n):
                raise ConfigError("trap level outside the level set")
            if trap.decay_rate < 0 or trap.repump_rate < 0:
                raise ConfigError("trap rates must be non-negative")

    @property
    def n(self) -> int:
        return len(self.labels)

    def rate(self, upper: int, lower: int) -> float:
        return sum(r for u, l, r in self.decays if (u, l) == (upper, lower))

    def total_decay(self, level: int) -> float:
        total = sum(r for u, _, r in self.decays if u == level)
        trap = self.trap_extension
        if trap is not None and trap.source == level:
            total += trap.decay_rate
        return total


def _has_cycle(n, edges):
    adj = {i: [l for u, l in edges if u == i] for i in range(n)}
    state = [0] * n

    def visit(i):
        state[i] = 1
        for j in adj[i]:
            if state[j] == 1 or (state[j] == 0 and visit(j)):
                return True
        state[i] = 2
        return False

    return any(state[i] == 0 and visit(i) for i in range(n))


def four_level_scheme(gamma_12=GAMMA_12, gamma_23=GAMMA_23, gamma_34=GAMMA_34):
    return LevelScheme(
        labels=("6S0", "6P1", "7S1", "6P2"),
        decays=((P1, GROUND, gamma_12), (S1, P1, gamma_23), (S1, P2, gamma_34)),
    )


def five_level_scheme(trap_decay=GAMMA_TRAP_LITERATURE, **rates):
    core = four_level_scheme(**rates)
    return LevelScheme(
        labels=core.labels + ("6P0",),
        decays=core.decays,
        trap_extension=TrapExtension(P0, S1, trap_decay, 0.0),
    )


def unit(theta_deg: float) -> tuple[float, float, float]:
    """In-plane unit vector at ``theta_deg`` from the +x (probe) axis."""
    t = math.radians(theta_deg)
    return (math.cos(t), math.sin(t), 0.0)


@dataclass(frozen=True)
class LaserField:
    """One laser beam.

    ``rabi`` and ``detuning`` are in rad/s and follow the coupling convention
    of the model Hamiltonian (off-diagonal element equals ``-rabi``).
    ``power`` and ``beam_diameter`` are optional lab parameters, used where a
    rate has to be derived from intensity (the repumper).
    """

    rabi: complex = 0.0
    detuning: float = 0.0
    unit_k: tuple[float, float, float] = (1.0, 0.0, 0.0)
    wavelength: float = LAMBDA_PROBE
    linewidth_fwhm: float = 0.0
    enabled: bool = True
    power: Optional[float] = None
    beam_diameter: Optional[float] = None

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.unit_k))
        if abs(norm - 1.0) > 1e-12:
            raise ConfigError(f"unit_k must be normalised, |unit_k| = {norm!r}")
        if not self.linewidth_fwhm >= 0:
            raise ConfigError("linewidth_fwhm must be non-negative")
        if not self.wavelength > 0:
            raise ConfigError("wavelength must be positive")

    @property
    def k(self) -> float:
        return TWO_PI / self.wavelength

    @property
    def k_vector(self) -> np.ndarray:
        return self.k * np.asarray(self.unit_k, dtype=float)

    @property
    def active_rabi(self) -> complex:
        return self.rabi if self.enabled else 0.0

    @property
    def active_linewidth(self) -> float:
        return self.linewidth_fwhm if self.enabled else 0.0


@dataclass(frozen=True)
class CellModel:
    """Vapour cell.

    ``kappa`` is the susceptibility prefactor N|d21|^2/(hbar eps0) in 1/s.
    ``transit_rate`` (1/s) is the inverse interaction time of an atom with
    the beams.
    """

    atom_temperature: float = 289.15
    path_length: float = 2e-3
    atomic_mass: float = MASS_HG202
    kappa: float = 7.57e4
    reference_transmission_target: float = 0.68
    transit_rate: float = 0.0

    def __post_init__(self):
        if not self.path_length > 0:
            raise ConfigError("path_length must be positive")
        if not self.atom_temperature > 0:
            raise ConfigError("atom_temperature must be positive")
        if not self.atomic_mass > 0:
            raise ConfigError("atomic_mass must be positive")
        if not self.kappa >= 0:
            raise ConfigError("kappa must be non-negative")
        if not 0 < self.reference_transmission_target <= 1:
            raise ConfigError("reference_transmission_target must lie in (0, 1]")
        if not self.transit_rate >= 0:
            raise ConfigError("transit_rate must be non-negative")


@dataclass(frozen=True)
class Numerics:
    """Velocity quadrature and solver settings.

    ``order`` is the Gauss-Hermite order across the probe axis. Along the
    probe axis a trapezoid grid with spacing ``axial_step`` (m/s) resolves
    sub-Doppler structure within ``axial_core`` (m/s) of each resonant
    velocity class; spacing grows by ``axial_growth`` per m/s of distance outside.
    ``axial_extent`` bounds the grid at that many thermal speeds.

    ``transverse_step`` (m/s) replaces the Gauss-Hermite rule across the
    probe axis by a uniform trapezoid grid. Only needed when the wave
    vectors do not close: the three-photon resonance then selects a narrow
    transverse velocity class that a Gauss-Hermite rule steps over.
    """

    order: int = 16
    axial_step: float = 0.08
    axial_core: float = 8.0
    axial_growth: float = 0.08
    axial_extent: float = 6.0
    solver_tol: float = 1e-9
    transverse_step: Optional[float] = None

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError("order must be >= 1")
        if not (self.axial_step > 0 and self.axial_core > 0 and self.axial_growth > 0):
            raise ConfigError("axial grid parameters must be positive")
        if not self.axial_extent > 0:
            raise ConfigError("axial_extent must be positive")
        if not self.solver_tol > 0:
            raise ConfigError("solver_tol must be positive")
        if self.transverse_step is not None and not self.transverse_step > 0:
            raise ConfigError("transverse_step must be positive")


@dataclass(frozen=True)
class SystemConfig:
    scheme: LevelScheme
    probe: LaserField
    strong: LaserField
    weak: LaserField
    repump: LaserField = field(
        default_factory=lambda: LaserField(wavelength=LAMBDA_REPUMP, enabled=False)
    )
    pump: PumpModel = field(default_factory=lambda: _pump_model(enabled=False))
    cell: CellModel = field(default_factory=CellModel)
    numerics: Numerics = field(default_factory=Numerics)

    @property
    def geometry(self):
        from .doppler import BeamGeometry

        return BeamGeometry.from_config(self)

    def with_lasers(self, *, strong=None, weak=None, repump=None, pump=None):
        """Copy with the given enable flags changed; ``None`` leaves a beam as is."""
        cfg = self
        if strong is not None:
            cfg = replace(cfg, strong=replace(cfg.strong, enabled=strong))
        if weak is not None:
            cfg = replace(cfg, weak=replace(cfg.weak, enabled=weak))
        if repump is not None:
            cfg = replace(cfg, repump=replace(cfg.repump, enabled=repump))
        if pump is not None:
            cfg = replace(cfg, pump=replace(cfg.pump, enabled=pump))
        return cfg

    def reference(self) -> "SystemConfig":
        """The undisturbed reference beam: probe only, same atoms."""
        return self.with_lasers(strong=False, weak=False, repump=False, pump=False)

    def resolved_scheme(self) -> LevelScheme:
        """Scheme with the trap repump rate set from the repump laser."""
        from .pump import repump_rate

        rate = repump_rate(self.repump, self.scheme)
        trap = self.scheme.trap_extension
        if trap is None:
            return self.scheme
        return replace(self.scheme, trap_extension=replace(trap, repump_rate=rate))


def _pump_model(**kw):
    from .pump import PumpModel

    return PumpModel(**kw)


def saturation_intensity(wavelength: float, gamma: float) -> float:
    """Two-level saturation intensity pi*h*c*Gamma/(3*lambda^3) in W/m^2."""
    return math.pi * H_PLANCK * C_LIGHT * gamma / (3.0 * wavelength**3)


def saturation_parameter(power, beam_diameter, wavelength, gamma) -> float:
    """On-resonance saturation parameter S0 = I/I_sat of a flat-top beam.

    ``power`` may be zero; all other arguments must be strictly positive.
    """
    if power < 0:
        raise DomainError("power must be non-negative")
    for name, value in (("beam_diameter", beam_diameter),
                        ("wavelength", wavelength), ("gamma", gamma)):
        if not value > 0:
            raise DomainError(f"{name} must be positive")
    intensity = power / (math.pi * (beam_diameter / 2.0) ** 2)
    return intensity / saturation_intensity(wavelength, gamma)


def interaction_time(beam_diameter: float, temperature: float, mass: float) -> float:
    """Beam diameter divided by the most probable thermal speed."""
    from .doppler import most_probable_speed

    return beam_diameter / most_probable_speed(temperature, mass)


def doppler_free_unit_vectors(probe_wl=LAMBDA_PROBE, strong_wl=LAMBDA_STRONG,
                              weak_wl=LAMBDA_WEAK):
    """Unit wave vectors (probe, strong, weak) closing k_p + k_s = k_w."""
    from .doppler import doppler_free_angles

    theta_s, theta_w = doppler_free_angles(probe_wl, strong_wl, weak_wl)
    probe = (1.0, 0.0, 0.0)
    strong = (-math.cos(theta_s), math.sin(theta_s), 0.0)
    weak = (math.cos(theta_w), math.sin(theta_w), 0.0)
    return probe, strong, weak


def mercury_preset() -> SystemConfig:
    """Four-level baseline with the laser parameters of the experiment."""
    u_p, u_s, u_w = doppler_free_unit_vectors()
    probe = LaserField(rabi=mhz_to_rad(0.21), unit_k=u_p, wavelength=LAMBDA_PROBE,
                       linewidth_fwhm=60e3, power=50e-6, beam_diameter=0.84e-3)
    strong = LaserField(rabi=mhz_to_rad(30.8), unit_k=u_s, wavelength=LAMBDA_STRONG,
                        linewidth_fwhm=60e3, power=170e-3, beam_diameter=2e-3)
    weak = LaserField(rabi=mhz_to_rad(6.17), unit_k=u_w, wavelength=LAMBDA_WEAK,
                      linewidth_fwhm=60e3, power=3.95e-3, beam_diameter=2e-3)
    repump = LaserField(rabi=mhz_to_rad(1.80), unit_k=u_w, wavelength=LAMBDA_REPUMP,
                        linewidth_fwhm=52e6, enabled=False, power=3.7e-3,
                        beam_diameter=2.8e-3)
    temperature = 289.15
    transit = 1.0 / interaction_time(probe.beam_diameter, temperature, MASS_HG202)
    cell = CellModel(atom_temperature=temperature, path_length=2e-3,
                     atomic_mass=MASS_HG202, kappa=7.57e4,
                     reference_transmission_target=0.68, transit_rate=transit)
    pump = _pump_model(enabled=False, unit_k=unit(-PUMP_ANGLE_DEG))
    return SystemConfig(scheme=four_level_scheme(), probe=probe, strong=strong,
                        weak=weak, repump=repump, pump=pump, cell=cell)


def mercury_five_level_preset(trap_decay: float = GAMMA_TRAP_LITERATURE) -> SystemConfig:
    """Baseline plus the 6 3P0 trap level; the repumper is enabled."""
    base = mercury_preset()
    return replace(base, scheme=five_level_scheme(trap_decay),
                   repump=replace(base.repump, enabled=True))
