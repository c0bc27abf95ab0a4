"""Incoherent pumping: the directed, spectrally broadened AWI pump on the
probe transition and the broadband repumper out of the trap level.

The pump enters the master equation as an incoherent rate that drives the
probe transition symmetrically up and down (thermal-photon-number form). The
repumper only empties the trap level, as a one-way rate back to 7 3S1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .atom import GAMMA_12, LAMBDA_PROBE, PUMP_ANGLE_DEG, saturation_parameter, unit
from .constants import C_LIGHT, HBAR, TWO_PI
from .errors import ConfigError

LINESHAPES = ("lorentzian", "gaussian")

# Area of a unit-peak Gaussian relative to a unit-peak Lorentzian of equal FWHM.
_GAUSS_TO_LORENTZ_AREA = math.sqrt(math.pi / (4.0 * math.log(2.0))) / (math.pi / 2.0)

#: Power-to-rate constant C in r0 = C I / (hbar omega Gamma_eff), in m^2.
#: Fixed so that 40 mW at 0.5 MHz spectral width gives 86.9 % peak probe
#: transmission in the AWI scenario (``spectra.calibrate_pump_scale``).
DEFAULT_RATE_SCALE = 9.9578e-8


@dataclass(frozen=True)
class PumpModel:
    """Directed incoherent pump beam on the 1-2 transition.

    ``axes`` are the full widths of the elliptical beam (m). ``detuning`` is
    the centre detuning in rad/s. If ``peak_rate`` is given (rad/s) it
    replaces the power-derived on-resonance rate.
    """

    power: float = 0.0
    axes: tuple[float, float] = (2.5e-3, 1.4e-3)
    spectral_fwhm: float = 0.5e6
    detuning: float = 0.0
    unit_k: tuple[float, float, float] = unit(-PUMP_ANGLE_DEG)
    wavelength: float = LAMBDA_PROBE
    rate_scale: float = DEFAULT_RATE_SCALE
    enabled: bool = False
    lineshape: str = "lorentzian"
    natural_width: float = GAMMA_12
    peak_rate: Optional[float] = None

    def __post_init__(self):
        if not self.power >= 0:
            raise ConfigError("pump power must be non-negative")
        if self.enabled and not self.spectral_fwhm > 0:
            raise ConfigError("pump spectral_fwhm must be positive")
        if self.lineshape not in LINESHAPES:
            raise ConfigError(f"pump lineshape must be one of {LINESHAPES}")
        norm = math.sqrt(sum(c * c for c in self.unit_k))
        if abs(norm - 1.0) > 1e-12:
            raise ConfigError("pump unit_k must be normalised")
        if self.peak_rate is not None and self.peak_rate < 0:
            raise ConfigError("pump peak_rate must be non-negative")

    @property
    def k_vector(self) -> np.ndarray:
        return TWO_PI / self.wavelength * np.asarray(self.unit_k, dtype=float)

    @property
    def effective_width(self) -> float:
        """Lorentzian FWHM in rad/s: laser width plus natural width."""
        return TWO_PI * self.spectral_fwhm + self.natural_width

    @property
    def intensity(self) -> float:
        a, b = self.axes
        return self.power / (math.pi * a * b / 4.0)

    @property
    def peak(self) -> float:
        """On-resonance pump rate r0 in rad/s."""
        if not self.enabled:
            return 0.0
        if self.peak_rate is not None:
            return self.peak_rate
        omega = TWO_PI * C_LIGHT / self.wavelength
        r0 = self.rate_scale * self.intensity / (HBAR * omega * self.effective_width)
        if self.lineshape == "gaussian":
            r0 /= _GAUSS_TO_LORENTZ_AREA
        return r0


def rate_at(pump: PumpModel, v) -> np.ndarray:
    """Pump rate seen by atoms with in-plane velocity ``v`` (shape (..., 2)).

    The pump spectrum is centred at ``pump.detuning`` and Doppler shifted by
    -k.v, like the coherent beams.
    """
    v = np.asarray(v, dtype=float)
    r0 = pump.peak
    if r0 == 0.0:
        return np.zeros(v.shape[:-1])
    delta = pump.detuning - v @ pump.k_vector[:2]
    half = 0.5 * pump.effective_width
    if pump.lineshape == "lorentzian":
        shape = half * half / (delta * delta + half * half)
    else:
        shape = np.exp(-math.log(2.0) * (delta / half) ** 2)
    return r0 * shape


def repump_rate(repump, scheme) -> float:
    """Incoherent rate on the trap transition produced by the repumper.

    Rate-equation form R = S0 * Gamma / 2 with S0 from the beam's power and
    diameter; independent of velocity because the repumper is broadband.
    """
    if not repump.enabled:
        return 0.0
    trap = scheme.trap_extension
    if trap is None:
        raise ConfigError("repumper enabled on a scheme without a trap level")
    if repump.power is None or repump.beam_diameter is None:
        raise ConfigError("repumper needs power and beam_diameter")
    if trap.decay_rate == 0.0:
        return 0.0
    s0 = saturation_parameter(repump.power, repump.beam_diameter,
                              repump.wavelength, trap.decay_rate)
    return 0.5 * s0 * trap.decay_rate
