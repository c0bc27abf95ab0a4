"""Physical constants and unit conversions used throughout the package.

Internally every rate and detuning is an angular frequency in rad/s. Files and
the command line speak ordinary frequencies (Hz, MHz); the helpers below are
the only place where the factor 2*pi enters.
"""

import math

from scipy import constants as _sc

TWO_PI = 2.0 * math.pi

H_PLANCK = _sc.h
HBAR = _sc.hbar
C_LIGHT = _sc.c
K_BOLTZMANN = _sc.k
ATOMIC_MASS_UNIT = _sc.physical_constants["atomic mass constant"][0]

#: Mass of 202Hg (201.970643 u, AME2016).
MASS_HG202 = 201.970643 * ATOMIC_MASS_UNIT

_RAD_PER_HZ = TWO_PI
_RAD_PER_MHZ = TWO_PI * 1e6


def hz_to_rad(f_hz: float) -> float:
    return f_hz * _RAD_PER_HZ


def rad_to_hz(w: float) -> float:
    return w / _RAD_PER_HZ


def mhz_to_rad(f_mhz: float) -> float:
    return f_mhz * _RAD_PER_MHZ


def rad_to_mhz(w: float) -> float:
    return w / _RAD_PER_MHZ


def invert_scale(value: float, scale: float) -> float:
    """Return ``x`` with ``x * scale == value`` exactly, when such a float exists.

    Plain division can be off by one ulp, which would break bit-exact round
    trips of config files written in MHz. Neighbouring floats are searched and
    the exact preimage with the shortest decimal form wins.
    """
    x = value / scale
    cands = [x]
    lo = hi = x
    for _ in range(8):
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
        cands += [lo, hi]
    exact = [c for c in cands if c * scale == value]
    if not exact:
        return x
    return min(exact, key=lambda c: len(repr(c)))


def rad_to_mhz_exact(w: float) -> float:
    return invert_scale(w, _RAD_PER_MHZ)


def rad_to_hz_exact(w: float) -> float:
    return invert_scale(w, _RAD_PER_HZ)
