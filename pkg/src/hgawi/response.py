"""Probe susceptibility (closed form and from the density matrix) and the
dressed states of the coupled upper levels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, SingularityError

PERTURBATIVE_LIMIT = 0.2


@dataclass(frozen=True)
class Susceptibility:
    """Linear probe susceptibility chi = chi' + i chi'' (dimensionless).

    ``chi`` may be an array; the detunings (rad/s) record where it was taken.
    """

    chi: complex
    dp: Optional[float] = None
    ds: Optional[float] = None
    dw: Optional[float] = None

    @property
    def real(self):
        return np.real(self.chi)

    @property
    def imag(self):
        return np.imag(self.chi)


def chi_analytic(dp, ds, dw, ws, ww, g12, g23, g34, kappa) -> Susceptibility:
    """Weak-probe, unpumped susceptibility of the four-level ladder.

    chi = kappa (i d3 g1 - |ww|^2) / (d3 (g1 g2 + |ws|^2) + i g2 |ww|^2)

    with d3 = dp + ds - dw, g2 = G12/2 - i dp, g1 = (G23 + G34)/2 - i (dp + ds).
    For ww = 0 the common factor d3 is cancelled, leaving i kappa g1 / (g1 g2 + |ws|^2).
    Broadcasts over array arguments.
    """
    if not (g12 > 0 and g23 > 0 and g34 > 0):
        raise DomainError("decay rates must be positive")
    dp, ds, dw = (np.asarray(x, dtype=float) for x in (dp, ds, dw))
    d3 = dp + ds - dw
    g2 = 0.5 * g12 - 1j * dp
    g1 = 0.5 * (g23 + g34) - 1j * (dp + ds)
    s2 = np.abs(ws) ** 2
    w2 = np.abs(ww) ** 2
    if w2 == 0.0:
        # d3 cancels: three-level ladder, finite even at d3 = 0
        num = 1j * g1
        den = g1 * g2 + s2
    else:
        num = 1j * d3 * g1 - w2
        den = d3 * (g1 * g2 + s2) + 1j * g2 * w2
    if np.any(np.abs(den) < 1e-300):
        raise SingularityError("susceptibility denominator vanishes")
    chi = kappa * num / den
    if chi.ndim == 0:
        chi = complex(chi)
    return Susceptibility(chi, _scalar(dp), _scalar(ds), _scalar(dw))


def chi_numeric(rho21, wp, kappa) -> Susceptibility:
    """Susceptibility kappa * rho21 / conj(wp) from the steady-state coherence."""
    if wp == 0:
        raise DomainError("probe Rabi frequency must be non-zero")
    return Susceptibility(kappa * rho21 / np.conj(wp))


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else None


@dataclass(frozen=True)
class DressedBasis:
    """Dressed states of levels 2, 3, 4 (vectors over levels 1..4).

    ``perturbative`` maps the labels '0', '+', '-' to the first-order states
    (``None`` outside |ww/ws| <= 0.2); ``exact`` holds the numerical
    eigenvectors of the resonant Hamiltonian, matched to the same labels.
    Energies are eigenvalues of H in rad/s.
    """

    perturbative: Optional[dict]
    exact: dict
    energies: dict


def _fix_phase(vec):
    # |2> component real and non-negative; fall back to the largest component.
    ref = vec[1] if abs(vec[1]) > 1e-12 else vec[np.argmax(np.abs(vec))]
    return vec * (abs(ref) / ref)


def dressed_states(ws, ww) -> DressedBasis:
    if ws == 0:
        raise DomainError("strong Rabi frequency must be non-zero (degenerate basis)")
    from .bloch import hamiltonian_matrix

    ratio = ww / ws
    pert = None
    if abs(ratio) <= PERTURBATIVE_LIMIT:
        unit_s = abs(ws) / ws
        zero = np.array([0, -np.conj(ww) / np.conj(ws), 0, 1], dtype=complex)
        plus = np.array([0, 1, -unit_s, ratio], dtype=complex) / np.sqrt(2)
        minus = np.array([0, 1, unit_s, ratio], dtype=complex) / np.sqrt(2)
        pert = {k: _fix_phase(v / np.linalg.norm(v))
                for k, v in (("0", zero), ("+", plus), ("-", minus))}

    h = hamiltonian_matrix(0.0, ws, ww, n=4)[1:, 1:]
    vals, vecs = np.linalg.eigh(h)
    exact, energies = {}, {}
    # eigh sorts ascending: lower, middle (~0), upper
    for label, k in (("-", 0), ("0", 1), ("+", 2)):
        v = np.concatenate([[0.0], vecs[:, k]])
        exact[label] = _fix_phase(v)
        energies[label] = float(vals[k])
    return DressedBasis(pert, exact, energies)
