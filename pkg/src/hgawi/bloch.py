"""Master equation of the driven mercury level scheme and its steady state.

Density matrices are vectorised row-major: ``vec(rho)[i * n + j] = rho[i, j]``.
With that layout ``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.

The Hamiltonian is kept in rad/s (hbar factored out). In the basis of the
levels 0..3 it reads ``-M`` with

    M = [[-dp,  wp,        0,        0      ],
         [ wp*, 0,         ws,       0      ],
         [ 0,   ws*,       ds,       ww*    ],
         [ 0,   0,         ww,       ds - dw]]

so that ``-i [H, rho]`` together with the radiative damping yields the
standard ladder Bloch equations with three-photon detuning dp + ds - dw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .atom import GROUND, P1, P2, S1
from .errors import DegenerateSteadyStateError, DomainError, SolverError

# Signed laser content of each level's phase (probe, strong, weak). Level k
# of the ladder picks up the phases of every beam between it and the ground.
_LEVEL_PHASES = {GROUND: (0, 0, 0), P1: (1, 0, 0), S1: (1, 1, 0), P2: (1, 1, -1)}


def hamiltonian_matrix(wp=0.0, ws=0.0, ww=0.0, dp=0.0, ds=0.0, dw=0.0, n=4):
    """Hamiltonian in rad/s for Rabi frequencies ``w*`` and detunings ``d*``."""
    m = np.zeros((n, n), dtype=complex)
    m[0, 0] = -dp
    m[0, 1] = wp
    m[1, 0] = np.conj(wp)
    m[1, 2] = ws
    m[2, 1] = np.conj(ws)
    m[2, 2] = ds
    m[2, 3] = np.conj(ww)
    m[3, 2] = ww
    m[3, 3] = ds - dw
    return -m


def hamiltonian(probe, strong, weak, n=4):
    """Hamiltonian for three LaserFields (detunings already Doppler shifted)."""
    for f in (probe, strong, weak):
        if not np.isfinite(f.detuning):
            raise DomainError("detunings must be finite")
    return hamiltonian_matrix(probe.active_rabi, strong.active_rabi, weak.active_rabi,
                              probe.detuning, strong.detuning, weak.detuning, n=n)


def dephasing_matrix(n, probe_fwhm=0.0, strong_fwhm=0.0, weak_fwhm=0.0):
    """Extra coherence decay rates (rad/s) from laser phase diffusion.

    A laser with Lorentzian FWHM ``f`` (Hz) has a field coherence decaying at
    pi*f; every density-matrix coherence whose rotating-frame phase contains
    that laser's phase decays at that rate on top of its radiative width.
    """
    rates = np.pi * np.array([probe_fwhm, strong_fwhm, weak_fwhm], dtype=float)
    g = np.zeros((n, n))
    for i, pi_ in _LEVEL_PHASES.items():
        for j, pj in _LEVEL_PHASES.items():
            if i < n and j < n and i != j:
                g[i, j] = sum(r * abs(a - b) for r, a, b in zip(rates, pi_, pj))
    return g


def _commutator_super(h):
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _dissipator_super(n, upper, lower, rate):
    """Lindblad dissipator for the jump |lower><upper| at ``rate``."""
    c = np.zeros((n, n))
    c[lower, upper] = 1.0
    cdc = c.T @ c
    eye = np.eye(n)
    return rate * (np.kron(c, c) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))


def _transit_super(n, rate):
    s = -rate * np.eye(n * n, dtype=complex)
    for k in range(n):
        s[0, k * n + k] += rate
    return s


def _dephasing_super(g):
    return -np.diag(g.reshape(-1)).astype(complex)


def _incoherent_super(scheme, pump_rate, transit_rate, dephasing=None):
    """All non-Hamiltonian parts of the generator."""
    n = scheme.n
    s = np.zeros((n * n, n * n), dtype=complex)
    for upper, lower, rate in scheme.decays:
        extra = pump_rate if (upper, lower) == (P1, GROUND) else 0.0
        s += _dissipator_super(n, upper, lower, rate + extra)
        if extra:
            s += _dissipator_super(n, lower, upper, extra)
    trap = scheme.trap_extension
    if trap is not None:
        s += _dissipator_super(n, trap.source, trap.index, trap.decay_rate)
        if trap.repump_rate:
            s += _dissipator_super(n, trap.index, trap.source, trap.repump_rate)
    if transit_rate:
        s += _transit_super(n, transit_rate)
    if dephasing is not None:
        s += _dephasing_super(np.asarray(dephasing, dtype=float))
    return s


@dataclass(frozen=True)
class Liouvillian:
    """Linear generator acting on row-major vectorised density matrices."""

    dimension: int
    generator: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def apply(self, rho):
        n = self.dimension
        return (self.generator @ np.asarray(rho).reshape(-1)).reshape(n, n)


def liouvillian(scheme, h, pump_rate=0.0, transit_rate=0.0, dephasing=None) -> Liouvillian:
    """Full generator: -i[H, .] + radiative and pump dissipators + transit.

    The incoherent pump on 1-2 enters as a mean photon number r/Gamma_12,
    i.e. downward rate Gamma_12 + r and upward rate r. Transit relaxation
    removes every element at ``transit_rate`` and re-injects the lost
    population into the ground state.
    """
    if pump_rate < 0 or transit_rate < 0:
        raise DomainError("pump and transit rates must be non-negative")
    h = np.asarray(h, dtype=complex)
    n = scheme.n
    if h.shape != (n, n):
        raise DomainError(f"Hamiltonian shape {h.shape} does not match {n} levels")
    gen = _commutator_super(h) + _incoherent_super(scheme, pump_rate, transit_rate, dephasing)
    meta = {"pump_rate": pump_rate, "transit_rate": transit_rate,
            "decays": scheme.decays, "trap": scheme.trap_extension}
    return Liouvillian(n, gen, meta)


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    labels: tuple[str, ...] = ()

    @property
    def n(self):
        return self.entries.shape[0]

    def __getitem__(self, ij):
        return self.entries[ij]

    @property
    def populations(self):
        return np.real(np.diag(self.entries))

    def check(self, herm_tol=1e-10, trace_tol=1e-10, psd_tol=1e-8):
        r = self.entries
        if np.max(np.abs(r - r.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(r) - 1.0) > trace_tol:
            raise ValueError("density matrix trace differs from 1")
        if np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T))) < -psd_tol:
            raise ValueError("density matrix has negative eigenvalues")
        return self


def steady_state(liou: Liouvillian, tol: float = 1e-9, labels: Sequence[str] = ()) -> DensityMatrix:
    """Unique stationary state of ``liou`` normalised to unit trace.

    Raises DegenerateSteadyStateError if the kernel is more than
    one-dimensional.
    """
    n = liou.dimension
    gen = liou.generator
    sv = np.linalg.svd(gen, compute_uv=False)
    if sv[0] == 0.0 or sv[-2] <= 1e-11 * sv[0]:
        raise DegenerateSteadyStateError(
            f"stationary state is not unique (singular values {sv[-2]:.3g}, {sv[-1]:.3g})")
    a = gen.copy()
    a[0, :] = 0.0
    a[0, np.arange(n) * (n + 1)] = 1.0
    b = np.zeros(n * n, dtype=complex)
    b[0] = 1.0
    x = np.linalg.solve(a, b)
    rho = x.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.linalg.norm(gen @ rho.reshape(-1)) / sv[0]
    if residual > tol:
        raise DegenerateSteadyStateError(f"steady-state residual {residual:.3g} above {tol:g}")
    return DensityMatrix(rho, tuple(labels))


def linear_response_rho21(scheme, ws, ww, dp, ds=0.0, dw=0.0, transit_rate=0.0,
                          dephasing=None) -> complex:
    """d rho[1, 0] / d wp at wp = 0, for real probe Rabi frequency.

    First-order perturbation of the steady state: with L = L0 + wp * L1 and
    L0 rho0 = 0, the probe-linear part obeys L0 rho1 = -L1 rho0, Tr rho1 = 0.
    Exact in the weak-probe limit, independent of the full nonlinear solve.
    """
    n = scheme.n
    l0 = liouvillian(scheme, hamiltonian_matrix(0.0, ws, ww, dp, ds, dw, n=n),
                     transit_rate=transit_rate, dephasing=dephasing).generator
    l1 = _commutator_super(hamiltonian_matrix(1.0, n=n))
    rho0 = steady_state(Liouvillian(n, l0)).entries.reshape(-1)
    a = l0.copy()
    a[0, :] = 0.0
    a[0, np.arange(n) * (n + 1)] = 1.0
    b = -(l1 @ rho0)
    b[0] = 0.0
    rho1 = np.linalg.solve(a, b)
    return complex(rho1[P1 * n + GROUND])


class SteadyStateBatch:
    """Vectorised steady-state solver for many velocity classes at once.

    The generator is affine in the three detunings and the pump rate:
    ``L = L0 + dp*Dp + ds*Ds + dw*Dw + r*R`` with diagonal ``D*``. Matrix
    elements that are not connected to any population are dropped, since
    they vanish identically in the steady state.
    """

    def __init__(self, scheme, wp, ws, ww, transit_rate=0.0, dephasing=None,
                 pumped=False, tol=1e-9):
        n = scheme.n
        self.n = n
        self.tol = tol
        h0 = hamiltonian_matrix(wp, ws, ww, n=n)
        l0 = _commutator_super(h0) + _incoherent_super(scheme, 0.0, transit_rate, dephasing)
        diag = []
        for k in range(3):
            d = [0.0, 0.0, 0.0]
            d[k] = 1.0
            hd = hamiltonian_matrix(0, 0, 0, *d, n=n)
            diag.append(np.diag(_commutator_super(hd)).copy())
        self.pumped = pumped
        if pumped:
            rr = (_dissipator_super(n, P1, GROUND, 1.0)
                  + _dissipator_super(n, GROUND, P1, 1.0)).astype(complex)
        else:
            rr = np.zeros_like(l0)
        pattern = (np.abs(l0) + np.abs(rr) + sum(np.abs(np.diag(d)) for d in diag)) > 0
        keep = _population_component(pattern, n)
        self.keep = keep
        self.l0 = l0[np.ix_(keep, keep)]
        self.rr = rr[np.ix_(keep, keep)]
        self.dvec = np.stack([d[keep] for d in diag])
        pops = [k * (n + 1) for k in range(n)]
        self.trace_row = np.isin(keep, pops).astype(complex)
        self.index = {int(k): i for i, k in enumerate(keep)}
        self.scale = max(np.abs(self.l0).max(), 1.0)

    def element(self, i, j):
        """Position of rho[i, j] in the reduced vector (None if identically 0)."""
        return self.index.get(i * self.n + j)

    def solve(self, dp, ds, dw, r=None):
        """Steady states for arrays of detunings (and pump rates).

        Returns an array of shape (..., m) of reduced vectorised states.
        """
        dp, ds, dw = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (dp, ds, dw)))
        shape = dp.shape
        dp, ds, dw = dp.ravel(), ds.ravel(), dw.ravel()
        a = np.repeat(self.l0[None], dp.size, axis=0)
        m = a.shape[1]
        diag = dp[:, None] * self.dvec[0] + ds[:, None] * self.dvec[1] + dw[:, None] * self.dvec[2]
        idx = np.arange(m)
        a[:, idx, idx] += diag
        if self.pumped and r is not None:
            r = np.broadcast_to(np.asarray(r, dtype=float), shape).ravel()
            a += r[:, None, None] * self.rr[None]
        row0 = a[:, 0, :].copy()
        a[:, 0, :] = self.trace_row
        b = np.zeros((dp.size, m, 1), dtype=complex)
        b[:, 0, 0] = 1.0
        try:
            x = np.linalg.solve(a, b)[..., 0]
        except np.linalg.LinAlgError as exc:
            k = _first_singular(a, b)
            raise SolverError(
                f"singular steady-state system at detunings "
                f"({dp[k]:.6g}, {ds[k]:.6g}, {dw[k]:.6g}) rad/s", node=k) from exc
        lx = np.einsum("bij,bj->bi", a, x)
        lx[:, 0] = np.einsum("bj,bj->b", row0, x)
        res = np.abs(lx).max(axis=1) / self.scale
        bad = ~np.isfinite(res) | (res > self.tol)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise SolverError(
                f"steady-state residual {res[k]:.3g} at detunings "
                f"({dp[k]:.6g}, {ds[k]:.6g}, {dw[k]:.6g}) rad/s", node=k)
        return x.reshape(shape + (m,))


def _first_singular(a, b):
    for k in range(a.shape[0]):
        try:
            np.linalg.solve(a[k], b[k])
        except np.linalg.LinAlgError:
            return k
    return 0


def _population_component(pattern, n):
    """Indices connected (undirected) to any population in the sparsity graph."""
    adj = pattern | pattern.T
    seen = np.zeros(n * n, dtype=bool)
    stack = [k * (n + 1) for k in range(n)]
    for s in stack:
        seen[s] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i] & ~seen):
            seen[j] = True
            stack.append(int(j))
    return np.flatnonzero(seen)
