import numpy as np
import pytest

from hgawi.atom import GAMMA_12, GAMMA_23, GAMMA_34, GROUND, P1, P2, S1, five_level_scheme, four_level_scheme
from hgawi.bloch import (
    DensityMatrix, SteadyStateBatch, dephasing_matrix, hamiltonian, hamiltonian_matrix,
    linear_response_rho21, liouvillian, steady_state,
)
from hgawi.atom import LaserField
from hgawi.constants import mhz_to_rad
from hgawi.errors import DegenerateSteadyStateError, DomainError, SolverError
from hgawi.response import chi_analytic

from oracles import appendix_rhs, ladder_eit_chi, random_hermitian, two_level_excited

SCHEME = four_level_scheme()
MHZ = mhz_to_rad(1.0)


def _liou(wp=0.0, ws=0.0, ww=0.0, dp=0.0, ds=0.0, dw=0.0, r=0.0, transit=0.0, deph=None,
          scheme=SCHEME):
    h = hamiltonian_matrix(wp, ws, ww, dp, ds, dw, n=scheme.n)
    return liouvillian(scheme, h, pump_rate=r, transit_rate=transit, dephasing=deph)


# --- Hamiltonian -------------------------------------------------------------------

def test_hamiltonian_zero():
    assert not np.any(hamiltonian_matrix())


def test_hamiltonian_layout():
    wp, ws, ww = 1 + 2j, 3 - 1j, 0.5 + 0.25j
    m = -hamiltonian_matrix(wp, ws, ww, dp=5.0, ds=7.0, dw=11.0)
    expected = np.array([
        [-5.0, wp, 0, 0],
        [np.conj(wp), 0, ws, 0],
        [0, np.conj(ws), 7.0, np.conj(ww)],
        [0, 0, ww, 7.0 - 11.0],
    ])
    np.testing.assert_array_equal(m, expected)
    # weak coupling sits in row/column 3-4 of the 1-based layout
    assert m[2, 3] == np.conj(ww) and m[3, 2] == ww


def test_hamiltonian_hermitian():
    h = hamiltonian_matrix(0.3j, 2.0, 1 + 1j, 1.0, -2.0, 3.0)
    np.testing.assert_array_equal(h, h.conj().T)


def test_hamiltonian_from_fields():
    p = LaserField(rabi=1.0, detuning=2.0)
    s = LaserField(rabi=3.0, detuning=4.0, enabled=False)
    w = LaserField(rabi=5.0, detuning=6.0)
    np.testing.assert_array_equal(hamiltonian(p, s, w), hamiltonian_matrix(1.0, 0.0, 5.0, 2.0, 4.0, 6.0))
    with pytest.raises(DomainError):
        hamiltonian(LaserField(detuning=np.inf), s, w)


def test_resonant_eigenvalues_match_dressed_energies():
    ws, ww = MHZ * 30.8, MHZ * 0.5
    vals = np.sort(np.linalg.eigvalsh(hamiltonian_matrix(0.0, ws, ww)[1:, 1:]))
    # exact: 0 and +-sqrt(ws^2 + ww^2)
    np.testing.assert_allclose(vals, [-np.hypot(ws, ww), 0.0, np.hypot(ws, ww)], atol=1e-6)
    assert abs(vals[2] / ws - 1.0) < 2 * (ww / ws) ** 2


# --- Liouvillian versus the printed Bloch equations ----------------------------------------

@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("r", [0.0, 5e3, 3e6])
def test_liouvillian_matches_appendix_equations(seed, r):
    rng = np.random.default_rng(seed)
    wp, ws, ww = (complex(*rng.normal(size=2)) * MHZ for _ in range(3))
    dp, ds, dw = rng.normal(size=3) * 10 * MHZ
    liou = _liou(wp, ws, ww, dp, ds, dw, r=r)
    for _ in range(3):
        rho = random_hermitian(rng, 4)
        got = liou.apply(rho)
        want = appendix_rhs(rho, wp, ws, ww, dp, ds, dw, GAMMA_12, GAMMA_23, GAMMA_34, r)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-9 * np.abs(want).max())


def test_liouvillian_coefficients_term_by_term():
    rng = np.random.default_rng(7)
    wp, ws, ww = (complex(*rng.normal(size=2)) * MHZ for _ in range(3))
    args = (wp, ws, ww, 1.1 * MHZ, -2.3 * MHZ, 0.7 * MHZ)
    gen = _liou(*args).generator
    n = 4
    for i in range(n):
        for j in range(n):
            basis = np.zeros((n, n), dtype=complex)
            basis[i, j] = 1.0
            # appendix_rhs is linear but assumes Hermitian input; use the
            # Hermitian and anti-Hermitian parts separately
            herm = basis + basis.conj().T
            anti = 1j * (basis - basis.conj().T)
            col_h = appendix_rhs(herm, *args, GAMMA_12, GAMMA_23, GAMMA_34)
            col_a = appendix_rhs(anti, *args, GAMMA_12, GAMMA_23, GAMMA_34)
            got_h = (gen @ herm.reshape(-1)).reshape(n, n)
            got_a = (gen @ anti.reshape(-1)).reshape(n, n)
            np.testing.assert_allclose(got_h, col_h, atol=1e-6)
            np.testing.assert_allclose(got_a, col_a, atol=1e-6)


def test_pump_coefficients_on_ground_population():
    r = 5e3
    gen = _liou(r=r).generator
    k11, k22 = GROUND * 5, P1 * 5
    assert gen[k11, k11] == pytest.approx(-r, abs=1e-9)
    assert gen[k11, k22] == pytest.approx(GAMMA_12 + r, rel=1e-15)


def test_trace_preservation():
    rng = np.random.default_rng(1)
    liou = _liou(0.2 * MHZ, 30 * MHZ, 6 * MHZ, 1 * MHZ, 2 * MHZ, 3 * MHZ, r=1e5, transit=2e5,
                 deph=dephasing_matrix(4, 60e3, 60e3, 183e3))
    for _ in range(20):
        rho = random_hermitian(rng, 4)
        out = liou.apply(rho)
        assert abs(np.trace(out)) <= 1e-12 * np.abs(liou.generator).max() * np.abs(rho).max()
        np.testing.assert_allclose(out, out.conj().T, atol=1e-9)


def test_negative_rates_rejected():
    with pytest.raises(DomainError):
        _liou(r=-1.0)
    with pytest.raises(DomainError):
        _liou(transit=-1.0)
    with pytest.raises(DomainError):
        liouvillian(SCHEME, np.zeros((5, 5)))


def test_transit_reinjects_into_ground():
    liou = _liou(transit=3.0)
    rho = np.zeros((4, 4), dtype=complex)
    rho[S1, S1] = 1.0
    out = liou.apply(rho)
    assert out[GROUND, GROUND] == pytest.approx(3.0)
    assert out[S1, S1] == pytest.approx(-3.0 - GAMMA_23 - GAMMA_34)


def test_dephasing_rates():
    g = dephasing_matrix(4, 1.0, 10.0, 100.0)
    pi = np.pi
    assert g[GROUND, P1] == pytest.approx(pi * 1.0)
    assert g[GROUND, S1] == pytest.approx(pi * 11.0)
    assert g[GROUND, P2] == pytest.approx(pi * 111.0)
    assert g[P1, S1] == pytest.approx(pi * 10.0)
    assert g[S1, P2] == pytest.approx(pi * 100.0)
    assert np.all(np.diag(g) == 0) and np.array_equal(g, g.T)


# --- steady state --------------------------------------------------------------------

def test_ground_state_when_lasers_off():
    rho = steady_state(_liou(transit=1e5)).entries
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    np.testing.assert_allclose(rho, expected, atol=1e-14)


def test_degenerate_steady_state():
    # probe only, no transit: the unconnected levels keep whatever they hold
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(_liou(wp=0.2 * MHZ))


@pytest.mark.parametrize("wp_mhz, dp_mhz, transit, deph", [
    (0.21, 0.0, 1.85e5, 0.0),
    (0.21, 1.3, 1.85e5, 0.0),
    (2.0, -0.7, 1.0e4, 0.0),
    (0.5, 0.4, 1.85e5, 1.9e5),
])
def test_two_level_population(wp_mhz, dp_mhz, transit, deph):
    wp, dp = wp_mhz * MHZ, dp_mhz * MHZ
    g = np.zeros((4, 4))
    g[GROUND, P1] = g[P1, GROUND] = deph
    rho = steady_state(_liou(wp=wp, dp=dp, transit=transit, deph=g))
    expected = two_level_excited(wp, dp, GAMMA_12, transit, deph)
    assert rho.populations[P1] == pytest.approx(expected, rel=1e-9)


def test_two_level_oracle_limit():
    # without transit it reduces to the familiar |V|^2 / (d^2 + G^2/4 + 2|V|^2)
    v, d, g = 0.3, 0.2, 1.0
    assert two_level_excited(v, d, g) == pytest.approx(v * v / (d * d + g * g / 4 + 2 * v * v))


def test_steady_state_is_density_matrix():
    liou = _liou(0.2 * MHZ, 30 * MHZ, 6 * MHZ, 1 * MHZ, -3 * MHZ, 2 * MHZ, r=1e5, transit=2e5)
    rho = steady_state(liou)
    rho.check()
    assert np.linalg.norm(liou.apply(rho.entries)) / np.abs(liou.generator).max() < 1e-12


def test_density_matrix_check_rejects():
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.5, 0.6])).check()
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[1.0, 1j], [0.0, 0.0]])).check()
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5])).check()


def test_ladder_eit_limit():
    # ww = 0 reduces to the three-level ladder. Transit keeps 6 3P2 from
    # trapping the population and adds its rate to both coherence widths.
    kappa, t = 7.57e4, 1.85e5
    ws = 30.8 * MHZ
    for dp, ds in [(0.0, 0.0), (3 * MHZ, -1 * MHZ), (-25 * MHZ, 10 * MHZ)]:
        wp = 1e-4 * MHZ
        rho = steady_state(_liou(wp, ws, 0.0, dp, ds, 0.0, transit=t)).entries
        got = kappa * rho[P1, GROUND] / np.conj(wp)
        want = ladder_eit_chi(dp, ds, ws, GAMMA_12 + 2 * t, GAMMA_23 + 2 * t, GAMMA_34, kappa)
        assert got == pytest.approx(want, rel=1e-6)


def test_linear_response_matches_closed_form():
    kappa = 7.57e4
    rng = np.random.default_rng(3)
    for _ in range(20):
        dp, ds, dw = rng.uniform(-30, 30, size=3) * MHZ
        ws, ww = rng.uniform(1, 40) * MHZ, rng.uniform(0.1, 10) * MHZ
        got = kappa * linear_response_rho21(SCHEME, ws, ww, dp, ds, dw)
        want = chi_analytic(dp, ds, dw, ws, ww, GAMMA_12, GAMMA_23, GAMMA_34, kappa).chi
        assert abs(got - want) <= 1e-10 * abs(want)


def _rho21_per_wp(scale, dp=2 * MHZ, transit=1.85e5):
    ws, ww = 30.8 * MHZ, 6.17 * MHZ
    wp = scale * ws
    rho = steady_state(_liou(wp, ws, ww, dp, 0.0, 0.0, transit=transit)).entries
    return rho[P1, GROUND] / np.conj(wp)


@pytest.mark.xfail(strict=True, reason="rho21/wp carries a quadratic probe correction of "
                   "~4e-4 at wp/ws = 1e-3; the 1e-6 bound needs wp/ws <~ 5e-5")
def test_probe_linearity_literal_bound():
    a, b = _rho21_per_wp(1e-3), _rho21_per_wp(1e-4)
    assert abs(a - b) <= 1e-6 * abs(b)


@pytest.mark.parametrize("dp_mhz", [2.0, 10.0, 40.0])
def test_probe_nonlinearity_is_second_order(dp_mhz):
    v3, v4, v5 = (_rho21_per_wp(s, dp=dp_mhz * MHZ) for s in (1e-3, 1e-4, 1e-5))
    ratio = abs(v3 - v4) / abs(v4 - v5)
    assert ratio == pytest.approx(100.0, rel=0.02)
    assert abs(v4 - v5) <= 1e-5 * abs(v5)


# --- batched solver --------------------------------------------------------------------

def test_batch_matches_dense_solver():
    scheme = five_level_scheme()
    scheme = type(scheme)(scheme.labels, scheme.decays,
                          scheme.trap_extension.__class__(4, S1, 2.1e7, 3e5))
    deph = dephasing_matrix(5, 60e3, 60e3, 183e3)
    wp, ws, ww = 0.21 * MHZ, 30.8 * MHZ, 6.17 * MHZ
    batch = SteadyStateBatch(scheme, wp, ws, ww, transit_rate=1.85e5, dephasing=deph, pumped=True)
    dps = np.array([-3.0, 0.0, 1.5]) * MHZ
    dss = np.array([0.5, -1.0, 2.0]) * MHZ
    dws = np.array([1.0, 0.0, -4.0]) * MHZ
    rs = np.array([0.0, 1e5, 2e6])
    x = batch.solve(dps, dss, dws, rs)
    for k in range(3):
        h = hamiltonian_matrix(wp, ws, ww, dps[k], dss[k], dws[k], n=5)
        rho = steady_state(liouvillian(scheme, h, rs[k], 1.85e5, deph)).entries
        for (i, j) in [(P1, GROUND), (GROUND, GROUND), (P2, P2), (4, 4), (S1, P1)]:
            assert x[k, batch.element(i, j)] == pytest.approx(rho[i, j], rel=1e-9, abs=1e-15)


def test_batch_drops_uncoupled_elements():
    batch = SteadyStateBatch(five_level_scheme(), 1.0, 1.0, 1.0, transit_rate=1.0)
    # the trap level has no coherence with anything
    assert batch.element(4, 0) is None
    assert batch.element(4, 4) is not None


def test_batch_reports_singular_system():
    batch = SteadyStateBatch(SCHEME, 0.2 * MHZ, 0.0, 0.0, transit_rate=0.0)
    with pytest.raises(SolverError) as info:
        batch.solve(np.zeros(3), np.zeros(3), np.zeros(3))
    assert info.value.node is not None or "singular" in str(info.value)
