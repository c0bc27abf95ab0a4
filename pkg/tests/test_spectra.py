import math
from dataclasses import replace

import numpy as np
import pytest

from hgawi.doppler import DopplerAverager
from hgawi.errors import DomainError, FitError
from hgawi.spectra import (
    CSV_HEADER, AwiGrid, Spectrum, awi_config, awi_preset, awi_sweep, calibrate_density,
    lorentzian, lorentzian_fit, peak_transmission, scan, sidecar_path,
    transmission, two_grid,
)

LAMBDA = 253.7e-9


def test_transmission_basics():
    assert transmission(0.0, LAMBDA, 2e-3) == 1.0
    assert transmission(-1e-5, LAMBDA, 2e-3) > 1.0
    assert transmission(1e-5, LAMBDA, 2e-3) == pytest.approx(math.exp(-2 * math.pi / LAMBDA * 1e-5 * 2e-3))
    with pytest.raises(DomainError):
        transmission(0.0, LAMBDA, 0.0)


# --- density calibration ------------------------------------------------------------------

def test_calibrated_reference_transmission(preset5):
    avg = DopplerAverager(preset5.reference())
    t = transmission(avg.chi(0.0).imag, LAMBDA, preset5.cell.path_length)
    assert preset5.cell.kappa > 0
    assert t == pytest.approx(0.680, abs=1e-4)


def test_calibration_ignores_stored_kappa(preset5):
    other = replace(preset5, cell=replace(preset5.cell, kappa=123.0))
    assert calibrate_density(other) == pytest.approx(preset5.cell.kappa, rel=1e-12)


def test_calibration_limits(preset5):
    with pytest.raises(DomainError):
        calibrate_density(preset5, 1.0)
    with pytest.raises(DomainError):
        calibrate_density(preset5, 0.0)
    kappas = [calibrate_density(preset5, 1 - eps) for eps in (1e-2, 1e-4, 1e-6)]
    assert kappas[0] > kappas[1] > kappas[2] > 0
    assert kappas[2] < 1e-4 * preset5.cell.kappa


@pytest.mark.xfail(strict=True, reason="the calibrated density is 4.1x below the quoted kappa; "
                   "the two anchors are not mutually consistent in this model")
def test_calibrated_kappa_near_quoted_value(preset5):
    assert 7.57e4 / 3 <= preset5.cell.kappa <= 3 * 7.57e4


# --- spectra ------------------------------------------------------------------------------

def test_config_a_difference_vanishes(central_spectra):
    s = central_spectra["a"]
    assert np.max(np.abs(s.diff)) <= 1e-12


def test_config_b_reduces_absorption(central_spectra):
    assert np.all(central_spectra["b"].diff > 0)


def test_config_c_narrow_peak_at_center(central_spectra):
    s = central_spectra["c"]
    k = int(np.argmax(s.diff))
    assert abs(s.detuning[k]) <= 0.25e6
    fit = lorentzian_fit(s)
    assert fit.amplitude > 0 and fit.fwhm < 2e6


def test_scan_validation(preset5):
    with pytest.raises(DomainError):
        scan(preset5, 0.0, 1.0, 1)
    with pytest.raises(DomainError):
        scan(preset5, 1.0, 0.0, 5)


def test_two_grid_union():
    g = two_grid(10e6, 11, 2e6, 5, center_hz=0.5e6)
    assert np.all(np.diff(g) > 0)
    assert 0.5e6 in g and -0.5e6 in g and 1.5e6 in g and 5e6 in g
    assert g.size == np.unique(np.r_[np.linspace(-5e6, 5e6, 11), np.linspace(-0.5e6, 1.5e6, 5)]).size
    assert two_grid(1e6, 0, 1e6, 3).tolist() == [-0.5e6, 0.0, 0.5e6]


def test_csv_round_trip(tmp_path):
    x = np.linspace(-1, 1, 7) * 1e6
    cols = [x] + [np.random.default_rng(k).normal(size=7) for k in range(5)]
    s = Spectrum(*cols)
    path = s.write_csv(tmp_path / "s.csv", sidecar="[meta]\nschema_version = 1\n")
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    back = Spectrum.read_csv(path)
    for a, b in zip(s.columns(), back.columns()):
        assert np.array_equal(a, b)
    assert sidecar_path(path).read_text().startswith("[meta]")
    assert sidecar_path(path).name == "s.csv.ini"


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError, match="header"):
        Spectrum.read_csv(bad)
    bad.write_text(",".join(CSV_HEADER) + "\n1,2,3,x,5,6\n")
    with pytest.raises(DomainError):
        Spectrum.read_csv(bad)
    bad.write_text(",".join(CSV_HEADER) + "\n")
    with pytest.raises(DomainError):
        Spectrum.read_csv(bad)


def test_spectrum_must_increase():
    with pytest.raises(DomainError):
        Spectrum(*(np.array([1.0, 0.0]) for _ in range(6)))


def test_window():
    s = Spectrum(*(np.arange(10.0) for _ in range(6)))
    w = s.window(2.0, 4.0)
    assert w.detuning.tolist() == [2.0, 3.0, 4.0]


# --- fitting ------------------------------------------------------------------------------

def test_fit_recovers_synthetic_lorentzian():
    x = np.linspace(-5e6, 5e6, 401)
    y = lorentzian(x, 0.02, 0.1e6, 1e6, 1e-3, 2e-11)
    fit = lorentzian_fit(x, y)
    assert fit.fwhm / 1e6 == pytest.approx(1.0, abs=1e-4)
    assert fit.center == pytest.approx(0.1e6, abs=1.0)
    assert fit.amplitude == pytest.approx(0.02, rel=1e-3)
    assert fit.offset == pytest.approx(1e-3, rel=1e-3)
    assert fit.slope == pytest.approx(2e-11, rel=1e-3)


def test_fit_accepts_window_and_spectrum():
    x = np.linspace(-10e6, 10e6, 201)
    y = lorentzian(x, 1.0, 0.0, 1e6) + lorentzian(x, 3.0, 8e6, 1e6)
    s = Spectrum(x, y, y, y, y, y)
    fit = lorentzian_fit(s, window=(-5e6, 5e6))
    # the neighbour's tail leaks in and shifts the centre slightly
    assert fit.center == pytest.approx(0.0, abs=1e4)


def test_fit_unbiased_under_noise():
    x = np.linspace(-5e6, 5e6, 201)
    clean = lorentzian(x, 1.0, 0.0, 0.8e6, 0.1, 0.0)
    widths = []
    for seed in range(100):
        noise = np.random.default_rng(seed).normal(scale=0.01, size=x.size)
        widths.append(lorentzian_fit(x, clean + noise).fwhm)
    assert np.mean(widths) == pytest.approx(0.8e6, rel=0.02)


def test_fit_needs_samples():
    with pytest.raises(DomainError):
        lorentzian_fit(np.arange(9.0), np.ones(9))


def test_fit_flat_input_warns():
    x = np.linspace(-1, 1, 50)
    with pytest.warns(RuntimeWarning, match="no peak"):
        fit = lorentzian_fit(x, np.full_like(x, 0.3))
    assert abs(fit.amplitude) < 1e-9


def test_fit_failure_carries_last_iterate():
    x = np.linspace(-5e6, 5e6, 101)
    y = lorentzian(x, 1.0, 1e6, 0.5e6)
    with pytest.raises(FitError) as info:
        lorentzian_fit(x, y, max_iter=2)
    assert info.value.last is not None and math.isfinite(info.value.last.center)


# --- pump sweeps --------------------------------------------------------------------------

def test_awi_config_switches_pump(preset5):
    cfg = awi_config(preset5, 0.05, 2e6, rate_scale=1e-7)
    assert cfg.pump.enabled and cfg.pump.power == 0.05 and cfg.pump.spectral_fwhm == 2e6
    assert cfg.pump.rate_scale == 1e-7


def test_awi_preset_probe():
    cfg = awi_preset()
    assert cfg.probe.power == 15e-6
    assert cfg.probe.rabi == pytest.approx(2 * math.pi * 0.175e6)
    assert cfg.pump.enabled


def test_zero_pump_power_is_no_op():
    cfg = awi_preset()
    off = replace(cfg, pump=replace(cfg.pump, enabled=False))
    on = awi_config(cfg, 0.0, 30e6)
    assert peak_transmission(on, points=11) == peak_transmission(off, points=11)


def test_awi_sweep_validation():
    with pytest.raises(DomainError):
        awi_sweep(awi_preset(), [], [1e6])


def test_awi_grid_csv(tmp_path):
    g = AwiGrid(np.array([0.01, 0.02]), np.array([1e6]), np.array([[0.9], [1.01]]))
    assert g.awi.tolist() == [[False], [True]]
    text = g.write_csv(tmp_path / "g.csv").read_text().splitlines()
    assert text[0] == "power_w,fwhm_hz,max_transmission,awi"
    assert text[2].endswith(",1")


@pytest.mark.slow
def test_power_monotone_at_wide_pump():
    cfg = awi_preset()
    grid = awi_sweep(cfg, [0.0, 20e-3, 50e-3, 100e-3], [100e6], points=21)
    assert np.all(np.diff(grid.max_t[:, 0]) >= 0)
