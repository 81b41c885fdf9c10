import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from ampgate.calibration import (RamseyModel, SqueezeCalib, contrast_half_time, fit_ramsey,
                                 fit_squeeze_param, population_cutoff, ramsey_populations,
                                 sideband_signal, squeeze_signal, squeezed_thermal_populations,
                                 squeezed_vacuum_populations, thermal_populations)
from ampgate.errors import IdentifiabilityWarning
from ampgate.model import TWO_PI, from_khz


def dense_squeezed_populations(r, nbar, dim=220):
    # oracle: S(r) rho_th S(r)^dag in a truncated Fock space
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    s = expm(0.5 * r * (a @ a - a.T @ a.T))
    n = np.arange(dim)
    rho = np.diag(thermal_populations(nbar, dim - 1)) if nbar > 0 else np.diag((n == 0) * 1.0)
    return np.real(np.diag(s @ rho @ s.T))


def test_squeezed_vacuum_examples():
    p = squeezed_vacuum_populations(1.0, 10)
    assert p[0] == pytest.approx(1 / math.cosh(1.0), rel=1e-12)
    assert p[0] == pytest.approx(0.648, abs=1e-3)
    assert p[2] == pytest.approx(0.188, abs=1e-3)
    assert np.all(p[1::2] == 0)
    np.testing.assert_array_equal(squeezed_vacuum_populations(0.0, 5), [1, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("r", [0.3, 1.0, 1.56])
def test_squeezed_vacuum_moments_and_tail(r):
    n_max = population_cutoff(r)
    p, tail = squeezed_vacuum_populations(r, n_max, return_tail=True)
    n = np.arange(n_max + 1)
    assert tail < 1e-6
    assert p @ n == pytest.approx(math.sinh(r) ** 2, rel=1e-5)


@pytest.mark.parametrize("r,nbar", [(0.5, 0.0), (0.8, 0.3), (1.2, 0.3), (0.0, 0.7)])
def test_squeezed_thermal_against_dense_oracle(r, nbar):
    ref = dense_squeezed_populations(r, nbar)
    got = squeezed_thermal_populations(r, nbar, 60)
    np.testing.assert_allclose(got, ref[:61], atol=1e-10)


def test_squeezed_thermal_limits_and_mean():
    np.testing.assert_allclose(squeezed_thermal_populations(0.0, 0.4, 80),
                               thermal_populations(0.4, 80), atol=1e-14)
    r, nbar = 1.1, 0.3
    n_max = population_cutoff(r, nbar)
    p = squeezed_thermal_populations(r, nbar, n_max)
    assert 1 - p.sum() < 1e-6
    assert p @ np.arange(n_max + 1) == pytest.approx((nbar + 0.5) * math.cosh(2 * r) - 0.5,
                                                     rel=1e-5)


def test_squeeze_calib_rate():
    c = SqueezeCalib(xi=1.56, duration=5e-6, omega_sb=from_khz(20))
    assert c.g / TWO_PI == pytest.approx(49.66e3, rel=1e-3)
    with pytest.raises(ValueError):
        SqueezeCalib(xi=-1, duration=1e-6, omega_sb=1.0)


def test_sideband_signal_basics():
    t = np.linspace(0, 200e-6, 7)
    omega = from_khz(10)
    np.testing.assert_allclose(sideband_signal([1.0], omega, t), np.sin(omega * t / 2) ** 2)
    with pytest.raises(ValueError):
        sideband_signal([0.7, 0.7], omega, t)


@pytest.mark.parametrize("xi,nbar", [(0.4, 0.0), (1.56, 0.0), (1.0, 0.3)])
def test_squeeze_fit_round_trip(xi, nbar):
    omega = from_khz(12)
    t = np.linspace(0, 400e-6, 81)
    y = squeeze_signal(xi, omega, t, nbar)
    fit = fit_squeeze_param(t, y, omega, duration=5e-6, nbar=nbar)
    assert fit.xi == pytest.approx(xi, abs=1e-6)
    assert fit.g == pytest.approx(xi / 5e-6, rel=1e-5)


def test_squeeze_fit_noisy_and_decimated():
    omega = from_khz(12)
    t = np.linspace(0, 400e-6, 81)
    rng = np.random.default_rng(4)
    y = squeeze_signal(1.3, omega, t) + rng.normal(0, 0.02, t.size)
    full = fit_squeeze_param(t, y, omega, 5e-6, sigma=0.02)
    half = fit_squeeze_param(t[::2], y[::2], omega, 5e-6, sigma=0.02)
    assert abs(full.xi - 1.3) < 4 * full.xi_err
    assert abs(half.xi - 1.3) < 4 * half.xi_err
    assert half.xi_err > full.xi_err


def test_squeeze_fit_warns_on_short_span():
    omega = from_khz(12)
    t = np.linspace(0, 10e-6, 11)
    with pytest.warns(IdentifiabilityWarning):
        fit_squeeze_param(t, squeeze_signal(0.5, omega, t), omega, 5e-6)


def test_ramsey_closed_form_against_sampling():
    model = RamseyModel(from_khz(4.59), from_khz(0.47))
    t = np.linspace(0, 1e-3, 41)
    exact = ramsey_populations(model, t)
    mc = ramsey_populations(model, t, n_draws=200_000, seed=2)
    np.testing.assert_allclose(mc.p_dd, exact.p_dd, atol=5e-3)
    np.testing.assert_allclose(mc.parity, exact.parity, atol=5e-3)


def test_ramsey_limits():
    mean = from_khz(4.59)
    t = np.linspace(0, 1e-3, 33)
    cur = ramsey_populations(RamseyModel(mean, 0.0), t)
    np.testing.assert_allclose(cur.p_dd, np.sin(mean * t / 2) ** 4, atol=1e-14)
    np.testing.assert_allclose(cur.parity, np.cos(mean * t) ** 2, atol=1e-14)
    zero = ramsey_populations(RamseyModel(mean, from_khz(0.47)), [0.0])
    assert zero.p_dd[0] == 0.0 and zero.parity[0] == 1.0
    with pytest.raises(ValueError):
        RamseyModel(1.0, -1.0)


def test_contrast_half_time():
    sigma = from_khz(0.47)
    t_half = contrast_half_time(sigma)
    assert t_half == pytest.approx(0.3987e-3, rel=1e-3)
    assert math.exp(-0.5 * (sigma * t_half) ** 2) == pytest.approx(0.5)


@pytest.mark.parametrize("with_parity", [False, True])
def test_ramsey_fit_round_trip(with_parity):
    truth = RamseyModel(from_khz(4.59), from_khz(0.47))
    t = np.linspace(0, 1e-3, 201)
    cur = ramsey_populations(truth, t)
    fit = fit_ramsey(t, cur.p_dd, cur.parity if with_parity else None)
    assert fit.mean == pytest.approx(truth.mean, rel=1e-8)
    assert fit.sigma == pytest.approx(truth.sigma, rel=1e-6)


def test_ramsey_fit_decimation():
    truth = RamseyModel(from_khz(4.59), from_khz(0.47))
    t = np.linspace(0, 1e-3, 201)
    rng = np.random.default_rng(8)
    p = rng.binomial(200, ramsey_populations(truth, t).p_dd) / 200
    for step in (1, 2, 4):
        fit = fit_ramsey(t[::step], p[::step])
        assert abs(fit.mean - truth.mean) / TWO_PI < 0.05e3
        assert abs(fit.sigma - truth.sigma) / TWO_PI < 0.08e3
