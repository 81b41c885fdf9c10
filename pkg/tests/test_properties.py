import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ampgate.analysis import fit_quad_surface
from ampgate.calibration import population_cutoff, squeezed_thermal_populations
from ampgate.design import bogoliubov_r, gain, gain_from_r, loop_phase, solve_gate
from ampgate.dynamics import (IntegratorOptions, draw_realization, fock_steps_per_loop,
                              integrate_uv, noiseless, propagate_fock, zeeman_bound)
from ampgate.model import FidelitySample, InteractionParams, NoiseParams, from_hz, from_khz
from synthetic import TRUTH, grid_samples

OMEGA0 = from_khz(1.46)
slow = settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@given(st.floats(0.0, 10.0))
def test_gain_product_is_one(r):
    assert abs(gain_from_r(r, 0.0) * gain_from_r(r, math.pi) - 1.0) < 1e-12


@given(st.floats(1e3, 1e6), st.floats(0.0, 0.99), st.floats(-math.pi, math.pi))
def test_gain_forms_agree(delta, ratio, theta):
    g = ratio * delta
    assert math.isclose(gain(delta, g, theta), gain_from_r(bogoliubov_r(delta, g), theta),
                        rel_tol=1e-9)
    assert math.isclose(gain(-delta, g, theta), gain(delta, g, theta + math.pi), rel_tol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 80.0), st.floats(-math.pi, math.pi))
def test_solver_hits_target_phase(g_khz, theta):
    g = from_khz(g_khz)
    sol = solve_gate(OMEGA0, g, theta)
    assert math.isclose(loop_phase(OMEGA0, sol.delta, g, theta), math.pi / 2, rel_tol=1e-9)
    assert math.isclose(sol.tau * sol.delta_prime, 2 * math.pi, rel_tol=1e-12)


@slow
@given(st.floats(0.0, 0.95), st.floats(-math.pi, math.pi), st.floats(1.0, 20.0))
def test_symplectic_norm_property(ratio, theta, delta_khz):
    delta = from_khz(delta_khz)
    p = InteractionParams(OMEGA0, g=ratio * delta, delta=delta, theta=theta)
    traj = integrate_uv(p, noiseless(), 2 * math.pi / p.delta_prime)
    assert np.max(np.abs(traj.symplectic_norm() - 1.0)) < 1e-8


@slow
# |theta| <= 2 keeps the noisy runs clear of the parametric instability near theta = pi
@given(st.floats(0.0, 30.0), st.floats(-2.0, 2.0), st.integers(0, 2 ** 31))
def test_fock_unitarity_property(g_khz, theta, seed):
    g = from_khz(g_khz)
    sol = solve_gate(OMEGA0, g, theta)
    p = sol.params(OMEGA0, g, theta)
    noise = NoiseParams(gamma=from_hz(5.2), sigma_delta=from_hz(100), zeeman_mean=from_khz(4.59),
                        zeeman_sigma=from_khz(0.47), zeeman_interval=40e-6,
                        zeeman_compensated=False)
    run = draw_realization(noise, seed, horizon=sol.tau)
    h_max = 1.5 * float(np.max(np.abs(integrate_uv(p, noiseless(), sol.tau).h)))
    steps = fock_steps_per_loop(p, h_max, zeeman_bound(noise), 30)
    traj = integrate_uv(p, run, sol.tau, IntegratorOptions(steps_per_loop=steps))
    res = propagate_fock(p, run, traj, truncation=30, warn=False)
    assert abs(res.state.norm() - 1.0) < 1e-8


@given(st.floats(-50e-6, 50e-6), st.floats(0.1, 10.0), st.integers(0, 1000))
def test_fit_equivariance_property(shift, scale, seed):
    base = grid_samples(noise=0.005, rng=np.random.default_rng(seed))
    fit = fit_quad_surface(base)
    moved = fit_quad_surface([FidelitySample(s.t_i + shift + 100e-6, s.delta_prime,
                                             s.fidelity) for s in base])
    assert math.isclose(moved.t_est, fit.t_est + shift + 100e-6, rel_tol=1e-9)
    scaled = fit_quad_surface([FidelitySample(s.t_i, s.delta_prime, s.fidelity * scale / 10)
                               for s in base])
    np.testing.assert_allclose(scaled.a[:4], fit.a[:4] * scale / 10, rtol=1e-7)
    np.testing.assert_allclose(scaled.a[4:], fit.a[4:], rtol=1e-9)


@given(st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_squeezed_populations_are_a_distribution(r, nbar):
    p = squeezed_thermal_populations(r, nbar, population_cutoff(r, nbar))
    assert np.all(p >= 0)
    assert 1 - 1e-6 < p.sum() <= 1 + 1e-12
