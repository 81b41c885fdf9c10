"""Acceptance criteria. Each test prints one PASS/FAIL line and asserts it."""
import filecmp
import math
import os
import time
import warnings

import numpy as np
import pytest

from ampgate.analysis import bootstrap_t_est
from ampgate.calibration import (RamseyModel, fit_ramsey, fit_squeeze_param, ramsey_populations,
                                 squeeze_signal)
from ampgate.cli import EXIT_OK, main
from ampgate.design import gain_from_r, solve_gate
from ampgate.dynamics import (IntegratorOptions, branch_displacement, draw_realization,
                              fidelity_coherent, fock_steps_per_loop, integrate_uv, noiseless,
                              propagate_fock, trajectory_phase, zeeman_bound)
from ampgate.errors import AmpgateError
from ampgate.model import TWO_PI, NoiseParams, from_hz, from_khz
from ampgate.montecarlo import (EnsembleConfig, fidelity_grid, fock_integrator,
                                optimize_detuning, predicted_alpha_max, run_curves,
                                run_ensemble)
from synthetic import TRUTH, grid_samples

OMEGA0 = from_khz(1.46)
PAPER_NOISE = NoiseParams(gamma=from_hz(5.2), sigma_delta=from_hz(100))
ZEEMAN_NOISE = NoiseParams(gamma=from_hz(5.2), sigma_delta=from_hz(100),
                           zeeman_mean=from_khz(4.59), zeeman_sigma=from_khz(0.47),
                           zeeman_interval=1e-3)
GRID_G_KHZ = (0.0, 12.4, 49.7)
GRID_THETA = (0.0, math.pi / 4, math.pi)


def design(g_khz, theta=0.0):
    g = from_khz(g_khz)
    sol = solve_gate(OMEGA0, g, theta)
    return sol, sol.params(OMEGA0, g, theta)


def test_criterion_1_gain_formula(acceptance_line):
    sol, _ = design(49.7)
    solve_gate(OMEGA0, from_khz(49.7), 0.0)
    times = []
    for _ in range(50):
        t0 = time.perf_counter()
        solve_gate(OMEGA0, from_khz(49.7), 0.0)
        times.append(time.perf_counter() - t0)
    runtime = float(np.median(times))
    tau_ref = math.pi / (sol.gain * OMEGA0)
    ok = (abs(sol.gain - 3.25) <= 0.01 and abs(sol.tau / tau_ref - 1) < 1e-3 and runtime < 1e-3)
    assert acceptance_line(1, ok, f"G = {sol.gain:.4f}, tau = {sol.tau * 1e6:.2f} us "
                                  f"(pi/(G Omega0) = {tau_ref * 1e6:.2f} us), "
                                  f"median runtime {runtime * 1e6:.0f} us")


def test_criterion_2_unamplified_gate(acceptance_line):
    sol, p = design(0.0)
    f = float(fidelity_coherent(integrate_uv(p, noiseless(), sol.tau), OMEGA0))
    ok = (math.isclose(sol.delta, 2 * OMEGA0, rel_tol=1e-9)
          and abs(sol.tau / 342.5e-6 - 1) < 1e-3 and abs(f - 1) < 1e-6)
    assert acceptance_line(2, ok, f"delta/Omega0 = {sol.delta / OMEGA0:.9f}, "
                                  f"tau = {sol.tau * 1e6:.3f} us, F = {f:.9f}")


def engine_gap(g_khz, theta, noise, n_runs):
    sol, p = design(g_khz, theta)
    fock_cfg = EnsembleConfig(params=p, noise=noise, n_runs=n_runs, seed=21, engine="fock",
                              truncation=23, tau_bracket=(0.0, sol.tau))
    opts = fock_integrator(fock_cfg, sol.tau, 23)
    coh_cfg = fock_cfg.replace(engine="coherent", truncation=None, integrator=opts)
    alpha_max = predicted_alpha_max(p, sol.tau)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, fock, _, top = run_curves(fock_cfg, sol.tau)
        _, coh, _, _ = run_curves(coh_cfg, sol.tau)
    except AmpgateError:
        return math.inf, alpha_max, math.nan
    return float(np.max(np.abs(fock[:, -1] - coh[:, -1]))), alpha_max, top


def test_criterion_3_oracle_equivalence(acceptance_line):
    start = time.perf_counter()
    worst, rows = 0.0, []
    for g_khz in GRID_G_KHZ:
        for theta in GRID_THETA:
            for label, noise, n in (("noiseless", NoiseParams(), 1),
                                    ("gamma", NoiseParams(gamma=from_hz(5.2)), 3)):
                gap, alpha_max, top = engine_gap(g_khz, theta, noise, n)
                worst = max(worst, gap)
                rows.append((g_khz, theta, label, gap, alpha_max, top))
    runtime = time.perf_counter() - start
    for g_khz, theta, label, gap, alpha_max, top in rows:
        print(f"  g = {g_khz:5.1f} kHz, theta = {theta:.3f}, {label:9s}: |dF| = {gap:.2e}, "
              f"max|alpha| = {alpha_max:.2f}, top population = {top:.1e}")
    small = max(r[3] for r in rows if r[4] <= 3)
    ok = worst < 1e-3 and runtime < 60
    assert acceptance_line(3, ok, f"max |F_coherent - F_fock| = {worst:.2e} at s = 23 over "
                                  f"{len(rows)} cases ({small:.1e} where max|alpha| <= 3), "
                                  f"runtime {runtime:.1f} s")


def best_ensemble(g_khz, noise, seed, scan=True):
    _, p = design(g_khz)
    cfg = EnsembleConfig(params=p, noise=noise, n_runs=600, seed=seed)
    if scan:
        return optimize_detuning(cfg).best
    return run_ensemble(cfg)


def test_criterion_4_noise_matched_fidelities(acceptance_line):
    start = time.perf_counter()
    low = best_ensemble(0.0, PAPER_NOISE, seed=1)
    high = best_ensemble(49.7, PAPER_NOISE, seed=1)
    runtime = time.perf_counter() - start
    f0, f1, tau = low.curve_optimal_fidelity, high.curve_optimal_fidelity, high.tau_opt
    ok = (0.95 <= f0 <= 0.99 and 0.83 <= f1 <= 0.89 and 80e-6 <= tau <= 95e-6
          and runtime < 600)
    assert acceptance_line(4, ok, f"F(g=0) = {f0:.4f} +/- {low.curve_sigma:.4f}, "
                                  f"F(g=49.7 kHz) = {f1:.4f} +/- {high.curve_sigma:.4f}, "
                                  f"tau* = {tau * 1e6:.1f} us, runtime {runtime:.0f} s")


def test_criterion_5_zeeman_robustness(acceptance_line):
    low = best_ensemble(0.0, ZEEMAN_NOISE, seed=1, scan=False)
    high = best_ensemble(12.1, ZEEMAN_NOISE, seed=1, scan=False)
    assert low.truncation is not None and high.truncation is not None
    f0, f1 = low.curve_optimal_fidelity, high.curve_optimal_fidelity
    margin = 2 * math.hypot(low.curve_sigma, high.curve_sigma)
    ok = 0.74 <= f0 <= 0.81 and 0.88 <= f1 <= 0.94 and f1 - f0 > margin
    assert acceptance_line(5, ok, f"Fock engine: F(g=0) = {f0:.4f} +/- {low.curve_sigma:.4f}, "
                                  f"F(g=12.1 kHz) = {f1:.4f} +/- {high.curve_sigma:.4f}, "
                                  f"difference {f1 - f0:.4f} vs 2 sigma = {margin:.4f}")


def test_criterion_6_phase_sensitivity(acceptance_line):
    g = from_khz(12.4)
    tau0 = solve_gate(OMEGA0, g, 0.0).tau
    small = [abs(solve_gate(OMEGA0, g, TWO_PI * x).tau / tau0 - 1)
             for x in np.linspace(-0.1, 0.1, 21)]
    far = solve_gate(OMEGA0, g, TWO_PI * 0.39).tau / tau0

    sol, p = design(12.4)
    base = EnsembleConfig(params=p, noise=PAPER_NOISE, n_runs=200, seed=5)
    thetas = np.round(np.arange(-0.5, 0.51, 0.1), 10)
    samples = fidelity_grid(g, 0.0, [(sol.tau, sol.delta)], base)
    by_theta = {}
    for x in thetas:
        s = fidelity_grid(g, TWO_PI * x, [(sol.tau, sol.delta)], base)[0]
        by_theta[float(x)] = (s.fidelity, s.sigma_f)
    assert samples[0].fidelity == pytest.approx(by_theta[0.0][0])
    asym = max(abs(by_theta[x][0] - by_theta[-x][0]) / math.hypot(by_theta[x][1], by_theta[-x][1])
               for x in thetas if x > 0)
    worst_theta = min(by_theta, key=lambda x: by_theta[x][0])
    ok = max(small) < 0.02 and far > 1.3 and asym < 3 and abs(abs(worst_theta) - 0.5) <= 0.1
    assert acceptance_line(6, ok, f"max |tau(theta)/tau(0) - 1| for |theta|/2pi <= 0.1 is "
                                  f"{max(small):.4f}, tau(0.39)/tau(0) = {far:.3f}, "
                                  f"max asymmetry {asym:.2f} sigma, minimum at "
                                  f"theta/2pi = {worst_theta:+.1f}")


def bootstrap_coverage(n_trials=200, noise=0.004):
    hits = 0
    for k in range(n_trials):
        pts = grid_samples(noise=noise, rng=np.random.default_rng(1000 + k))
        res = bootstrap_t_est(pts, sigma_g=0.0, n=400, seed=k)
        hits += res.lower <= TRUTH[4] <= res.upper
    return hits / n_trials


def cli_deterministic(tmp_path):
    text = """
[scenario]
name = "det"
kind = "speedup_vs_g"
seed = 11

[noise]
gamma_hz = 5.2
sigma_delta_hz = 100

[ensemble]
n_runs = 8
n_bootstrap = 20
optimize_detuning = false
steps_per_loop = 400
chunk_size = 2

[analysis]
n_bootstrap = 300

[sweep]
g_khz = [0.0, 12.4]
"""
    cfg = tmp_path / "det.toml"
    cfg.write_text(text)
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [main(["run", str(cfg), "--out", str(out), "--quiet", *extra])
             for out, extra in ((a, ()), (b, ("--jobs", "2")))]
    data = [f for f in sorted(os.listdir(a)) if f.endswith(".csv")]
    _, mismatch, errors = filecmp.cmpfiles(a, b, data, shallow=False)
    return codes == [EXIT_OK, EXIT_OK] and bool(data) and not mismatch and not errors


def test_criterion_7_property_suite(acceptance_line, tmp_path):
    checks = {}
    symp, closure = 0.0, 0.0
    for g_khz in GRID_G_KHZ:
        for theta in GRID_THETA:
            sol, p = design(g_khz, theta)
            traj = integrate_uv(p, noiseless(), sol.tau)
            symp = max(symp, float(np.max(np.abs(traj.symplectic_norm() - 1))))
            alpha = branch_displacement(traj, OMEGA0)
            closure = max(closure, abs(alpha[-1]) / np.max(np.abs(alpha)))
    checks["symplectic norm"] = (symp < 1e-8, f"{symp:.1e}")
    checks["loop closure"] = (closure < 1e-6, f"{closure:.1e}")

    fock_err = 0.0
    for g_khz, theta, seed in ((0.0, 0.0, 1), (12.4, 0.0, 2), (25.0, 1.0, 3), (12.1, -2.0, 4)):
        sol, p = design(g_khz, theta)
        run = draw_realization(ZEEMAN_NOISE.replace(zeeman_compensated=False), seed,
                               horizon=sol.tau)
        h_max = 1.5 * float(np.max(np.abs(integrate_uv(p, noiseless(), sol.tau).h)))
        steps = fock_steps_per_loop(p, h_max, zeeman_bound(ZEEMAN_NOISE), 30)
        traj = integrate_uv(p, run, sol.tau, IntegratorOptions(steps_per_loop=steps))
        res = propagate_fock(p, run, traj, truncation=30, warn=False)
        fock_err = max(fock_err, float(np.max(np.abs(res.state.norm() - 1))))
    checks["Fock norm"] = (fock_err < 1e-8, f"{fock_err:.1e}")

    delta = from_khz(3.7)
    _, p0 = design(0.0)
    p0 = p0.replace(delta=delta)
    phi = trajectory_phase(integrate_uv(p0, noiseless(), TWO_PI / delta), OMEGA0)[-1]
    phase_err = abs(phi / (TWO_PI * (OMEGA0 / delta) ** 2) - 1)
    checks["geometric phase"] = (phase_err < 1e-6, f"{phase_err:.1e}")

    gain_err = max(abs(gain_from_r(r, 0.0) * gain_from_r(r, math.pi) - 1)
                   for r in np.linspace(0, 10, 101))
    checks["gain product"] = (gain_err < 1e-12, f"{gain_err:.1e}")

    coverage = bootstrap_coverage()
    checks["bootstrap coverage"] = (abs(coverage - 0.68) <= 0.05, f"{coverage:.3f}")
    checks["seed determinism"] = (cli_deterministic(tmp_path), "byte-identical CSVs")

    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k} {'ok' if v[0] else 'FAILED'} ({v[1]})" for k, v in checks.items())
    assert acceptance_line(7, ok, detail)


def test_criterion_8_calibration_round_trips(acceptance_line):
    omega = from_khz(12)
    t = np.linspace(0, 400e-6, 81)
    xi_err = max(abs(fit_squeeze_param(t, squeeze_signal(xi, omega, t), omega, 5e-6).xi - xi)
                 for xi in (0.3, 0.8, 1.56))

    truth = RamseyModel(from_khz(4.59), from_khz(0.47))
    t_r = np.linspace(0, 1e-3, 201)
    p = np.random.default_rng(8).binomial(200, ramsey_populations(truth, t_r).p_dd) / 200
    fit = fit_ramsey(t_r, p)
    d_mean = abs(fit.mean - truth.mean) / TWO_PI / 1e3
    d_sigma = abs(fit.sigma - truth.sigma) / TWO_PI / 1e3
    ok = xi_err < 1e-6 and d_mean <= 0.02 and d_sigma <= 0.04
    assert acceptance_line(8, ok, f"max |xi fit - xi| = {xi_err:.1e}; Ramsey (201 points, 200 "
                                  f"shots): mean {fit.mean / TWO_PI / 1e3:.4f} kHz, sigma "
                                  f"{fit.sigma / TWO_PI / 1e3:.4f} kHz")
