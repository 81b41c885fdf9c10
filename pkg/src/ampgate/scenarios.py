"""Declarative scenarios: configuration schema, validation and runners.

A scenario file is TOML with unit-suffixed keys, for example::

    [scenario]
    name = "fig2b"
    kind = "fidelity_vs_g"
    seed = 7

    [params]
    omega0_rabi_khz = 1.46

    [noise]
    gamma_hz = 5.2
    sigma_delta_hz = 100

    [sweep]
    g_khz = [0.0, 49.7]

Every runner returns a :class:`ScenarioOutput` holding the panel tables and
the per-point sub-seeds; nothing is written until :func:`emit_plotdata`.
"""
from __future__ import annotations

import copy
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from . import analysis, calibration, io
from .design import solve_gate
from .dynamics import IntegratorOptions, fidelity_coherent, integrate_uv, noiseless
from .errors import AmpgateError, ConfigError, ConvergenceError
from .model import TWO_PI, DEFAULT_MODE_FREQUENCY, FidelitySample, InteractionParams, NoiseParams
from .montecarlo import EnsembleConfig, fidelity_grid, optimize_detuning, run_ensemble, with_delta_prime

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover
    import tomli as _toml

__all__ = ["KINDS", "SCHEMA", "ScenarioOutput", "load_config", "parse_config", "validate",
           "apply_overrides", "run_config", "emit_plotdata", "sub_seed"]

KINDS = ("speedup_vs_g", "fidelity_vs_g", "tau_vs_theta", "fidelity_vs_theta",
         "single_gate", "calibration_demo")

_NUM = (int, float)
_LIST = list

# section -> key -> (accepted types, default)
SCHEMA: Dict[str, Dict[str, Tuple[tuple, Any]]] = {
    "scenario": {
        "name": ((str,), None),
        "kind": ((str,), None),
        "seed": ((int,), 0),
        "output_dir": ((str,), "out"),
    },
    "params": {
        "omega0_rabi_khz": (_NUM, 1.46),
        "mode_frequency_mhz": (_NUM, DEFAULT_MODE_FREQUENCY / TWO_PI / 1e6),
        "g_khz": (_NUM, 0.0),
        "theta_over_2pi": (_NUM, 0.0),
        "loops": ((int,), 1),
        "phi_target_rad": (_NUM, math.pi / 2),
    },
    "noise": {
        "gamma_hz": (_NUM, 0.0),
        "sigma_delta_hz": (_NUM, 0.0),
        "heating_rate_per_s": (_NUM, 0.0),
        "zeeman_mean_khz": (_NUM, 0.0),
        "zeeman_sigma_khz": (_NUM, 0.0),
        "zeeman_interval_ms": (_NUM, 1.0),
        "zeeman_compensated": ((bool,), True),
    },
    "ensemble": {
        "n_runs": ((int,), 600),
        "engine": ((str,), "auto"),
        "noise_mode": ((str,), "calibrated"),
        "rwa": ((bool,), True),
        "steps_per_loop": ((int,), 2000),
        "truncation": ((int,), 0),
        "chunk_size": ((int,), 50),
        "tau_window_loops": ((_LIST,), [0.5, 1.5]),
        "n_bootstrap": ((int,), 1000),
        "optimize_detuning": ((bool,), True),
        "delta_prime_scales": ((_LIST,), [0.95, 1.0, 1.05, 1.1, 1.15, 1.2]),
    },
    "sweep": {
        "g_khz": ((_LIST,), None),
        "theta_over_2pi": ((_LIST,), None),
        "with_zeeman": ((_LIST,), [False]),
    },
    "grid": {
        "t_points": ((int,), 5),
        "dp_points": ((int,), 5),
        "t_span": (_NUM, 0.15),
        "dp_span": (_NUM, 0.15),
    },
    "analysis": {
        "sigma_g_hz": (_NUM, 600.0),
        "n_bootstrap": ((int,), 5000),
        "weighted": ((bool,), False),
        "per_point_dg": ((bool,), False),
        "t0_us": (_NUM, 0.0),
    },
    "fixed": {
        "t_i_us": (_NUM, 0.0),
        "delta_khz": (_NUM, 0.0),
    },
    "calibration": {
        "xi": (_NUM, 0.8),
        "duration_us": (_NUM, 5.0),
        "omega_sb_khz": (_NUM, 20.0),
        "nbar": (_NUM, 0.3),
        "signal_noise": (_NUM, 0.02),
        "sideband_points": ((int,), 101),
        "sideband_t_max_us": (_NUM, 200.0),
        "ramsey_mean_khz": (_NUM, 4.59),
        "ramsey_sigma_khz": (_NUM, 0.47),
        "ramsey_points": ((int,), 201),
        "ramsey_t_max_ms": (_NUM, 1.0),
        "ramsey_shots": ((int,), 200),
    },
}

REQUIRED_SWEEPS = {
    "speedup_vs_g": ("g_khz",),
    "fidelity_vs_g": ("g_khz",),
    "tau_vs_theta": ("theta_over_2pi",),
    "fidelity_vs_theta": ("theta_over_2pi",),
    "single_gate": ("g_khz",),
    "calibration_demo": (),
}

ENGINES = ("coherent", "fock", "auto")
NOISE_MODES = ("calibrated", "literal")


# --- configuration ---------------------------------------------------------

def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return i
    return None


def _where(text, section, key=None) -> str:
    line = _line_of(text, section, key) if text else None
    loc = f"[{section}]" + (f".{key}" if key else "")
    return f"{loc} (line {line})" if line else loc


def parse_config(text: str) -> dict:
    """Parse and validate scenario TOML text; returns a fully defaulted dict."""
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return validate(raw, text)


def load_config(path) -> dict:
    """Load a scenario file, or the effective config embedded in a run manifest."""
    with open(path, "rb") as fh:
        data = fh.read()
    if str(path).endswith(".json"):
        import json
        try:
            manifest = json.loads(data)
            return validate(manifest["config"])
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{path}: not a run manifest ({exc})") from None
    return parse_config(data.decode("utf-8"))


def validate(raw: dict, text: str = "") -> dict:
    """Check sections, keys, types and value ranges and fill in defaults.

    Raises
    ------
    ConfigError
        With the offending ``[section].key`` and its line when known.
    """
    cfg: Dict[str, Dict[str, Any]] = {}
    for section in raw:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {_where(text, section)}")
        if not isinstance(raw[section], dict):
            raise ConfigError(f"{_where(text, section)} must be a table")
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        out = {}
        for key in given:
            if key not in keys:
                raise ConfigError(f"unknown key {_where(text, section, key)}")
        for key, (types, default) in keys.items():
            if given.get(key) is not None:
                val = given[key]
                ok = isinstance(val, types) and not (isinstance(val, bool) and bool not in types)
                if not ok:
                    names = "/".join(t.__name__ for t in types)
                    raise ConfigError(f"{_where(text, section, key)} must be {names}, "
                                      f"got {type(val).__name__}")
                out[key] = copy.deepcopy(val)
            else:
                out[key] = copy.deepcopy(default)
        cfg[section] = out

    def fail(section, key, msg):
        raise ConfigError(f"{_where(text, section, key)} {msg}")

    sc = cfg["scenario"]
    if sc["kind"] is None:
        fail("scenario", "kind", "is required")
    if sc["kind"] not in KINDS:
        fail("scenario", "kind", f"must be one of {KINDS}")
    if sc["name"] is None:
        sc["name"] = sc["kind"]
    if not re.match(r"^[A-Za-z0-9_.-]+$", sc["name"]):
        fail("scenario", "name", "may only contain letters, digits, '_', '.', '-'")
    if sc["seed"] < 0:
        fail("scenario", "seed", "must be non-negative")
    if cfg["params"]["omega0_rabi_khz"] <= 0:
        fail("params", "omega0_rabi_khz", "must be positive")
    if cfg["params"]["mode_frequency_mhz"] <= 0:
        fail("params", "mode_frequency_mhz", "must be positive")
    if cfg["params"]["g_khz"] < 0:
        fail("params", "g_khz", "must be non-negative")
    if cfg["params"]["loops"] < 1:
        fail("params", "loops", "must be at least 1")
    for key in ("gamma_hz", "sigma_delta_hz", "heating_rate_per_s", "zeeman_mean_khz",
                "zeeman_sigma_khz"):
        if cfg["noise"][key] < 0:
            fail("noise", key, "must be non-negative")
    if cfg["noise"]["zeeman_interval_ms"] <= 0:
        fail("noise", "zeeman_interval_ms", "must be positive")
    ens = cfg["ensemble"]
    if ens["n_runs"] < 1:
        fail("ensemble", "n_runs", "must be at least 1")
    if ens["engine"] not in ENGINES:
        fail("ensemble", "engine", f"must be one of {ENGINES}")
    if ens["noise_mode"] not in NOISE_MODES:
        fail("ensemble", "noise_mode", f"must be one of {NOISE_MODES}")
    if ens["truncation"] < 0:
        fail("ensemble", "truncation", "must be non-negative (0 selects automatically)")
    w = ens["tau_window_loops"]
    if len(w) != 2 or not all(isinstance(v, _NUM) for v in w) or not 0 <= w[0] < w[1]:
        fail("ensemble", "tau_window_loops", "must be two increasing non-negative numbers")
    if not ens["delta_prime_scales"] or not all(isinstance(v, _NUM) and v > 0
                                                for v in ens["delta_prime_scales"]):
        fail("ensemble", "delta_prime_scales", "must be a non-empty list of positive numbers")
    for key, sweep in cfg["sweep"].items():
        if sweep is None:
            continue
        if not sweep:
            fail("sweep", key, "must not be empty")
        kind = bool if key == "with_zeeman" else _NUM
        if not all(isinstance(v, kind) and (kind is bool or not isinstance(v, bool))
                   for v in sweep):
            fail("sweep", key, f"entries must be {'booleans' if kind is bool else 'numbers'}")
        if key == "g_khz" and any(v < 0 for v in sweep):
            fail("sweep", key, "entries must be non-negative")
    for key in REQUIRED_SWEEPS[sc["kind"]]:
        if cfg["sweep"][key] is None:
            fail("sweep", key, f"is required for kind '{sc['kind']}'")
    grid = cfg["grid"]
    for key in ("t_points", "dp_points"):
        if grid[key] < 1:
            fail("grid", key, "must be at least 1")
    if grid["t_points"] * grid["dp_points"] < 6 and sc["kind"] in ("speedup_vs_g", "tau_vs_theta"):
        fail("grid", "t_points", "grid needs at least six points for the surface fit")
    for key in ("t_span", "dp_span"):
        if not 0 <= grid[key] < 1:
            fail("grid", key, "must lie in [0, 1)")
    if cfg["analysis"]["sigma_g_hz"] < 0:
        fail("analysis", "sigma_g_hz", "must be non-negative")
    if cfg["analysis"]["n_bootstrap"] < 1:
        fail("analysis", "n_bootstrap", "must be at least 1")
    cal = cfg["calibration"]
    for key in ("duration_us", "omega_sb_khz", "sideband_t_max_us", "ramsey_t_max_ms"):
        if cal[key] <= 0:
            fail("calibration", key, "must be positive")
    for key in ("sideband_points", "ramsey_points", "ramsey_shots"):
        if cal[key] < 2:
            fail("calibration", key, "must be at least 2")
    for key in ("xi", "nbar", "signal_noise", "ramsey_sigma_khz"):
        if cal[key] < 0:
            fail("calibration", key, "must be non-negative")
    return cfg


def apply_overrides(cfg: dict, seed=None, out=None, engine=None, rwa=None, noise_mode=None,
                    n_runs=None) -> dict:
    """Return a copy of ``cfg`` with command-line overrides applied and re-validated."""
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["scenario"]["seed"] = int(seed)
    if out is not None:
        cfg["scenario"]["output_dir"] = str(out)
    if engine is not None:
        cfg["ensemble"]["engine"] = engine
    if rwa is not None:
        cfg["ensemble"]["rwa"] = bool(rwa)
    if noise_mode is not None:
        cfg["ensemble"]["noise_mode"] = noise_mode
    if n_runs is not None:
        cfg["ensemble"]["n_runs"] = int(n_runs)
    return validate(cfg)


def sub_seed(master: int, index: int) -> int:
    """Counter-based seed for sweep point ``index``."""
    ss = np.random.SeedSequence(int(master), spawn_key=(1, int(index)))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# --- building blocks ---------------------------------------------------------

def _khz(x):
    return TWO_PI * 1e3 * float(x)


def _noise(cfg, with_zeeman=True) -> NoiseParams:
    n = cfg["noise"]
    z = with_zeeman
    return NoiseParams(gamma=TWO_PI * n["gamma_hz"], sigma_delta=TWO_PI * n["sigma_delta_hz"],
                       heating_rate=float(n["heating_rate_per_s"]),
                       zeeman_mean=_khz(n["zeeman_mean_khz"]) if z else 0.0,
                       zeeman_sigma=_khz(n["zeeman_sigma_khz"]) if z else 0.0,
                       zeeman_interval=1e-3 * n["zeeman_interval_ms"],
                       zeeman_compensated=n["zeeman_compensated"])


def _base_params(cfg, g=None, theta=None) -> InteractionParams:
    p = cfg["params"]
    return InteractionParams(
        omega0_rabi=_khz(p["omega0_rabi_khz"]),
        g=_khz(p["g_khz"]) if g is None else g,
        theta=TWO_PI * p["theta_over_2pi"] if theta is None else theta,
        omega_mode=TWO_PI * 1e6 * p["mode_frequency_mhz"])


def _solve(cfg, params: InteractionParams):
    p = cfg["params"]
    return solve_gate(params.omega0_rabi, params.g, params.theta, phi_target=p["phi_target_rad"],
                      loops=p["loops"])


def _ensemble_config(cfg, params, noise, seed, jobs) -> EnsembleConfig:
    e = cfg["ensemble"]
    opts = IntegratorOptions(steps_per_loop=e["steps_per_loop"], rwa=e["rwa"],
                             noise_mode=e["noise_mode"])
    return EnsembleConfig(params=params, noise=noise, n_runs=e["n_runs"], seed=seed,
                          engine=e["engine"], loops=cfg["params"]["loops"],
                          tau_window=tuple(e["tau_window_loops"]), integrator=opts,
                          truncation=e["truncation"] or None, chunk_size=e["chunk_size"],
                          jobs=jobs, n_bootstrap=e["n_bootstrap"])


def _best_ensemble(cfg, params, noise, seed, jobs):
    ec = _ensemble_config(cfg, params, noise, seed, jobs)
    if cfg["ensemble"]["optimize_detuning"]:
        scan = optimize_detuning(ec, scales=cfg["ensemble"]["delta_prime_scales"])
        return scan.best, scan.best_scale
    return run_ensemble(ec), 1.0


@dataclass
class ScenarioOutput:
    """Panel tables keyed by file name, plus bookkeeping for the manifest."""

    tables: Dict[str, Tuple[Tuple[str, ...], List[tuple]]] = field(default_factory=dict)
    sub_seeds: Dict[str, int] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    n_points: int = 0

    @property
    def n_rows(self) -> int:
        return sum(len(rows) for _, rows in self.tables.values())

    def add_rows(self, name, columns, rows):
        cols, existing = self.tables.setdefault(name, (tuple(columns), []))
        existing.extend(rows)


def _grid_estimate(cfg, g, theta, seed, jobs, out: ScenarioOutput, tag: str):
    """Design point -> optimized ensemble -> (t_I, delta) grid -> fit -> bootstrap."""
    params = _base_params(cfg, g=g, theta=theta)
    sol = _solve(cfg, params)
    params = params.replace(delta=sol.delta)
    noise = _noise(cfg, with_zeeman=True)
    best, _ = _best_ensemble(cfg, params, noise, seed, jobs)
    dp_c = best.config.params.delta_prime
    t_c = best.tau_opt
    gr = cfg["grid"]
    ts = t_c * (1 + gr["t_span"] * np.linspace(-1, 1, gr["t_points"]))
    dps = dp_c * (1 + gr["dp_span"] * np.linspace(-1, 1, gr["dp_points"]))
    points = [(float(t), float(math.sqrt(dp ** 2 + g ** 2))) for dp in dps for t in ts]
    base = _ensemble_config(cfg, params, noise, seed, jobs)
    samples = fidelity_grid(g, theta, points, base)
    for s in samples:
        if not s.valid:
            out.failures.append(f"{tag}: grid point t={s.t_i:.3e} s invalid ({s.note})")
    grid_rows = [(s.g / TWO_PI, theta, s.t_i * 1e6, s.delta / TWO_PI, s.delta_prime / TWO_PI,
                  s.fidelity, s.sigma_f, cfg["ensemble"]["n_runs"], seed) for s in samples]
    out.add_rows(f"grid_{tag}.csv", io.MONTECARLO_COLUMNS, grid_rows)
    a = cfg["analysis"]
    fit = analysis.fit_quad_surface(samples, weighted=a["weighted"])
    boot = analysis.bootstrap_t_est(samples, TWO_PI * a["sigma_g_hz"], n=a["n_bootstrap"],
                                    seed=seed, per_point_dg=a["per_point_dg"],
                                    weighted=a["weighted"])
    return sol, best, fit, boot, samples


def _run_speedup_vs_g(cfg, jobs) -> ScenarioOutput:
    out = ScenarioOutput()
    g_list = cfg["sweep"]["g_khz"]
    theta = TWO_PI * cfg["params"]["theta_over_2pi"]
    results = {}
    for k, g_khz in enumerate(g_list):
        seed = sub_seed(cfg["scenario"]["seed"], k)
        tag = f"g{k}"
        out.sub_seeds[f"g_khz={g_khz!r}"] = seed
        out.n_points += 1
        try:
            results[k] = _grid_estimate(cfg, _khz(g_khz), theta, seed, jobs, out, tag)
        except AmpgateError as exc:
            out.failures.append(f"g_khz={g_khz}: {exc}")
    t0_cfg = cfg["analysis"]["t0_us"] * 1e-6
    zero = [k for k, g in enumerate(g_list) if g == 0 and k in results]
    if t0_cfg > 0:
        t0 = t0_cfg
    elif zero:
        t0 = results[zero[0]][2].t_est
    elif 0 in g_list:
        raise ConvergenceError("the g = 0 reference point failed; no speedup can be formed")
    else:
        raise ConfigError("[sweep].g_khz must include 0 or [analysis].t0_us must be set")
    sigma_g_khz = cfg["analysis"]["sigma_g_hz"] * 1e-3
    rows, fits = [], []
    for k, g_khz in enumerate(g_list):
        if k not in results:
            continue
        sol, best, fit, boot, _ = results[k]
        ratio = t0 / boot.draws
        lo, hi = np.percentile(ratio, [16, 84])
        rows.append((g_khz, analysis.speedup(t0, fit.t_est), lo, hi, sigma_g_khz))
        fits.append((g_khz, fit.t_est * 1e6, boot.lower * 1e6, boot.upper * 1e6,
                     fit.delta_prime_est / TWO_PI * 1e-3, fit.f_max, int(fit.has_maximum),
                     sol.tau * 1e6, sol.gain, best.tau_opt * 1e6, best.curve_optimal_fidelity))
    out.add_rows("speedup.csv", ("g_khz", "speedup", "ci_low", "ci_high", "g_sigma_khz"), rows)
    out.add_rows("fits.csv", ("g_khz", "t_est_us", "ci_low_us", "ci_high_us", "dp_est_khz",
                              "f_max", "has_maximum", "t_theory_us", "gain", "tau_opt_us",
                              "f_opt"), fits)
    return out


def _run_tau_vs_theta(cfg, jobs) -> ScenarioOutput:
    out = ScenarioOutput()
    g = _khz(cfg["params"]["g_khz"])
    rows = []
    for k, th in enumerate(cfg["sweep"]["theta_over_2pi"]):
        seed = sub_seed(cfg["scenario"]["seed"], k)
        out.sub_seeds[f"theta_over_2pi={th!r}"] = seed
        out.n_points += 1
        try:
            sol, _, fit, boot, _ = _grid_estimate(cfg, g, TWO_PI * th, seed, jobs, out, f"theta{k}")
        except AmpgateError as exc:
            out.failures.append(f"theta_over_2pi={th}: {exc}")
            continue
        rows.append((th, fit.t_est * 1e6, boot.lower * 1e6, boot.upper * 1e6, sol.tau * 1e6))
    out.add_rows("tau.csv", ("theta_over_2pi", "t_est_us", "ci_low_us", "ci_high_us",
                             "t_theory_us"), rows)
    return out


def _run_fidelity_vs_g(cfg, jobs) -> ScenarioOutput:
    out = ScenarioOutput()
    theta = TWO_PI * cfg["params"]["theta_over_2pi"]
    rows, details = [], []
    k = 0
    for wz in cfg["sweep"]["with_zeeman"]:
        for g_khz in cfg["sweep"]["g_khz"]:
            seed = sub_seed(cfg["scenario"]["seed"], k)
            out.sub_seeds[f"g_khz={g_khz!r},with_zeeman={int(wz)}"] = seed
            k += 1
            out.n_points += 1
            try:
                params = _base_params(cfg, g=_khz(g_khz), theta=theta)
                sol = _solve(cfg, params)
                best, scale = _best_ensemble(cfg, params.replace(delta=sol.delta),
                                             _noise(cfg, with_zeeman=wz), seed, jobs)
            except AmpgateError as exc:
                out.failures.append(f"g_khz={g_khz}, with_zeeman={wz}: {exc}")
                continue
            rows.append((g_khz, best.curve_optimal_fidelity, best.curve_band[0],
                         best.curve_band[1], int(wz)))
            details.append((g_khz, int(wz), best.tau_opt * 1e6,
                            best.config.params.delta_prime / TWO_PI * 1e-3, scale,
                            best.mean_optimal_fidelity, best.mean_optimal_band[0],
                            best.mean_optimal_band[1], sol.tau * 1e6, best.n_runs, seed))
    out.add_rows("fidelity.csv", ("g_khz", "fidelity", "ci_low", "ci_high", "with_zeeman"), rows)
    out.add_rows("ensemble_details.csv",
                 ("g_khz", "with_zeeman", "tau_opt_us", "delta_prime_khz", "dp_scale",
                  "mean_run_optimal", "run_optimal_ci_low", "run_optimal_ci_high",
                  "t_theory_us", "n_runs", "seed"), details)
    return out


def _run_fidelity_vs_theta(cfg, jobs) -> ScenarioOutput:
    out = ScenarioOutput()
    g = _khz(cfg["params"]["g_khz"])
    fixed = cfg["fixed"]
    rows = []
    k = 0
    for wz in cfg["sweep"]["with_zeeman"]:
        noise = _noise(cfg, with_zeeman=wz)
        seed = sub_seed(cfg["scenario"]["seed"], k)
        k += 1
        if fixed["t_i_us"] > 0 and fixed["delta_khz"] > 0:
            t_i, delta = fixed["t_i_us"] * 1e-6, _khz(fixed["delta_khz"])
        else:
            params = _base_params(cfg, g=g, theta=0.0)
            sol = _solve(cfg, params)
            best, _ = _best_ensemble(cfg, params.replace(delta=sol.delta), noise, seed, jobs)
            t_i, delta = best.tau_opt, best.config.params.delta
        base = _ensemble_config(cfg, _base_params(cfg, g=g, theta=0.0).replace(delta=delta),
                                noise, seed, jobs)
        for th in cfg["sweep"]["theta_over_2pi"]:
            out.sub_seeds[f"theta_over_2pi={th!r},with_zeeman={int(wz)}"] = seed
            out.n_points += 1
            s = fidelity_grid(g, TWO_PI * th, [(t_i, delta)], base)[0]
            if not s.valid:
                out.failures.append(f"theta_over_2pi={th}: {s.note}")
                continue
            rows.append((th, s.fidelity, s.fidelity - s.sigma_f, s.fidelity + s.sigma_f, int(wz)))
    out.add_rows("fidelity_theta.csv",
                 ("theta_over_2pi", "fidelity", "ci_low", "ci_high", "with_zeeman"), rows)
    return out


def _run_single_gate(cfg, jobs) -> ScenarioOutput:
    out = ScenarioOutput()
    theta = TWO_PI * cfg["params"]["theta_over_2pi"]
    noise = _noise(cfg, with_zeeman=True)
    noisy = any(getattr(noise, f) > 0 for f in ("gamma", "sigma_delta", "heating_rate")) \
        or noise.has_zeeman
    rows = []
    for k, g_khz in enumerate(cfg["sweep"]["g_khz"]):
        seed = sub_seed(cfg["scenario"]["seed"], k)
        out.sub_seeds[f"g_khz={g_khz!r}"] = seed
        out.n_points += 1
        try:
            params = _base_params(cfg, g=_khz(g_khz), theta=theta)
            sol = _solve(cfg, params)
            params = params.replace(delta=sol.delta)
            if noisy:
                ec = _ensemble_config(cfg, params, noise, seed, jobs)
                ec = ec.replace(tau_bracket=(0.0, sol.tau))
                res = run_ensemble(ec)
                f = float(res.final_fidelity.mean())
                err = float(res.final_fidelity.std(ddof=1) / math.sqrt(res.n_runs)) \
                    if res.n_runs > 1 else 0.0
                lo, hi = f - err, f + err
            else:
                e = cfg["ensemble"]
                opts = IntegratorOptions(steps_per_loop=e["steps_per_loop"], rwa=e["rwa"],
                                         noise_mode=e["noise_mode"])
                traj = integrate_uv(params, noiseless(), sol.tau, opts)
                f = lo = hi = float(fidelity_coherent(traj, params.omega0_rabi))
        except AmpgateError as exc:
            out.failures.append(f"g_khz={g_khz}: {exc}")
            continue
        rows.append((g_khz, theta, sol.tau * 1e6, sol.delta / TWO_PI * 1e-3,
                     sol.delta_prime / TWO_PI * 1e-3, sol.gain, sol.r, f, lo, hi))
    out.add_rows("single_gate.csv", ("g_khz", "theta_rad", "tau_us", "delta_khz",
                                     "delta_prime_khz", "gain", "r", "fidelity", "ci_low",
                                     "ci_high"), rows)
    return out


def _run_calibration_demo(cfg, jobs) -> ScenarioOutput:
    out = ScenarioOutput()
    c = cfg["calibration"]
    seed = sub_seed(cfg["scenario"]["seed"], 0)
    out.sub_seeds["calibration"] = seed
    out.n_points = 2
    rng = np.random.default_rng(seed)
    om = _khz(c["omega_sb_khz"])
    t = np.linspace(0.0, c["sideband_t_max_us"] * 1e-6, c["sideband_points"])
    y = calibration.squeeze_signal(c["xi"], om, t, c["nbar"])
    y = y + rng.normal(0.0, c["signal_noise"], t.size) if c["signal_noise"] > 0 else y
    sig = np.full_like(t, c["signal_noise"])
    out.add_rows("squeeze_data.csv", io.CALIBRATION_COLUMNS, zip(t * 1e6, y, sig))
    fits = []
    try:
        sf = calibration.fit_squeeze_param(t, y, om, c["duration_us"] * 1e-6, nbar=c["nbar"])
        fits.append(("xi", c["xi"], sf.xi, sf.xi_err))
        fits.append(("g_khz", c["xi"] / (c["duration_us"] * 1e-6) / TWO_PI * 1e-3,
                     sf.g / TWO_PI * 1e-3, sf.g_err / TWO_PI * 1e-3))
    except AmpgateError as exc:
        out.failures.append(f"squeeze fit: {exc}")
    model = calibration.RamseyModel(_khz(c["ramsey_mean_khz"]), _khz(c["ramsey_sigma_khz"]))
    tr = np.linspace(0.0, c["ramsey_t_max_ms"] * 1e-3, c["ramsey_points"])
    curves = calibration.ramsey_populations(model, tr)
    shots = c["ramsey_shots"]
    pdd = rng.binomial(shots, np.clip(curves.p_dd, 0, 1)) / shots
    par = 2 * rng.binomial(shots, np.clip((1 + curves.parity) / 2, 0, 1)) / shots - 1
    sig_dd = np.sqrt(np.clip(curves.p_dd * (1 - curves.p_dd), 0, None) / shots)
    out.add_rows("ramsey_pdd.csv", io.CALIBRATION_COLUMNS, zip(tr * 1e6, pdd, sig_dd))
    out.add_rows("ramsey_parity.csv", io.CALIBRATION_COLUMNS,
                 zip(tr * 1e6, par, np.sqrt(np.clip(1 - curves.parity ** 2, 0, None) / shots)))
    try:
        rf = calibration.fit_ramsey(tr, pdd, par)
        fits.append(("ramsey_mean_khz", c["ramsey_mean_khz"], rf.mean / TWO_PI * 1e-3,
                     rf.mean_err / TWO_PI * 1e-3))
        fits.append(("ramsey_sigma_khz", c["ramsey_sigma_khz"], rf.sigma / TWO_PI * 1e-3,
                     rf.sigma_err / TWO_PI * 1e-3))
    except AmpgateError as exc:
        out.failures.append(f"Ramsey fit: {exc}")
    out.add_rows("calibration_fit.csv", ("parameter", "true", "fitted", "stderr"), fits)
    return out


RUNNERS: Dict[str, Callable[[dict, int], ScenarioOutput]] = {
    "speedup_vs_g": _run_speedup_vs_g,
    "fidelity_vs_g": _run_fidelity_vs_g,
    "tau_vs_theta": _run_tau_vs_theta,
    "fidelity_vs_theta": _run_fidelity_vs_theta,
    "single_gate": _run_single_gate,
    "calibration_demo": _run_calibration_demo,
}


def run_config(cfg: dict, jobs: int = 1) -> ScenarioOutput:
    """Run a validated scenario. ``jobs`` never changes the results."""
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    return RUNNERS[cfg["scenario"]["kind"]](cfg, jobs)


def emit_plotdata(output: ScenarioOutput, out_dir) -> List[str]:
    """Write one CSV per panel table; returns the written paths in sorted order."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(output.tables):
        cols, rows = output.tables[name]
        path = os.path.join(out_dir, name)
        io.write_rows(path, cols, rows)
        paths.append(path)
    return paths
