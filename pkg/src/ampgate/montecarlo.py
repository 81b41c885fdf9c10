"""Monte Carlo ensembles over noise realizations.

Runs are processed in fixed-size chunks; each chunk integrates its runs as one
batch and every run draws its noise from a counter-based sub-seed. Chunk
boundaries depend only on ``chunk_size`` and never on the worker count, so
results are bit-identical for any ``jobs`` setting.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .design import effective_detuning
from .dynamics import (IntegratorOptions, apply_heating_penalty, coherent_fidelity_curve,
                       fock_steps_per_loop, integrate_uv, noiseless, propagate_fock,
                       select_truncation, step_size, zeeman_bound)
from .dynamics.coherent import branch_displacement
from .dynamics.noise import draw_realization, run_seed
from .dynamics.fock import TOP_POPULATION_LIMIT
from .errors import (ConvergenceError, EngineMismatchError, InvalidRegimeError,
                     TruncationWarning)
from .model import FidelitySample, InteractionParams, NoiseParams

__all__ = [
    "ENGINES", "EnsembleConfig", "EnsembleResult", "DetuningScan", "run_ensemble",
    "run_curves", "find_optimal_tau", "optimal_tau_from_curve", "optimize_detuning",
    "fidelity_grid", "predicted_alpha_max", "with_delta_prime",
]

ENGINES = ("coherent", "fock", "auto")

#: Default gate-time search window, in units of the single-loop time 2 pi / delta'.
DEFAULT_TAU_WINDOW = (0.5, 1.5)

TAU_RESOLUTION = 1e-7

_BAND_KEY = (0xFFFFFFFF, 1)


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything needed to reproduce one ensemble.

    ``tau_bracket`` (seconds) overrides ``tau_window``, which is given in
    units of ``2 pi K / delta'``.
    """

    params: InteractionParams
    noise: NoiseParams = NoiseParams()
    n_runs: int = 600
    seed: int = 0
    engine: str = "auto"
    loops: int = 1
    tau_window: Tuple[float, float] = DEFAULT_TAU_WINDOW
    tau_bracket: Optional[Tuple[float, float]] = None
    integrator: IntegratorOptions = IntegratorOptions()
    truncation: Optional[int] = None
    chunk_size: int = 50
    jobs: int = 1
    n_bootstrap: int = 1000

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        lo, hi = self.bracket()
        if not 0 <= lo < hi:
            raise ValueError(f"invalid tau bracket ({lo}, {hi})")
        if self.chunk_size < 1 or self.jobs < 1:
            raise ValueError("chunk_size and jobs must be positive")

    def bracket(self) -> Tuple[float, float]:
        if self.tau_bracket is not None:
            return tuple(float(x) for x in self.tau_bracket)
        if not self.params.amplified_regime:
            raise InvalidRegimeError("|delta| must exceed g")
        t_loop = 2 * math.pi * self.loops / self.params.delta_prime
        return self.tau_window[0] * t_loop, self.tau_window[1] * t_loop

    def resolved_engine(self) -> str:
        if self.engine == "auto":
            return "fock" if self.noise.has_zeeman else "coherent"
        if self.engine == "coherent" and self.noise.has_zeeman:
            raise EngineMismatchError("qubit-frequency noise requires the fock engine")
        return self.engine

    def replace(self, **changes) -> "EnsembleConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class EnsembleResult:
    """Aggregated ensemble statistics.

    ``mean_optimal_fidelity`` averages each run's own best fidelity inside the
    bracket. ``curve_optimal_fidelity`` is the maximum over gate time of the
    ensemble-mean curve, i.e. the best fidelity achievable with one common
    gate time; ``tau_opt`` is its location.
    """

    config: EnsembleConfig
    t: np.ndarray
    mean_curve: np.ndarray
    run_optimal_fidelity: np.ndarray
    run_optimal_tau: np.ndarray
    tau_opt: float
    curve_optimal_fidelity: float
    curve_band: Tuple[float, float]
    mean_optimal_fidelity: float
    mean_optimal_band: Tuple[float, float]
    final_fidelity: np.ndarray
    truncation: Optional[int]
    max_top_population: float
    seeds: List[int] = field(default_factory=list)

    @property
    def n_runs(self) -> int:
        return len(self.run_optimal_fidelity)

    @property
    def curve_sigma(self) -> float:
        return 0.5 * (self.curve_band[1] - self.curve_band[0])

    def fidelity_at(self, tau: float) -> float:
        return float(np.interp(tau, self.t, self.mean_curve))


def predicted_alpha_max(params: InteractionParams, t_end: float,
                        opts: IntegratorOptions = IntegratorOptions()) -> float:
    """Peak ``|alpha|`` of a noiseless run up to ``t_end``."""
    traj = integrate_uv(params, noiseless(), t_end, opts)
    return float(np.max(np.abs(branch_displacement(traj, params.omega0_rabi))))


def fock_integrator(config: EnsembleConfig, t_end: float, truncation: int) -> IntegratorOptions:
    """Integrator settings fine enough for the Fock RK4 step (see :func:`fock_steps_per_loop`).

    The step is refined by powers of two so the Fock engine sees the same
    dephasing path as the coherent engine at the coarse grid points.
    """
    opts = config.integrator
    traj = integrate_uv(config.params, noiseless(), t_end, opts)
    # margin for noise-driven growth of |h| beyond the noiseless peak
    h_max = 1.5 * float(np.max(np.abs(traj.h)))
    need = fock_steps_per_loop(config.params, h_max, zeeman_bound(config.noise), truncation,
                               minimum=1)
    dt, _ = step_size(config.params, t_end, opts)
    have = 2 * math.pi / config.params.delta_prime / dt
    refine = max(0, int(math.ceil(math.log2(need / have))))
    return dataclasses.replace(opts, refine=opts.refine + refine)


def _chunks(n_runs: int, size: int) -> List[range]:
    return [range(i, min(i + size, n_runs)) for i in range(0, n_runs, size)]


def _run_chunk(config: EnsembleConfig, indices: range, t_end: float, engine: str,
               truncation: Optional[int], opts: IntegratorOptions):
    runs = [draw_realization(config.noise, run_seed(config.seed, i), horizon=t_end)
            for i in indices]
    params = config.params
    traj = integrate_uv(params, runs, t_end, opts)
    if engine == "coherent":
        return traj.t, coherent_fidelity_curve(traj, params.omega0_rabi), 0.0
    res = propagate_fock(params, runs, traj, truncation, warn=False)
    return res.t, res.fidelity, float(np.max(res.max_top_population))


def run_curves(config: EnsembleConfig, t_end: Optional[float] = None):
    """Per-run fidelity curves ``F_i(t)`` on ``[0, t_end]`` (heating included).

    Returns
    -------
    t : ndarray, shape (n_t,)
    curves : ndarray, shape (n_runs, n_t)
    truncation : int or None
    top : float
        Largest top-Fock-level population seen (0 for the coherent engine).
    """
    engine = config.resolved_engine()
    if t_end is None:
        t_end = config.bracket()[1]
    truncation = None
    opts = config.integrator
    if engine == "fock":
        truncation = config.truncation
        if truncation is None:
            truncation = select_truncation(
                predicted_alpha_max(config.params, t_end, config.integrator))
        opts = fock_integrator(config, t_end, truncation)
    chunks = _chunks(config.n_runs, config.chunk_size)
    n = len(chunks)
    if config.jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            parts = list(pool.map(_run_chunk, [config] * n, chunks, [t_end] * n, [engine] * n,
                                  [truncation] * n, [opts] * n))
    else:
        parts = [_run_chunk(config, c, t_end, engine, truncation, opts) for c in chunks]
    t = parts[0][0]
    curves = np.concatenate([p[1] for p in parts], axis=0)
    top = max(p[2] for p in parts)
    if top > TOP_POPULATION_LIMIT:
        warnings.warn(f"Fock truncation s={truncation} insufficient: top-level population "
                      f"reached {top:.2e}", TruncationWarning, stacklevel=2)
    if config.noise.heating_rate > 0:
        curves = apply_heating_penalty(curves, config.noise.heating_rate, t)
    return t, np.clip(curves, 0.0, 1.0), truncation, top


def optimal_tau_from_curve(t: np.ndarray, curve: np.ndarray, bracket: Tuple[float, float],
                           resolution: float = TAU_RESOLUTION) -> Tuple[float, float]:
    """Maximize a sampled curve inside ``bracket`` to ``resolution`` in time.

    The grid maximum seeds a bounded Brent search (golden section with
    parabolic steps) on a cubic spline through the samples.

    Raises
    ------
    ConvergenceError
        If the bracket holds fewer than four samples or the search fails.
    """
    lo, hi = bracket
    mask = (t >= lo) & (t <= hi)
    if np.count_nonzero(mask) < 4:
        raise ConvergenceError("tau bracket holds too few samples")
    ts, fs = t[mask], curve[mask]
    k = int(np.argmax(fs))
    a = ts[max(k - 2, 0)]
    b = ts[min(k + 2, len(ts) - 1)]
    spline = CubicSpline(ts, fs)
    res = minimize_scalar(lambda x: -float(spline(x)), bounds=(a, b), method="bounded",
                          options={"xatol": resolution})
    if not res.success:
        raise ConvergenceError(f"tau search failed: {res.message}")
    if -res.fun < fs[k]:
        return float(ts[k]), float(fs[k])
    return float(res.x), float(-res.fun)


def _bootstrap_means(values: np.ndarray, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_BAND_KEY))
    idx = rng.integers(0, len(values), size=(n, len(values)))
    return values[idx].mean(axis=1)


def _band(samples: np.ndarray) -> Tuple[float, float]:
    lo, hi = np.percentile(samples, [16, 84])
    return float(lo), float(hi)


def run_ensemble(config: EnsembleConfig) -> EnsembleResult:
    """Simulate ``config.n_runs`` noisy gates and aggregate their fidelities."""
    lo, hi = config.bracket()
    t, curves, truncation, top = run_curves(config, hi)
    mask = t >= lo
    window = curves[:, mask]
    k = np.argmax(window, axis=1)
    run_f = window[np.arange(len(window)), k]
    run_tau = t[mask][k]
    mean_curve = curves.mean(axis=0)
    tau_opt, f_opt = optimal_tau_from_curve(t, mean_curve, (lo, hi))

    # bootstrap over runs for both estimators
    n_b = config.n_bootstrap
    mean_band = _band(_bootstrap_means(run_f, n_b, config.seed))
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=_BAND_KEY))
    counts = np.stack([np.bincount(rng.integers(0, len(curves), len(curves)),
                                   minlength=len(curves)) for _ in range(n_b)])
    boot_curves = (counts @ window) / len(curves)
    curve_band = _band(boot_curves.max(axis=1))

    return EnsembleResult(
        config=config, t=t, mean_curve=mean_curve, run_optimal_fidelity=run_f,
        run_optimal_tau=run_tau, tau_opt=tau_opt, curve_optimal_fidelity=f_opt,
        curve_band=curve_band, mean_optimal_fidelity=float(run_f.mean()),
        mean_optimal_band=mean_band, final_fidelity=curves[:, -1], truncation=truncation,
        max_top_population=top,
        seeds=[int(run_seed(config.seed, i).generate_state(1)[0]) for i in range(config.n_runs)])


def find_optimal_tau(config: EnsembleConfig) -> Tuple[float, float]:
    """Gate time maximizing the ensemble-mean fidelity, and that fidelity."""
    res = run_ensemble(config)
    return res.tau_opt, res.curve_optimal_fidelity


def with_delta_prime(params: InteractionParams, delta_prime: float) -> InteractionParams:
    """Same drive with ``delta`` chosen so that ``sqrt(delta^2 - g^2) = delta_prime``."""
    sign = 1.0 if params.delta >= 0 else -1.0
    return params.replace(delta=sign * math.sqrt(delta_prime ** 2 + params.g ** 2))


@dataclass
class DetuningScan:
    scales: np.ndarray
    results: List[EnsembleResult]
    best: EnsembleResult
    best_scale: float


def optimize_detuning(config: EnsembleConfig,
                      scales: Sequence[float] = (0.95, 1.0, 1.05, 1.1, 1.15, 1.2),
                      refine: bool = True) -> DetuningScan:
    """Scan ``delta'`` around ``config.params`` and keep the best ensemble.

    All scan points reuse the same noise realizations (same master seed). The
    score is the maximum of the ensemble-mean curve. With ``refine`` set, a
    parabola through the best scan point and its neighbours proposes one
    extra point.
    """
    dp0 = config.params.delta_prime
    if not np.isfinite(dp0):
        raise InvalidRegimeError("|delta| must exceed g")
    scales = [float(s) for s in scales]

    def at(scale):
        return run_ensemble(config.replace(params=with_delta_prime(config.params, scale * dp0)))

    results = [at(s) for s in scales]
    score = [r.curve_optimal_fidelity for r in results]
    k = int(np.argmax(score))
    if refine and 0 < k < len(scales) - 1:
        x = np.array(scales[k - 1:k + 2])
        y = np.array(score[k - 1:k + 2])
        c2, c1, _ = np.polyfit(x, y, 2)
        if c2 < 0:
            s_new = float(np.clip(-c1 / (2 * c2), x[0], x[2]))
            if min(abs(s_new - s) for s in scales) > 1e-3:
                scales.append(s_new)
                results.append(at(s_new))
                score.append(results[-1].curve_optimal_fidelity)
    order = np.argsort(scales)
    scales = np.array(scales)[order]
    results = [results[i] for i in order]
    k = int(np.argmax([r.curve_optimal_fidelity for r in results]))
    return DetuningScan(scales=scales, results=results, best=results[k],
                        best_scale=float(scales[k]))


def fidelity_grid(g: float, theta: float, points: Sequence[Tuple[float, float]],
                  base: EnsembleConfig) -> List[FidelitySample]:
    """Ensemble-mean fidelity at fixed ``(t_I, delta)`` pairs.

    Points sharing a detuning share one set of trajectories. Points with
    ``|delta| <= g`` or other failures are returned with ``valid=False`` and a
    note; the remaining grid is still evaluated.
    """
    by_delta = {}
    for i, (t_i, delta) in enumerate(points):
        by_delta.setdefault(float(delta), []).append((i, float(t_i)))
    out: List[Optional[FidelitySample]] = [None] * len(points)
    for delta, items in by_delta.items():
        if abs(delta) <= g:
            for i, t_i in items:
                out[i] = FidelitySample(t_i=t_i, delta_prime=float("nan"), fidelity=float("nan"),
                                        delta=delta, g=g, valid=False, note="invalid regime")
            continue
        dp = effective_detuning(abs(delta), g)
        try:
            params = base.params.replace(g=g, theta=theta, delta=delta)
            t_end = max(t_i for _, t_i in items)
            cfg = base.replace(params=params, tau_bracket=(0.0, t_end))
            t, curves, _, _ = run_curves(cfg, t_end)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            for i, t_i in items:
                out[i] = FidelitySample(t_i=t_i, delta_prime=dp, fidelity=float("nan"),
                                        delta=delta, g=g, valid=False, note=str(exc))
            continue
        for i, t_i in items:
            f_runs = np.array([np.interp(t_i, t, c) for c in curves])
            sigma = float(f_runs.std(ddof=1) / math.sqrt(len(f_runs))) if len(f_runs) > 1 else 0.0
            out[i] = FidelitySample(t_i=t_i, delta_prime=dp, fidelity=float(f_runs.mean()),
                                    sigma_f=sigma, delta=delta, g=g)
    return out
