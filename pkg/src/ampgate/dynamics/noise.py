"""Noise realizations and integrator settings.

A realization is a pure function of its seed and the :class:`NoiseParams` it
was drawn from. Each run's seed is a child ``SeedSequence`` keyed by the run
index, so the draws for run ``i`` never depend on how many other runs exist or
in which order they are evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..model import NoiseParams

NOISE_MODES = ("calibrated", "literal")
#: Coarsest resolution of the pump period allowed without the rotating-wave approximation.
NONRWA_MIN_POINTS = 20

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class IntegratorOptions:
    """Fixed-step RK4 settings.

    ``step`` overrides the automatic choice of ``2 pi / delta' / steps_per_loop``.
    Without the rotating-wave approximation the automatic step is further
    capped at ``(2 pi / omega_p) / nonrwa_points_per_period``, and any step
    above ``(2 pi / omega_p) / NONRWA_MIN_POINTS`` is rejected.
    ``noise_mode="calibrated"`` uses a phase-noise process with
    ``<W(t) W(t')> = gamma delta(t - t')`` and no damping term, which is the
    stochastic unraveling of the phase-damping master equation.
    ``noise_mode="literal"`` keeps the explicit ``-gamma`` damping and a noise
    strength ``sqrt(gamma) * eta`` with ``<eta eta> = gamma delta``.
    ``refine`` halves the step that many times. The white-noise increments of
    the finer grid are Brownian-bridge splits of the coarse ones, so every
    refinement level sees the same noise path at the coarse grid points.
    """

    steps_per_loop: int = 2000
    rwa: bool = True
    noise_mode: str = "calibrated"
    step: Optional[float] = None
    nonrwa_points_per_period: int = 80
    refine: int = 0

    def __post_init__(self):
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
        if self.nonrwa_points_per_period < NONRWA_MIN_POINTS:
            raise ValueError(f"nonrwa_points_per_period must be >= {NONRWA_MIN_POINTS}")
        if self.steps_per_loop < 8:
            raise ValueError("steps_per_loop too small")
        if self.refine < 0:
            raise ValueError("refine must be >= 0")


@dataclass(frozen=True)
class ZeemanSchedule:
    """Piecewise-constant qubit frequency shift.

    ``values[k]`` holds on ``[k T - offset, (k + 1) T - offset)`` where ``T`` is
    the resample interval and ``offset`` the phase of the resample clock at
    ``t = 0``.
    """

    values: np.ndarray
    clock_offset: float
    interval: float

    def at(self, t):
        idx = np.floor((np.asarray(t) + self.clock_offset) / self.interval).astype(int)
        if np.any(idx >= len(self.values)):
            raise ValueError("time beyond the drawn Zeeman schedule horizon")
        return self.values[idx]

    def integral(self, t):
        """Exact ``int_0^t`` of the shift (``t`` must lie inside the horizon)."""
        t = np.asarray(t, dtype=float)
        idx = np.floor((t + self.clock_offset) / self.interval).astype(int)
        if np.any(idx >= len(self.values)):
            raise ValueError("time beyond the drawn Zeeman schedule horizon")
        cum = np.concatenate([[0.0], np.cumsum(self.values) * self.interval])
        cum -= self.values[0] * self.clock_offset
        return cum[idx] + self.values[idx] * (t - (idx * self.interval - self.clock_offset))


@dataclass(frozen=True)
class NoiseRealization:
    seed: np.random.SeedSequence
    gamma: float = 0.0
    freq_offset: float = 0.0
    zeeman: Optional[ZeemanSchedule] = None
    zero_path: bool = False

    def unit_increments(self, n_steps: int, refine: int = 0) -> np.ndarray:
        """Standard-normal white-noise samples for ``n_steps`` integrator steps.

        ``n_steps // 2**refine`` samples are drawn on the coarse grid and each
        level splits every sample ``xi`` into ``((xi + z) / sqrt 2, (xi - z) / sqrt 2)``
        with a fresh normal ``z``, which keeps the sum over each coarse step fixed.
        """
        factor = 2 ** refine
        if n_steps % factor:
            raise ValueError(f"n_steps = {n_steps} is not a multiple of 2**{refine}")
        if self.zero_path or self.gamma == 0.0:
            return np.zeros(n_steps)
        root = _child(self.seed, 2)
        xi = np.random.default_rng(root).standard_normal(n_steps // factor)
        for level in range(1, refine + 1):
            z = np.random.default_rng(_child(root, level)).standard_normal(len(xi))
            xi = np.stack([xi + z, xi - z], axis=1).reshape(-1) / math.sqrt(2.0)
        return xi

    def zeeman_at(self, t):
        if self.zeeman is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.zeeman.at(t)

    def zeeman_integral(self, t):
        if self.zeeman is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.zeeman.integral(t)


def _child(ss: np.random.SeedSequence, key: int) -> np.random.SeedSequence:
    """Child ``key`` of ``ss``; unlike ``spawn`` this does not mutate ``ss``."""
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(key),),
                                  pool_size=ss.pool_size)


def _as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def draw_realization(noise: NoiseParams, seed: SeedLike, horizon: float = 0.02,
                     zero_path: bool = False) -> NoiseRealization:
    """Draw the frequency offset, Zeeman schedule and dephasing stream for one run."""
    ss = _as_seed_sequence(seed)
    offset_ss, zeeman_ss = _child(ss, 0), _child(ss, 1)
    freq_offset = 0.0
    if noise.sigma_delta > 0:
        freq_offset = float(np.random.default_rng(offset_ss).normal(0.0, noise.sigma_delta))
    zeeman = None
    if noise.has_zeeman:
        rng = np.random.default_rng(zeeman_ss)
        offset = float(rng.uniform(0.0, noise.zeeman_interval))
        n = int(math.ceil((horizon + noise.zeeman_interval) / noise.zeeman_interval)) + 1
        values = rng.normal(noise.zeeman_mean, noise.zeeman_sigma, n)
        if noise.zeeman_compensated:
            values = values - noise.zeeman_mean
        zeeman = ZeemanSchedule(values=values, clock_offset=offset, interval=noise.zeeman_interval)
    return NoiseRealization(seed=ss, gamma=noise.gamma, freq_offset=freq_offset,
                            zeeman=zeeman, zero_path=zero_path)


def run_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Counter-based sub-seed of run ``index``."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))


def draw_realizations(noise: NoiseParams, master_seed: int, indices: Sequence[int],
                      horizon: float = 0.02) -> list:
    return [draw_realization(noise, run_seed(master_seed, i), horizon) for i in indices]


def noiseless() -> NoiseRealization:
    return NoiseRealization(seed=np.random.SeedSequence(0))
