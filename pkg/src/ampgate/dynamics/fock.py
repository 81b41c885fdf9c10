"""Truncated Fock-space propagation with qubit-frequency noise.

The state is expanded as ``sum_j sum_k C[j, k] |psi_j> |k>`` over the three
two-qubit states that couple to ``|dd>``; the dark state psi_0 is dropped.
The ac Zeeman term couples psi_1 and psi_2 and the spin-motion term couples
psi_2 and psi_3 through ``h(t)`` taken from a propagated trajectory.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..errors import IntegrationError, TruncationWarning
from ..model import BranchTrajectory, FockStateVector, InteractionParams
from .noise import NoiseRealization

__all__ = ["FockResult", "propagate_fock", "select_truncation", "fock_fidelity",
           "generator_bound", "fock_steps_per_loop", "zeeman_bound",
           "TRUNCATION_FLOOR", "TOP_POPULATION_LIMIT", "FOCK_STEP_KAPPA"]

TRUNCATION_FLOOR = 23
TOP_POPULATION_LIMIT = 1e-6
#: Largest ``||H|| * step`` used for the Fock RK4 step; keeps the norm drift below 1e-9.
FOCK_STEP_KAPPA = 0.03


def select_truncation(alpha_max: float, safety: float = 1.0, floor: int = TRUNCATION_FLOOR) -> int:
    """``max(floor, ceil((|a| + 4 sqrt|a|)^2 * safety))`` for a predicted peak displacement."""
    a = abs(alpha_max)
    return max(int(floor), int(math.ceil((a + 4 * math.sqrt(a)) ** 2 * safety)))


def generator_bound(omega0_rabi: float, h_max: float, z_max: float, truncation: int) -> float:
    """Upper bound on the norm of the truncated Fock-space generator."""
    return abs(z_max) + 2.0 * abs(omega0_rabi) * abs(h_max) * math.sqrt(truncation)


def zeeman_bound(noise, n_sigma: float = 5.0) -> float:
    """Magnitude the drawn Zeeman shift stays below except in rare runs."""
    if not noise.has_zeeman:
        return 0.0
    mean = 0.0 if noise.zeeman_compensated else abs(noise.zeeman_mean)
    return mean + n_sigma * noise.zeeman_sigma


def fock_steps_per_loop(params: InteractionParams, h_max: float, z_max: float, truncation: int,
                        minimum: int = 2000, kappa: float = FOCK_STEP_KAPPA) -> int:
    """Trajectory steps per loop so that each Fock step (two trajectory steps)
    satisfies ``||H|| * step <= kappa``."""
    bound = generator_bound(params.omega0_rabi, h_max, z_max, truncation)
    loop = 2 * math.pi / params.delta_prime
    n = int(math.ceil(2 * loop * bound / kappa))
    return max(int(minimum), n + n % 2)


@dataclass
class FockResult:
    t: np.ndarray
    fidelity: np.ndarray
    state: FockStateVector
    max_top_population: np.ndarray

    @property
    def final_fidelity(self):
        return self.fidelity[..., -1]


def fock_fidelity(coeffs: np.ndarray):
    """``|<psi_B, 0|Psi>|^2 = |C_{1,0} - i C_{2,0}|^2 / 2``."""
    return 0.5 * np.abs(coeffs[..., 0, 0] - 1j * coeffs[..., 1, 0]) ** 2


def propagate_fock(params: InteractionParams,
                   noise: Union[NoiseRealization, Sequence[NoiseRealization]],
                   traj: BranchTrajectory, truncation: int = TRUNCATION_FLOOR,
                   warn: bool = True) -> FockResult:
    """Propagate the Fock-space coefficients along ``traj``.

    RK4 with step ``2 dt`` so that the stage values of ``h`` are samples of
    the trajectory. The Zeeman shift is held at its exact average over each
    step, which keeps jumps of the piecewise-constant schedule from spoiling
    the order of the scheme. The fidelity is recorded after every step.
    """
    single = isinstance(noise, NoiseRealization)
    runs = [noise] if single else list(noise)
    h = traj.h
    if single:
        if h.ndim != 1:
            raise ValueError("single realization needs an unbatched trajectory")
        h = h[None, :]
    elif h.ndim != 2 or h.shape[0] != len(runs):
        raise ValueError("batched trajectory does not match the number of realizations")
    n_t = h.shape[1]
    if (n_t - 1) % 2:
        raise ValueError("trajectory needs an even number of steps")
    b = len(runs)
    s = int(truncation)
    t = traj.t
    dt2 = t[2] - t[0]

    c = FockStateVector.initial(s, batch=b).coeffs
    omega0 = params.omega0_rabi
    sq = np.sqrt(np.arange(1, s + 1))  # sqrt(k) for k = 1..s

    def ladder(x, hh):
        # conj(h) sqrt(k+1) x[k+1] + h sqrt(k) x[k-1]
        out = np.zeros_like(x)
        out[:, :-1] = np.conj(hh)[:, None] * sq * x[:, 1:]
        out[:, 1:] += hh[:, None] * sq * x[:, :-1]
        return out

    def rhs(y, hh, z):
        out = np.empty_like(y)
        out[:, 0] = -1j * z * y[:, 1]
        out[:, 1] = -1j * z * y[:, 0] - 1j * omega0 * ladder(y[:, 2], hh)
        out[:, 2] = -1j * omega0 * ladder(y[:, 1], hh)
        return out

    tf = t[::2]
    z_step = np.stack([np.diff(np.broadcast_to(r.zeeman_integral(tf), tf.shape)) / np.diff(tf)
                       for r in runs])[:, :, None]
    n_steps = (n_t - 1) // 2
    fid = np.empty((b, n_steps + 1))
    fid[:, 0] = fock_fidelity(c)
    top = np.sum(np.abs(c[:, :, -1]) ** 2, axis=1)
    for m in range(n_steps):
        i = 2 * m
        h0, h1, h2 = h[:, i], h[:, i + 1], h[:, i + 2]
        z = z_step[:, m]
        k1 = rhs(c, h0, z)
        k2 = rhs(c + 0.5 * dt2 * k1, h1, z)
        k3 = rhs(c + 0.5 * dt2 * k2, h1, z)
        k4 = rhs(c + dt2 * k3, h2, z)
        c = c + (dt2 / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        fid[:, m + 1] = fock_fidelity(c)
        np.maximum(top, np.sum(np.abs(c[:, :, -1]) ** 2, axis=1), out=top)
    if not np.all(np.isfinite(c)):
        raise IntegrationError("non-finite Fock coefficients")
    if warn and np.any(top > TOP_POPULATION_LIMIT):
        warnings.warn(f"Fock truncation s={s} insufficient: top-level population reached "
                      f"{float(np.max(top)):.2e}", TruncationWarning, stacklevel=2)
    if single:
        return FockResult(tf, fid[0], FockStateVector(c[0]), top[0])
    return FockResult(tf, fid, FockStateVector(c), top)
