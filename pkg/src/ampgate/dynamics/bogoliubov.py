"""Stochastic propagation of the Bogoliubov coefficients u(t), v(t).

In the interaction picture of the quadratic part of the Hamiltonian the
creation operator evolves as ``u a^dag + conj(v) a`` with

    du/dt = [-d - i W(t)] u + i g (e^{i theta} + c.r.) v
    dv/dt = [-d + i W(t)] v - i g (e^{-i theta} + c.r.) u

where ``W = delta - freq_offset + noise`` and ``d`` is the damping term
(non-zero only in the literal noise mode). The counter-rotating terms ``c.r.``
oscillate at ``2 omega_p`` and are dropped when ``rwa`` is set.

The running integrals ``A = int h dt`` and ``P = int Im(conj(A) h) dt`` are
propagated alongside so displacement and enclosed area inherit the RK4 order.
"""
from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from ..errors import IntegrationError, InvalidRegimeError
from ..model import BranchTrajectory, InteractionParams
from .noise import NONRWA_MIN_POINTS, IntegratorOptions, NoiseRealization

__all__ = ["integrate_uv", "step_size"]


def step_size(params: InteractionParams, t_end: float, opts: IntegratorOptions):
    """Return ``(dt, n_steps)`` with ``n_steps`` even and ``dt * n_steps == t_end``.

    ``n_steps`` is the coarse count times ``2**opts.refine``.
    """
    if not params.amplified_regime:
        raise InvalidRegimeError(f"|delta| = {abs(params.delta)} must exceed g = {params.g}")
    period = 2 * math.pi / params.omega_p
    if opts.step is not None:
        limit = period / NONRWA_MIN_POINTS
        if not opts.rwa and opts.step > limit * (1 + 1e-12):
            raise IntegrationError(
                f"step {opts.step:.3e} s exceeds (2pi/omega_p)/{NONRWA_MIN_POINTS}"
                f" = {limit:.3e} s required without the rotating-wave approximation")
        target = opts.step
    else:
        target = 2 * math.pi / params.delta_prime / opts.steps_per_loop
        if not opts.rwa:
            target = min(target, period / opts.nonrwa_points_per_period)
    n = max(2, int(math.ceil(t_end / target)))
    n += n % 2
    n *= 2 ** opts.refine
    return t_end / n, n


def integrate_uv(params: InteractionParams,
                 noise: Union[NoiseRealization, Sequence[NoiseRealization]],
                 t_end: float, opts: IntegratorOptions = IntegratorOptions()) -> BranchTrajectory:
    """Integrate u, v from ``u(0) = 1, v(0) = 0`` up to ``t_end``.

    Passing a sequence of realizations integrates them as one batch and
    returns arrays of shape ``(n_runs, n_t)``; each run only ever touches its
    own column so results do not depend on the batch composition.
    """
    single = isinstance(noise, NoiseRealization)
    runs = [noise] if single else list(noise)
    if not runs:
        raise ValueError("no noise realizations given")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    dt, n = step_size(params, t_end, opts)
    b = len(runs)

    literal = opts.noise_mode == "literal"
    gamma = np.array([r.gamma for r in runs])
    damping = gamma if literal else np.zeros(b)
    noise_scale = (gamma * np.sqrt(1.0 / dt)) if literal else np.sqrt(gamma / dt)
    xi = np.stack([r.unit_increments(n, opts.refine) for r in runs], axis=1)  # (n, b)
    w_base = params.delta - np.array([r.freq_offset for r in runs])
    w_all = w_base[None, :] + noise_scale[None, :] * xi

    g = params.g
    ep = np.exp(1j * params.theta)
    em = np.conj(ep)
    two_wp = 2 * params.omega_p
    rwa = opts.rwa

    def rhs(y, t, w):
        u, v, a = y[0], y[1], y[2]
        if rwa or g == 0.0:
            cu, cv = ep, em
        else:
            cu = ep + np.exp(-1j * (two_wp * t + params.theta))
            cv = em + np.exp(1j * (two_wp * t + params.theta))
        h = u + v
        out = np.empty_like(y)
        out[0] = (-damping - 1j * w) * u + 1j * g * cu * v
        out[1] = (-damping + 1j * w) * v - 1j * g * cv * u
        out[2] = h
        out[3] = np.imag(np.conj(a) * h)
        return out

    ys = np.empty((n + 1, 4, b), dtype=complex)
    y = np.zeros((4, b), dtype=complex)
    y[0] = 1.0
    ys[0] = y
    half = 0.5 * dt
    for k in range(n):
        t = k * dt
        w = w_all[k]
        k1 = rhs(y, t, w)
        k2 = rhs(y + half * k1, t + half, w)
        k3 = rhs(y + half * k2, t + half, w)
        k4 = rhs(y + dt * k3, t + dt, w)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[k + 1] = y
        if k % 256 == 0 and not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t = {t:.6e} s (step {k})")
    if not np.all(np.isfinite(ys)):
        raise IntegrationError("non-finite values in the integrated trajectory")

    t = np.linspace(0.0, t_end, n + 1)
    ys = np.moveaxis(ys, 0, -1)  # (4, b, n+1)
    traj = BranchTrajectory(t=t, u=ys[0], v=ys[1], h_integral=ys[2], area_integral=ys[3].real,
                            has_zeeman=any(r.zeeman is not None for r in runs))
    return traj.run(0) if single else traj
