"""Closed-form amplification quantities and the gate-parameter solver.

Gate condition (single detuning branch delta > g): the loop closes after
``tau = 2 pi K / delta'`` and the accumulated geometric phase is
``K * 2 pi (Omega0 |f| / delta')**2`` with ``|f|**2 = (delta + g cos theta) / delta'``.
Eliminating ``tau`` leaves one scalar equation in ``delta``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, InvalidRegimeError, NoSolutionError
from .model import GateSolution

__all__ = [
    "bogoliubov_r",
    "gain",
    "gain_from_r",
    "effective_detuning",
    "loop_phase",
    "solve_gate",
]


def _check_regime(delta, g):
    if g < 0:
        raise InvalidRegimeError(f"g must be non-negative, got {g}")
    if not abs(delta) > g:
        raise InvalidRegimeError(f"|delta| = {abs(delta)} must exceed g = {g}")


def bogoliubov_r(delta: float, g: float) -> float:
    """Squeezing parameter ``r = ln[(delta + g)/(delta - g)] / 4``."""
    _check_regime(delta, g)
    return 0.25 * math.log((delta + g) / (delta - g))


def effective_detuning(delta: float, g: float) -> float:
    """``delta' = sqrt(delta^2 - g^2)``, evaluated without cancellation."""
    _check_regime(delta, g)
    d = abs(delta)
    return math.sqrt((d - g) * (d + g))


def gain(delta: float, g: float, theta: float) -> float:
    """Amplification factor ``|(delta + g cos theta) / delta'|**(1/2)``.

    Negative detunings are handled by the same expression, which reproduces
    the rule that ``delta -> -delta`` is equivalent to ``theta -> theta + pi``.
    """
    dp = effective_detuning(delta, g)
    return math.sqrt(abs(delta + g * math.cos(theta)) / dp)


def gain_from_r(r: float, theta: float) -> float:
    """``|f(r, theta)| = sqrt(cosh 2r + cos(theta) sinh 2r)``.

    Evaluated as ``e^{2r} cos^2(theta/2) + e^{-2r} sin^2(theta/2)``, a sum of
    non-negative terms, so large ``r`` does not cancel.
    """
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    return math.sqrt(math.exp(2 * r) * c * c + math.exp(-2 * r) * s * s)


def loop_phase(omega0_rabi: float, delta: float, g: float, theta: float) -> float:
    """Geometric phase accumulated over one closed loop."""
    dp = effective_detuning(delta, g)
    return 2 * math.pi * omega0_rabi ** 2 * abs(delta + g * math.cos(theta)) / dp ** 3


def solve_gate(omega0_rabi: float, g: float = 0.0, theta: float = 0.0,
               phi_target: float = math.pi / 2, loops: int = 1,
               max_expansions: int = 200, maxiter: int = 500) -> GateSolution:
    """Solve for the detuning and duration that close ``loops`` loops with
    total geometric phase ``phi_target``.

    The unknown is ``x = delta - g > 0``. The residual
    ``log(K 2 pi Omega0^2 (delta + g cos theta)) - log(phi_target) - 1.5 log(delta'^2)``
    diverges to ``+inf`` as ``x -> 0`` and to ``-inf`` as ``x -> inf``, so a
    sign change is bracketed by geometric expansion and then refined with
    Brent's method.

    Raises
    ------
    NoSolutionError
        If no sign change is found.
    ConvergenceError
        If the root refinement fails or the residual check is not met.
    """
    if not omega0_rabi > 0:
        raise ValueError("omega0_rabi must be positive")
    if g < 0:
        raise InvalidRegimeError("g must be non-negative")
    if not phi_target > 0:
        raise ValueError("phi_target must be positive")
    if int(loops) != loops or loops < 1:
        raise ValueError("loops must be a positive integer")
    loops = int(loops)
    cos_t = math.cos(theta)
    log_lhs = math.log(loops * 2 * math.pi * omega0_rabi ** 2) - math.log(phi_target)

    def residual(x):
        d = g + x
        num = d + g * cos_t
        if num <= 0:
            return -math.inf
        return log_lhs + math.log(num) - 1.5 * math.log(x * (x + 2 * g))

    lo = max(g * 1e-12, omega0_rabi * 1e-12)
    hi = max(10 * omega0_rabi, 4 * g)
    f_lo = residual(lo)
    f_hi = residual(hi)
    n = 0
    while f_hi > 0:
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = residual(hi)
        n += 1
        if n > max_expansions:
            raise NoSolutionError("no sign change found for the gate equation")
    while not f_lo > 0:
        lo *= 1e-3
        f_lo = residual(lo)
        n += 1
        if n > max_expansions or lo == 0.0:
            raise NoSolutionError("no root with delta > g")
    try:
        x, info = brentq(residual, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                         maxiter=maxiter, full_output=True)
    except RuntimeError as exc:
        raise ConvergenceError(str(exc)) from exc
    if not info.converged:
        raise ConvergenceError(f"root refinement stopped after {info.iterations} iterations")

    delta = g + x
    dp = math.sqrt(x * (x + 2 * g))
    tau = 2 * math.pi * loops / dp
    sol = GateSolution(tau=tau, delta=delta, delta_prime=dp,
                       r=0.25 * math.log((delta + g) / x) if x > 0 else math.inf,
                       gain=math.sqrt(abs(delta + g * cos_t) / dp),
                       loops=loops, phi_target=phi_target)
    phase = loops * loop_phase(omega0_rabi, delta, g, theta)
    if abs(phase - phi_target) > 1e-10 * phi_target or abs(tau * dp - 2 * math.pi * loops) > 1e-10 * 2 * math.pi * loops:
        raise ConvergenceError(f"residual check failed: phase {phase} vs {phi_target}")
    return sol
