"""Calibration models: squeezing strength from sideband flopping, and the
qubit-frequency shift distribution from two-qubit Ramsey fringes.

The sideband model is a single-mode, single-detector simplification: the
bright-state probability after a motion-adding sideband pulse of duration
``t`` is ``sum_n P(n) sin^2(sqrt(n + 1) Omega_sb t / 2)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gammaln

from .errors import ConvergenceError, IdentifiabilityWarning

__all__ = [
    "SqueezeCalib", "SqueezeFit", "RamseyModel", "RamseyCurves", "RamseyFit",
    "squeezed_vacuum_populations", "squeezed_thermal_populations", "thermal_populations",
    "population_cutoff", "sideband_signal", "squeeze_signal", "fit_squeeze_param",
    "ramsey_populations", "fit_ramsey", "contrast_half_time",
]

DEFAULT_NBAR = 0.3


@dataclass(frozen=True)
class SqueezeCalib:
    """Squeezing magnitude ``|xi| = g t`` produced by a drive of duration ``t``."""

    xi: float
    duration: float
    omega_sb: float
    nbar: float = DEFAULT_NBAR

    def __post_init__(self):
        if self.xi < 0:
            raise ValueError("|xi| must be non-negative")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")

    @property
    def g(self) -> float:
        return self.xi / self.duration


def population_cutoff(r: float, nbar: float = 0.0) -> int:
    """Fock cutoff at which the neglected population is below 1e-6.

    Set by the slowest geometric decay ``(l / (1 + l))^n`` of the number
    distribution, with ``l = N + |M|`` as in :func:`squeezed_thermal_populations`.
    """
    l1 = (nbar + 0.5) * (math.cosh(2 * r) + math.sinh(2 * r)) - 0.5
    return int(math.ceil(16 * (1 + l1))) + 40


def squeezed_vacuum_populations(r: float, n_max: int, return_tail: bool = False):
    """Number distribution of the squeezed vacuum.

    ``P(2m) = (2m)! / (2^m m!)^2 tanh^{2m}(r) / cosh(r)`` and ``P(odd) = 0``.

    Parameters
    ----------
    r : float
        Squeezing magnitude ``|xi|``.
    n_max : int
        Largest Fock number returned.
    return_tail : bool
        Also return the population above ``n_max``.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    p = np.zeros(n_max + 1)
    m = np.arange(n_max // 2 + 1)
    if r == 0:
        p[0] = 1.0
    else:
        log_p = (gammaln(2 * m + 1) - 2 * (m * math.log(2) + gammaln(m + 1))
                 + 2 * m * math.log(math.tanh(r)) - math.log(math.cosh(r)))
        p[2 * m] = np.exp(log_p)
    if return_tail:
        return p, max(0.0, 1.0 - float(p.sum()))
    return p


def thermal_populations(nbar: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if nbar == 0:
        return (n == 0).astype(float)
    return nbar ** n / (1 + nbar) ** (n + 1)


def _half_binomial_series(mu: float, n_max: int) -> np.ndarray:
    # coefficients of (1 - mu z)^(-1/2): C(2k, k) / 4^k * mu^k
    k = np.arange(n_max + 1)
    c = np.empty(n_max + 1)
    c[0] = 1.0
    c[1:] = np.cumprod((2 * k[1:] - 1) / (2 * k[1:]) * mu)
    return c


def squeezed_thermal_populations(r: float, nbar: float, n_max: int) -> np.ndarray:
    """Populations of ``S(xi) rho_th S(xi)^dag`` (independent of the squeezing phase).

    For a zero-mean Gaussian state with ``N = <a^dag a>`` and ``|M| = |<a^2>|``
    the number generating function is
    ``G(z) = [(1 + l1 (1 - z)) (1 + l2 (1 - z))]^(-1/2)`` with ``l = N +- |M|``,
    so ``P(n)`` is a convolution of two central-binomial series. For weak
    thermal noise ``l2 < 0`` and the series alternate; the odd populations then
    cancel to rounding level and are clipped at zero.
    """
    if r < 0 or nbar < 0:
        raise ValueError("r and nbar must be non-negative")
    if nbar == 0:
        return squeezed_vacuum_populations(r, n_max)
    n_mean = (nbar + 0.5) * math.cosh(2 * r) - 0.5
    m_abs = (nbar + 0.5) * math.sinh(2 * r)
    l1, l2 = n_mean + m_abs, n_mean - m_abs
    s1 = _half_binomial_series(l1 / (1 + l1), n_max)
    s2 = _half_binomial_series(l2 / (1 + l2), n_max)
    p = np.convolve(s1, s2)[: n_max + 1] / math.sqrt((1 + l1) * (1 + l2))
    return np.clip(p, 0.0, None)


def sideband_signal(populations, omega_sb: float, t) -> np.ndarray:
    """Bright-state probability ``sum_n P(n) sin^2(sqrt(n + 1) Omega_sb t / 2)``."""
    p = np.asarray(populations, dtype=float)
    if p.sum() > 1 + 1e-9:
        raise ValueError("populations sum to more than one")
    t = np.asarray(t, dtype=float)
    rabi = np.sqrt(np.arange(1, len(p) + 1)) * omega_sb
    return np.sin(0.5 * np.multiply.outer(t, rabi)) ** 2 @ p


def squeeze_signal(xi: float, omega_sb: float, t, nbar: float = 0.0) -> np.ndarray:
    """Sideband signal of a squeezed (thermal) state with magnitude ``xi``."""
    n_max = population_cutoff(xi, nbar)
    return sideband_signal(squeezed_thermal_populations(xi, nbar, n_max), omega_sb, t)


@dataclass(frozen=True)
class SqueezeFit:
    xi: float
    xi_err: float
    g: float
    g_err: float
    residual_norm: float


def fit_squeeze_param(t, signal, omega_sb: float, duration: float, nbar: float = 0.0,
                      sigma=None, xi_max: float = 3.0) -> SqueezeFit:
    """Least-squares ``|xi|`` with ``Omega_sb`` and ``nbar`` held fixed.

    A coarse scan over ``[0, xi_max]`` seeds a bounded trust-region refinement.

    Raises
    ------
    ConvergenceError
        If the refinement does not converge.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(signal, dtype=float)
    w = np.ones_like(y) if sigma is None else 1.0 / np.broadcast_to(sigma, y.shape)
    if omega_sb * (t.max() - t.min()) < 2 * math.pi:
        warnings.warn("samples cover less than one flopping period", IdentifiabilityWarning,
                      stacklevel=2)

    def resid(p):
        return (squeeze_signal(p[0], omega_sb, t, nbar) - y) * w

    grid = np.linspace(0.0, xi_max, 61)
    cost = [np.sum(resid([x]) ** 2) for x in grid]
    x0 = float(np.clip(grid[int(np.argmin(cost))], 1e-6, xi_max))
    res = least_squares(resid, [x0], bounds=([0.0], [xi_max]), xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, diff_step=1e-7)
    if not res.success:
        raise ConvergenceError(f"squeeze fit failed: {res.message}")
    jtj = float(res.jac[:, 0] @ res.jac[:, 0])
    if jtj < 1e-12 * len(y):
        warnings.warn("residual is flat in |xi|; parameter is not identifiable",
                      IdentifiabilityWarning, stacklevel=2)
    dof = max(len(y) - 1, 1)
    s2 = 1.0 if sigma is not None else 2 * res.cost / dof
    err = math.sqrt(s2 / jtj) if jtj > 0 else math.inf
    xi = float(res.x[0])
    return SqueezeFit(xi=xi, xi_err=err, g=xi / duration, g_err=err / duration,
                      residual_norm=float(np.sqrt(2 * res.cost)))


# --- Ramsey ----------------------------------------------------------------

@dataclass(frozen=True)
class RamseyModel:
    """Gaussian distribution of a common static qubit shift (rad/s)."""

    mean: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass
class RamseyCurves:
    """``p_dd`` is P(down down) and ``parity`` is ``<sigma_z sigma_z>`` after the sequence."""

    t: np.ndarray
    p_dd: np.ndarray
    parity: np.ndarray


def _ramsey_closed_form(mean, sigma, t):
    # <cos(k phi)> for phi ~ N(mean t, (sigma t)^2)
    c1 = np.cos(mean * t) * np.exp(-0.5 * (sigma * t) ** 2)
    c2 = np.cos(2 * mean * t) * np.exp(-2.0 * (sigma * t) ** 2)
    p_dd = (1.0 - 2.0 * c1 + 0.5 * (1.0 + c2)) / 4.0
    parity = 0.5 * (1.0 + c2)
    return p_dd, parity


def ramsey_populations(model: RamseyModel, t_r, n_draws: Optional[int] = None,
                       seed: int = 0) -> RamseyCurves:
    """Two-qubit Ramsey signals averaged over static shifts.

    Both qubits start in ``|up>`` and see the same shift ``delta_ac``, so each
    accumulates phase ``phi = delta_ac t_R`` between the two pi/2 pulses and
    ``P(down down) = sin^4(phi / 2)``, ``parity = cos^2(phi)``. At ``t_R = 0``
    the qubits return to ``|up up>`` and ``P(down down) = 0``.

    With ``n_draws`` the average runs over that many Gaussian draws;
    otherwise the exact Gaussian average is used.
    """
    t = np.asarray(t_r, dtype=float)
    if n_draws is None:
        p_dd, parity = _ramsey_closed_form(model.mean, model.sigma, t)
        return RamseyCurves(t, p_dd, parity)
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    shifts = np.random.default_rng(seed).normal(model.mean, model.sigma, n_draws)
    phi = np.multiply.outer(shifts, t)
    return RamseyCurves(t, np.mean(np.sin(phi / 2) ** 4, axis=0),
                        np.mean(np.cos(phi) ** 2, axis=0))


def contrast_half_time(sigma: float) -> float:
    """Ramsey time at which the fringe envelope ``exp(-sigma^2 t^2 / 2)`` is 1/2."""
    return math.sqrt(2 * math.log(2)) / sigma


@dataclass(frozen=True)
class RamseyFit:
    mean: float
    sigma: float
    mean_err: float
    sigma_err: float
    residual_norm: float


def _dominant_frequency(t, y):
    dt = np.min(np.diff(t))
    n = int(2 ** math.ceil(math.log2(16 * len(t))))
    grid = np.arange(n) * dt
    yi = np.interp(grid, t - t[0], y - y.mean(), right=0.0)
    spec = np.abs(np.fft.rfft(yi))
    freqs = np.fft.rfftfreq(n, dt) * 2 * math.pi
    spec[0] = 0.0
    return float(freqs[int(np.argmax(spec))])


def fit_ramsey(t_r, p_dd, parity=None, guess: Optional[RamseyModel] = None,
               sigma_p=None) -> RamseyFit:
    """Least-squares ``(mean, sigma)`` from P(down down) and optional parity data.

    Without a guess the mean shift is seeded from the dominant Fourier
    component of ``P(down down)`` and ``sigma`` from a short scan.
    """
    t = np.asarray(t_r, dtype=float)
    y = np.asarray(p_dd, dtype=float)
    ys = [y] if parity is None else [y, np.asarray(parity, dtype=float)]
    data = np.concatenate(ys)
    w = np.ones_like(data) if sigma_p is None else 1.0 / np.resize(
        np.broadcast_to(sigma_p, y.shape), data.shape)

    def resid(p):
        model = _ramsey_closed_form(p[0], abs(p[1]), t)
        return (np.concatenate(model[: len(ys)]) - data) * w

    if guess is None:
        mu0 = _dominant_frequency(t, y)
        span = t.max() - t.min()
        sig_grid = np.linspace(0.0, 6.0 / span, 61)
        costs = [np.sum(resid([mu0, s]) ** 2) for s in sig_grid]
        x0 = [mu0, float(sig_grid[int(np.argmin(costs))])]
    else:
        x0 = [guess.mean, guess.sigma]
    res = least_squares(resid, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14, x_scale="jac")
    if not res.success:
        raise ConvergenceError(f"Ramsey fit failed: {res.message}")
    dof = max(len(data) - 2, 1)
    s2 = 1.0 if sigma_p is not None else 2 * res.cost / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * s2
        errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        errs = np.array([math.inf, math.inf])
    return RamseyFit(mean=float(res.x[0]), sigma=float(abs(res.x[1])), mean_err=float(errs[0]),
                     sigma_err=float(errs[1]), residual_norm=float(np.sqrt(2 * res.cost)))
