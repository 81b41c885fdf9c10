"""Coherent-branch evaluation of the gate.

Without qubit-frequency noise the spin-motion state stays a superposition of
the four S eigenbranches, each carrying a coherent state. Only the ``+-`` and
``-+`` branches are displaced (by ``+alpha`` and ``-alpha``) and both pick up
the same geometric phase.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..errors import EngineMismatchError
from ..model import S_OPERATOR, X_BASIS, BranchTrajectory

__all__ = [
    "GEOMETRIC_PHASE_SIGN",
    "HEATING_PENALTY_CONSTANT",
    "branch_displacement",
    "geometric_phase",
    "trajectory_phase",
    "branch_coefficient",
    "fidelity_from_branch",
    "coherent_fidelity_curve",
    "fidelity_coherent",
    "ideal_propagator",
    "apply_heating_penalty",
]

#: Phi = GEOMETRIC_PHASE_SIGN * Im int conj(alpha) d(alpha). With this choice
#: the enclosed-area phase is positive for delta > 0 and the displaced branches
#: acquire exp(-i Phi), which maps |dd> onto (|dd> + i|uu>)/sqrt(2) at Phi = pi/2.
GEOMETRIC_PHASE_SIGN = -1.0

#: Fraction of n_dot * tau counted as Bell-state infidelity from heating.
HEATING_PENALTY_CONSTANT = 0.5


def branch_displacement(traj: BranchTrajectory, omega0_rabi: float) -> np.ndarray:
    """Displacement ``alpha_{+-}(t) = -i Omega0 int_0^t h dt'`` of the ``+-`` branch."""
    if traj.h_integral is not None:
        integral = traj.h_integral
    else:
        integral = cumulative_trapezoid(traj.h, traj.t, axis=-1, initial=0.0)
    return -1j * omega0_rabi * integral


def geometric_phase(alpha: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Running geometric phase from a sampled displacement path.

    Uses ``Im(conj(alpha) dalpha/dt)`` with second-order finite differences
    and trapezoidal accumulation. :func:`trajectory_phase` is more accurate
    when the propagator-level area integral is available.
    """
    alpha = np.asarray(alpha)
    dalpha = np.gradient(alpha, t, axis=-1, edge_order=2)
    integrand = np.imag(np.conj(alpha) * dalpha)
    return GEOMETRIC_PHASE_SIGN * cumulative_trapezoid(integrand, t, axis=-1, initial=0.0)


def trajectory_phase(traj: BranchTrajectory, omega0_rabi: float) -> np.ndarray:
    """Geometric phase of a propagated trajectory.

    ``Im conj(alpha) dalpha = Omega0^2 Im(conj(A) h) dt`` with ``A = int h``.
    """
    if traj.area_integral is None:
        return geometric_phase(branch_displacement(traj, omega0_rabi), traj.t)
    return GEOMETRIC_PHASE_SIGN * omega0_rabi ** 2 * traj.area_integral


def branch_coefficient(phi):
    """Amplitude ``c_{+-}`` of the displaced branch after acquiring phase ``phi``."""
    return -0.5 * np.exp(1j * GEOMETRIC_PHASE_SIGN * np.asarray(phi))


def fidelity_from_branch(alpha, phi):
    """``|1/2 - i c_{+-} exp(-|alpha|^2 / 2)|^2``."""
    c = branch_coefficient(phi)
    return np.abs(0.5 - 1j * c * np.exp(-0.5 * np.abs(alpha) ** 2)) ** 2


def coherent_fidelity_curve(traj: BranchTrajectory, omega0_rabi: float) -> np.ndarray:
    """Bell-state fidelity at every sample of ``traj``."""
    if traj.has_zeeman:
        raise EngineMismatchError("coherent-branch engine cannot represent qubit-frequency noise")
    alpha = branch_displacement(traj, omega0_rabi)
    phi = trajectory_phase(traj, omega0_rabi)
    return fidelity_from_branch(alpha, phi)


def fidelity_coherent(traj: BranchTrajectory, omega0_rabi: float, tau=None):
    """Bell-state fidelity at gate time ``tau`` (default: last sample).

    Displacement and phase are linearly interpolated between samples.
    """
    if traj.has_zeeman:
        raise EngineMismatchError("coherent-branch engine cannot represent qubit-frequency noise")
    alpha = branch_displacement(traj, omega0_rabi)
    phi = trajectory_phase(traj, omega0_rabi)
    if tau is None:
        return fidelity_from_branch(alpha[..., -1], phi[..., -1])
    t = traj.t
    if not (t[0] <= tau <= t[-1]):
        raise ValueError(f"tau = {tau} outside the trajectory span [{t[0]}, {t[-1]}]")
    i = int(np.clip(np.searchsorted(t, tau) - 1, 0, len(t) - 2))
    w = (tau - t[i]) / (t[i + 1] - t[i])
    a = (1 - w) * alpha[..., i] + w * alpha[..., i + 1]
    p = (1 - w) * phi[..., i] + w * phi[..., i + 1]
    return fidelity_from_branch(a, p)


def ideal_propagator(phi: float) -> np.ndarray:
    """Closed-loop two-qubit propagator ``exp(-i phi S^2 / 4)``.

    The sign of the exponent follows :data:`GEOMETRIC_PHASE_SIGN`, so
    ``ideal_propagator(pi/2) |dd>`` equals ``(|dd> + i|uu>)/sqrt(2)`` up to the
    global phase ``exp(-i pi/4)``.
    """
    s_eig = np.real(np.diag(X_BASIS.conj().T @ S_OPERATOR @ X_BASIS))
    phases = np.exp(1j * GEOMETRIC_PHASE_SIGN * phi * s_eig ** 2 / 4)
    return X_BASIS @ np.diag(phases) @ X_BASIS.conj().T


def apply_heating_penalty(fidelity, heating_rate: float, tau, c_h: float = HEATING_PENALTY_CONSTANT):
    """Scale fidelity by ``1 - c_h * n_dot * tau`` (clipped to stay non-negative)."""
    p = np.clip(c_h * heating_rate * np.asarray(tau, dtype=float), 0.0, 1.0)
    return np.asarray(fidelity) * (1.0 - p)
