"""Physical parameters, state containers and two-qubit basis conventions.

All frequencies are angular (rad/s) and all times are in seconds. The helpers
:func:`from_khz`, :func:`to_khz`, :func:`from_hz` and :func:`to_hz` convert to
and from the ``f = omega / 2pi`` values used in configuration files and CSV
output.

Single-qubit states are ordered ``(|up>, |down>)`` and two-qubit states use the
Kronecker order ``|up up>, |up down>, |down up>, |down down>``. The x-basis
states are ``|+-> = (|up> +- |down>)/sqrt(2)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * np.pi

#: Default out-of-phase radial mode frequency (rad/s).
DEFAULT_MODE_FREQUENCY = TWO_PI * 5.9e6


def from_khz(f_khz):
    return TWO_PI * 1e3 * np.asarray(f_khz, dtype=float)[()]


def to_khz(omega):
    return np.asarray(omega, dtype=float)[()] / (TWO_PI * 1e3)


def from_hz(f_hz):
    return TWO_PI * np.asarray(f_hz, dtype=float)[()]


def to_hz(omega):
    return np.asarray(omega, dtype=float)[()] / TWO_PI


@dataclass(frozen=True)
class InteractionParams:
    """Coupling, parametric drive and detuning of one gate configuration.

    ``omega_p`` is derived from ``omega_mode`` and ``delta`` and is never stored.
    """

    omega0_rabi: float
    g: float = 0.0
    theta: float = 0.0
    delta: float = 0.0
    omega_mode: float = DEFAULT_MODE_FREQUENCY

    def __post_init__(self):
        if not self.omega0_rabi > 0:
            raise ValueError(f"omega0_rabi must be positive, got {self.omega0_rabi}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if not self.omega_mode > 0:
            raise ValueError(f"omega_mode must be positive, got {self.omega_mode}")

    @property
    def omega_p(self) -> float:
        return 2.0 * self.omega_mode + 2.0 * self.delta

    @property
    def amplified_regime(self) -> bool:
        return abs(self.delta) > self.g

    @property
    def delta_prime(self) -> float:
        if not self.amplified_regime:
            return float("nan")
        return float(np.sqrt((abs(self.delta) - self.g) * (abs(self.delta) + self.g)))

    def replace(self, **changes) -> "InteractionParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class NoiseParams:
    """Noise sources entering the gate simulations.

    ``zeeman_compensated`` subtracts ``zeeman_mean`` from every drawn ac Zeeman
    shift, i.e. the spin-motion drive is referenced to the mean-shifted qubit
    frequency. With it disabled the full shift acts as a qubit detuning.
    """

    gamma: float = 0.0
    sigma_delta: float = 0.0
    heating_rate: float = 0.0
    zeeman_mean: float = 0.0
    zeeman_sigma: float = 0.0
    zeeman_interval: float = 1e-3
    zeeman_compensated: bool = True

    def __post_init__(self):
        for name in ("gamma", "sigma_delta", "heating_rate", "zeeman_mean", "zeeman_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.zeeman_interval > 0:
            raise ValueError("zeeman_interval must be positive")

    @property
    def has_zeeman(self) -> bool:
        return self.zeeman_mean > 0 or self.zeeman_sigma > 0

    def replace(self, **changes) -> "NoiseParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class GateSolution:
    tau: float
    delta: float
    delta_prime: float
    r: float
    gain: float
    loops: int = 1
    phi_target: float = np.pi / 2

    def params(self, omega0_rabi: float, g: float, theta: float = 0.0,
               omega_mode: float = DEFAULT_MODE_FREQUENCY) -> InteractionParams:
        return InteractionParams(omega0_rabi=omega0_rabi, g=g, theta=theta,
                                 delta=self.delta, omega_mode=omega_mode)


@dataclass
class BranchTrajectory:
    """Sampled Bogoliubov coefficients of one run or a batch of runs.

    Arrays have shape ``(n_t,)`` for a single run or ``(n_runs, n_t)`` for a
    batch. ``h_integral`` is the running integral of ``h = u + v`` and
    ``area_integral`` the running integral of ``Im(conj(h_integral) * h)``;
    both come from the propagator itself when available.
    """

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    h_integral: Optional[np.ndarray] = None
    area_integral: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    phi_geo: Optional[np.ndarray] = None
    has_zeeman: bool = False

    @property
    def h(self) -> np.ndarray:
        return self.u + self.v

    @property
    def batched(self) -> bool:
        return self.u.ndim == 2

    def symplectic_norm(self) -> np.ndarray:
        return np.abs(self.u) ** 2 - np.abs(self.v) ** 2

    def run(self, i: int) -> "BranchTrajectory":
        """Return run ``i`` of a batched trajectory."""
        if not self.batched:
            raise ValueError("trajectory is not batched")
        pick = lambda a: None if a is None else a[i]
        return BranchTrajectory(self.t, self.u[i], self.v[i], pick(self.h_integral),
                                pick(self.area_integral), pick(self.alpha), pick(self.phi_geo),
                                self.has_zeeman)


@dataclass
class FockStateVector:
    """Coefficients ``C[j, k]`` on ``|psi_{j+1}> |k>``, j in 0..2, k in 0..s."""

    coeffs: np.ndarray

    @property
    def truncation(self) -> int:
        return self.coeffs.shape[-1] - 1

    def norm(self):
        return np.sum(np.abs(self.coeffs) ** 2, axis=(-2, -1))

    def top_population(self):
        return np.sum(np.abs(self.coeffs[..., :, -1]) ** 2, axis=-1)

    @classmethod
    def initial(cls, truncation: int, batch: Optional[int] = None) -> "FockStateVector":
        shape = (3, truncation + 1) if batch is None else (batch, 3, truncation + 1)
        c = np.zeros(shape, dtype=complex)
        c[..., 0, 0] = 1 / np.sqrt(2)
        c[..., 1, 0] = -1 / np.sqrt(2)
        return cls(c)


@dataclass(frozen=True)
class FidelitySample:
    """One point of a fidelity grid; ``delta`` and ``g`` keep the raw coordinates."""

    t_i: float
    delta_prime: float
    fidelity: float
    sigma_f: float = 0.0
    delta: Optional[float] = None
    g: Optional[float] = None
    valid: bool = True
    note: str = ""

    def __post_init__(self):
        if self.valid:
            if not (0.0 <= self.fidelity <= 1.0):
                raise ValueError(f"fidelity {self.fidelity} outside [0, 1]")
            if self.sigma_f < 0:
                raise ValueError("sigma_f must be non-negative")


# --- two-qubit basis --------------------------------------------------------

UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)
PLUS = (UP + DOWN) / np.sqrt(2)
MINUS = (UP - DOWN) / np.sqrt(2)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

#: Collective operator S = sigma_x^1 - sigma_x^2 (out-of-phase mode).
S_OPERATOR = np.kron(SIGMA_X, IDENTITY_2) - np.kron(IDENTITY_2, SIGMA_X)

DOWN_DOWN = np.kron(DOWN, DOWN)
UP_UP = np.kron(UP, UP)

#: Target Bell state (|dd> + i|uu>)/sqrt(2).
BELL_TARGET = (DOWN_DOWN + 1j * UP_UP) / np.sqrt(2)

X_BRANCHES = ("++", "+-", "-+", "--")
S_EIGENVALUES = {"++": 0.0, "+-": 2.0, "-+": -2.0, "--": 0.0}

#: Columns are |++>, |+->, |-+>, |--> in z coordinates.
X_BASIS = np.column_stack([np.kron(PLUS, PLUS), np.kron(PLUS, MINUS),
                           np.kron(MINUS, PLUS), np.kron(MINUS, MINUS)])

_pp, _pm, _mp, _mm = X_BASIS.T
#: Columns are psi_0, psi_1, psi_2, psi_3 in z coordinates.
PSI_BASIS = np.column_stack([(_pp - _mm) / np.sqrt(2), (_pp + _mm) / np.sqrt(2),
                             (_pm + _mp) / np.sqrt(2), (_pm - _mp) / np.sqrt(2)])


def to_x_basis(state: np.ndarray) -> np.ndarray:
    return X_BASIS.conj().T @ state


def from_x_basis(coeffs: np.ndarray) -> np.ndarray:
    return X_BASIS @ coeffs


def to_psi_basis(state: np.ndarray) -> np.ndarray:
    return PSI_BASIS.conj().T @ state


def from_psi_basis(coeffs: np.ndarray) -> np.ndarray:
    return PSI_BASIS @ coeffs


def decompose_initial_state() -> dict:
    """Decompose ``|down down>`` in the S eigenbasis and in the psi basis.

    Returns
    -------
    dict
        ``{"x": {branch: coeff}, "psi": (c0, c1, c2, c3)}`` where ``c0`` is
        the overlap with the dark state psi_0.
    """
    x = to_x_basis(DOWN_DOWN)
    psi = to_psi_basis(DOWN_DOWN)
    return {"x": dict(zip(X_BRANCHES, x)), "psi": tuple(psi)}


def bell_state_overlap(two_qubit_state, atol: float = 1e-9) -> float:
    """Return ``|<psi_B|state>|^2`` for a normalized two-qubit state vector."""
    state = np.asarray(two_qubit_state, dtype=complex)
    if state.shape != (4,):
        raise ValueError(f"expected a 4-vector, got shape {state.shape}")
    norm = np.vdot(state, state).real
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state is not normalized (norm^2 = {norm})")
    return float(abs(np.vdot(BELL_TARGET, state)) ** 2)
