"""CSV readers and writers for trajectories, fidelity grids and calibration data.

Floats are written with ``repr`` so that identical inputs give byte-identical
files and values round-trip exactly.
"""
from __future__ import annotations

import csv
import os
from typing import Iterable, List, Sequence

import numpy as np

from .model import TWO_PI, BranchTrajectory, FidelitySample

TRAJECTORY_COLUMNS = ("t_s", "re_u", "im_u", "re_v", "im_v", "re_alpha", "im_alpha", "phi_geo")
MONTECARLO_COLUMNS = ("g_hz", "theta_rad", "t_i_us", "delta_hz", "delta_prime_hz",
                      "fidelity", "sigma_f", "n_runs", "seed")
CALIBRATION_COLUMNS = ("t_us", "p_bright", "sigma")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_rows(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a header plus rows with deterministic number formatting."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
            w.writerow([_fmt(x) for x in row])


def read_rows(path, columns: Sequence[str] = None) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if columns is not None:
            missing = set(columns) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)


def write_trajectory(path, traj: BranchTrajectory, alpha: np.ndarray, phi: np.ndarray) -> None:
    if traj.batched:
        raise ValueError("write one run at a time")
    rows = zip(traj.t, traj.u.real, traj.u.imag, traj.v.real, traj.v.imag,
               alpha.real, alpha.imag, phi)
    write_rows(path, TRAJECTORY_COLUMNS, rows)


def write_fidelity_grid(path, samples: Sequence[FidelitySample], theta: float,
                        n_runs: int, seed: int) -> None:
    """One row per grid point; ``g`` and ``delta`` are written as ordinary frequencies."""
    rows = []
    for s in samples:
        rows.append((s.g / TWO_PI, theta, s.t_i * 1e6, s.delta / TWO_PI,
                     s.delta_prime / TWO_PI, s.fidelity, s.sigma_f, n_runs, seed))
    write_rows(path, MONTECARLO_COLUMNS, rows)


def read_fidelity_grid(path) -> List[FidelitySample]:
    """Inverse of :func:`write_fidelity_grid` (rows with non-finite F are kept invalid)."""
    out = []
    for r in read_rows(path, MONTECARLO_COLUMNS):
        f = float(r["fidelity"])
        valid = bool(np.isfinite(f))
        out.append(FidelitySample(
            t_i=float(r["t_i_us"]) * 1e-6, delta_prime=TWO_PI * float(r["delta_prime_hz"]),
            fidelity=f, sigma_f=float(r["sigma_f"]), delta=TWO_PI * float(r["delta_hz"]),
            g=TWO_PI * float(r["g_hz"]), valid=valid, note="" if valid else "invalid"))
    return out


def write_calibration(path, t: np.ndarray, p_bright: np.ndarray, sigma=None) -> None:
    sigma = np.zeros_like(p_bright) if sigma is None else np.broadcast_to(sigma, np.shape(p_bright))
    write_rows(path, CALIBRATION_COLUMNS, zip(np.asarray(t) * 1e6, p_bright, sigma))


def read_calibration(path):
    """Return ``(t_s, p_bright, sigma)`` arrays."""
    rows = read_rows(path, CALIBRATION_COLUMNS)
    t = np.array([float(r["t_us"]) for r in rows]) * 1e-6
    p = np.array([float(r["p_bright"]) for r in rows])
    s = np.array([float(r["sigma"]) for r in rows])
    return t, p, s
