"""Quadratic-surface estimate of the optimal gate time and its bootstrap interval.

The surface ``F(x, y) = a0 + a1 (x - a4)^2 + a2 (y - a5)^2 + a3 (x - a4)(y - a5)``
with ``x = t_I`` and ``y = delta'`` is fitted in expanded (linear) form on
standardized coordinates and converted to vertex form afterwards.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceError, FitError
from .model import FidelitySample

__all__ = [
    "QuadSurfaceFit", "BootstrapResult", "fit_quad_surface", "deltas_to_delta_prime",
    "bootstrap_t_est", "speedup", "surface_value",
]

N_PARAMS = 6
MAX_FAILURE_FRACTION = 0.1


@dataclass
class QuadSurfaceFit:
    """Vertex-form coefficients ``a = (a0, ..., a5)`` and their covariance.

    ``has_maximum`` is true when the Hessian is negative definite
    (``a1 < 0``, ``a2 < 0`` and ``4 a1 a2 - a3^2 > 0``); otherwise the vertex is
    a saddle or minimum and ``t_est`` is only the stationary point.
    """

    a: np.ndarray
    cov: np.ndarray
    residual_norm: float
    has_maximum: bool
    n_points: int

    @property
    def t_est(self) -> float:
        return float(self.a[4])

    @property
    def delta_prime_est(self) -> float:
        return float(self.a[5])

    @property
    def f_max(self) -> float:
        return float(self.a[0])

    def __call__(self, x, y):
        return surface_value(self.a, x, y)


@dataclass
class BootstrapResult:
    estimate: float
    lower: float
    upper: float
    n_resamples: int
    n_failed: int
    seed: int
    draws: np.ndarray

    @property
    def minus(self) -> float:
        return self.estimate - self.lower

    @property
    def plus(self) -> float:
        return self.upper - self.estimate


def surface_value(a, x, y):
    dx = np.asarray(x) - a[4]
    dy = np.asarray(y) - a[5]
    return a[0] + a[1] * dx ** 2 + a[2] * dy ** 2 + a[3] * dx * dy


def _design(x, y):
    return np.stack([np.ones_like(x), x, y, x * x, y * y, x * y], axis=-1)


def _vertex(c):
    """Expanded coefficients ``(c0..c5)`` -> vertex form ``(a0..a5)``, batched."""
    c = np.asarray(c)
    a1, a2, a3 = c[..., 3], c[..., 4], c[..., 5]
    det = 4 * a1 * a2 - a3 ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        x0 = (-2 * a2 * c[..., 1] + a3 * c[..., 2]) / det
        y0 = (-2 * a1 * c[..., 2] + a3 * c[..., 1]) / det
    a0 = (c[..., 0] + c[..., 1] * x0 + c[..., 2] * y0 + a1 * x0 ** 2 + a2 * y0 ** 2
          + a3 * x0 * y0)
    return np.stack([a0, a1, a2, a3, x0, y0], axis=-1), det


def _unscale(a, mx, sx, my, sy):
    """Map vertex parameters from standardized to physical coordinates."""
    out = np.array(a, dtype=float, copy=True)
    out[..., 1] = a[..., 1] / sx ** 2
    out[..., 2] = a[..., 2] / sy ** 2
    out[..., 3] = a[..., 3] / (sx * sy)
    out[..., 4] = mx + sx * a[..., 4]
    out[..., 5] = my + sy * a[..., 5]
    return out


def _coords(samples):
    pts = [s for s in samples if s.valid]
    x = np.array([s.t_i for s in pts], dtype=float)
    y = np.array([s.delta_prime for s in pts], dtype=float)
    f = np.array([s.fidelity for s in pts], dtype=float)
    sf = np.array([s.sigma_f for s in pts], dtype=float)
    return x, y, f, sf


def _scaling(x, y):
    sx = float(np.std(x)) or 1.0
    sy = float(np.std(y)) or 1.0
    return float(np.mean(x)), sx, float(np.mean(y)), sy


def fit_quad_surface(samples: Sequence[FidelitySample], weighted: bool = False) -> QuadSurfaceFit:
    """Least-squares quadratic surface through ``(t_I, delta', F)`` samples.

    Parameters
    ----------
    samples : sequence of FidelitySample
        Invalid samples are skipped.
    weighted : bool
        Weight residuals by ``1 / sigma_F^2`` (requires all ``sigma_F > 0``).

    Raises
    ------
    FitError
        Fewer than six distinct points or a rank-deficient design matrix.
    """
    x, y, f, sf = _coords(samples)
    if len({(a, b) for a, b in zip(x, y)}) < N_PARAMS:
        raise FitError("need at least six distinct (t_I, delta') points")
    mx, sx, my, sy = _scaling(x, y)
    X = _design((x - mx) / sx, (y - my) / sy)
    if weighted:
        if np.any(sf <= 0):
            raise FitError("weighted fit needs sigma_F > 0 for every sample")
        w = 1.0 / sf
    else:
        w = np.ones_like(f)
    Xw, fw = X * w[:, None], f * w
    c, _, rank, sv = np.linalg.lstsq(Xw, fw, rcond=None)
    if rank < N_PARAMS or sv[-1] < 1e-10 * sv[0]:
        raise FitError("rank-deficient design matrix")
    resid = fw - Xw @ c
    dof = len(f) - N_PARAMS
    xtx_inv = np.linalg.inv(Xw.T @ Xw)
    if weighted:
        cov_c = xtx_inv
    else:
        s2 = float(resid @ resid) / dof if dof > 0 else 0.0
        cov_c = s2 * xtx_inv

    def to_phys(cc):
        v, _ = _vertex(cc)
        return _unscale(v, mx, sx, my, sy)

    a = to_phys(c)
    # delta method with a central-difference Jacobian in the scaled coordinates
    jac = np.empty((N_PARAMS, N_PARAMS))
    for j in range(N_PARAMS):
        h = 1e-6 * max(1.0, abs(c[j]))
        e = np.zeros(N_PARAMS)
        e[j] = h
        jac[:, j] = (to_phys(c + e) - to_phys(c - e)) / (2 * h)
    cov = jac @ cov_c @ jac.T
    has_max = bool(a[1] < 0 and a[2] < 0 and 4 * a[1] * a[2] - a[3] ** 2 > 0)
    if not has_max:
        warnings.warn("fitted surface has no interior maximum", RuntimeWarning, stacklevel=2)
    f_res = f - surface_value(a, x, y)
    return QuadSurfaceFit(a=a, cov=cov, residual_norm=float(np.linalg.norm(f_res)),
                          has_maximum=has_max, n_points=len(f))


def deltas_to_delta_prime(samples: Sequence[FidelitySample], dg: float = 0.0,
                          g: Optional[float] = None) -> list:
    """Recompute ``delta' = sqrt(delta^2 - (g + dg)^2)`` for every sample.

    ``g`` defaults to each sample's own ``g``. Samples with
    ``|delta| <= g + dg`` are dropped with a warning.
    """
    out, dropped = [], 0
    for s in samples:
        gg = (s.g if g is None else g)
        if s.delta is None or gg is None:
            raise ValueError("samples need raw delta and g")
        g_eff = gg + dg
        if abs(s.delta) <= g_eff:
            dropped += 1
            continue
        dp = math.sqrt((abs(s.delta) - g_eff) * (abs(s.delta) + g_eff))
        out.append(FidelitySample(t_i=s.t_i, delta_prime=dp, fidelity=s.fidelity,
                                  sigma_f=s.sigma_f, delta=s.delta, g=gg, valid=s.valid,
                                  note=s.note))
    if dropped:
        warnings.warn(f"dropped {dropped} samples with |delta| <= g + dg", RuntimeWarning,
                      stacklevel=2)
    return out


def _batched_vertex_fits(x, y, f_draws, w):
    """Fit every row of ``f_draws`` against per-row coordinates ``(x, y)``.

    ``x``, ``y`` and the weights ``w`` have shape ``(B, n)``; a zero weight
    removes a point from that row's fit. Returns vertex parameters ``(B, 6)``
    in physical units and a boolean mask of successful fits with a maximum.
    """
    m = (w > 0).astype(float)
    cnt = np.maximum(m.sum(axis=1, keepdims=True), 1.0)
    mx = (m * x).sum(axis=1, keepdims=True) / cnt
    my = (m * y).sum(axis=1, keepdims=True) / cnt
    sx = np.sqrt((m * (x - mx) ** 2).sum(axis=1, keepdims=True) / cnt)
    sy = np.sqrt((m * (y - my) ** 2).sum(axis=1, keepdims=True) / cnt)
    sx = np.where(sx > 0, sx, 1.0)
    sy = np.where(sy > 0, sy, 1.0)
    X = _design((x - mx) / sx, (y - my) / sy) * w[..., None]
    rhs = f_draws * w
    xtx = np.einsum("bni,bnj->bij", X, X)
    xtf = np.einsum("bni,bn->bi", X, rhs)
    ok = (np.linalg.cond(xtx) < 1e12) & (cnt[:, 0] >= N_PARAMS)
    c = np.full(xtf.shape, np.nan)
    if np.any(ok):
        c[ok] = np.linalg.solve(xtx[ok], xtf[ok][..., None])[..., 0]
    v, det = _vertex(c)
    a = _unscale(v, mx[:, 0], sx[:, 0], my[:, 0], sy[:, 0])
    good = ok & (a[:, 1] < 0) & (a[:, 2] < 0) & (det > 0) & np.all(np.isfinite(a), axis=1)
    return a, good


def bootstrap_t_est(samples: Sequence[FidelitySample], sigma_g: float, n: int = 5000,
                    seed: int = 0, t0: Optional[float] = None, per_point_dg: bool = False,
                    weighted: bool = False, batch: int = 1000) -> BootstrapResult:
    """Central 68% interval of ``t_est`` (or of ``t0 / t_est`` when ``t0`` is given).

    Each synthetic data set shifts ``g`` by one draw of ``N(0, sigma_g)``
    (per point with ``per_point_dg``), recomputes every ``delta'`` and adds
    ``N(0, sigma_F)`` to each fidelity before refitting. Points pushed to
    ``|delta| <= g + dg`` leave that resample's fit (a warning reports how
    many resamples lost points); resamples whose fit fails or has no maximum
    are dropped.

    Raises
    ------
    FitError
        If the fit to the original data fails.
    ConvergenceError
        If more than 10% of the resamples fail.
    """
    pts = [s for s in samples if s.valid]
    base = fit_quad_surface(pts, weighted=weighted)
    x = np.array([s.t_i for s in pts])
    delta = np.array([abs(s.delta) for s in pts])
    g = np.array([s.g for s in pts])
    f = np.array([s.fidelity for s in pts])
    sf = np.array([s.sigma_f for s in pts])
    w = 1.0 / sf if weighted else np.ones_like(f)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    estimates, n_failed, n_trimmed = [], 0, 0
    for start in range(0, n, batch):
        b = min(batch, n - start)
        dg = rng.normal(0.0, sigma_g, size=(b, len(pts)) if per_point_dg else (b, 1))
        f_draws = f[None, :] + rng.normal(size=(b, len(pts))) * sf[None, :]
        g_eff = g[None, :] + dg
        inside = delta[None, :] > g_eff
        dp = np.sqrt(np.where(inside, (delta[None, :] - g_eff) * (delta[None, :] + g_eff), 1.0))
        n_trimmed += int(np.count_nonzero(~np.all(inside, axis=1)))
        xb = np.broadcast_to(x, dp.shape)
        a, good = _batched_vertex_fits(xb, dp, f_draws, np.where(inside, w[None, :], 0.0))
        n_failed += int(np.count_nonzero(~good))
        estimates.append(a[good, 4])
    if n_trimmed:
        warnings.warn(f"{n_trimmed} of {n} resamples dropped points with |delta| <= g + dg",
                      RuntimeWarning, stacklevel=2)
    if n_failed > MAX_FAILURE_FRACTION * n:
        raise ConvergenceError(f"{n_failed} of {n} bootstrap fits failed")
    draws = np.concatenate(estimates)
    point = base.t_est
    if t0 is not None:
        draws = t0 / draws
        point = t0 / point
    lo, hi = np.percentile(draws, [16, 84])
    tol = 1e-9 * max(abs(point), 1.0)
    if not lo - tol <= point <= hi + tol:
        warnings.warn("point estimate lies outside its 68% interval", RuntimeWarning,
                      stacklevel=2)
    return BootstrapResult(estimate=float(point), lower=float(lo), upper=float(hi),
                           n_resamples=n, n_failed=n_failed, seed=seed, draws=draws)


def speedup(t0: float, t_est: float) -> float:
    """Gate speedup ``t0 / t_est``."""
    if not (t0 > 0 and t_est > 0):
        raise ValueError("both times must be positive")
    return t0 / t_est
