"""Synthetic fidelity surfaces with known vertex, shared by several tests."""
import math

import numpy as np

from ampgate.model import TWO_PI, FidelitySample

G = TWO_PI * 49.7e3
TRUTH = np.array([0.86, -3.0e8, -6.4e-10, 0.087, 88e-6, TWO_PI * 9.4e3])


def surface(a, t, dp):
    dx, dy = t - a[4], dp - a[5]
    return a[0] + a[1] * dx ** 2 + a[2] * dy ** 2 + a[3] * dx * dy


def grid_samples(a=TRUTH, noise=0.0, rng=None, g=G, n=5, span=0.15, sigma_f=None):
    """``n x n`` grid of (t_I, delta) points around the vertex of ``a``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for t in a[4] * np.linspace(1 - span, 1 + span, n):
        for dp in a[5] * np.linspace(1 - span, 1 + span, n):
            f = surface(a, t, dp) + (rng.normal(0, noise) if noise else 0.0)
            out.append(FidelitySample(t_i=t, delta_prime=dp, fidelity=f,
                                      sigma_f=noise if sigma_f is None else sigma_f,
                                      delta=math.sqrt(dp ** 2 + g ** 2), g=g))
    return out
