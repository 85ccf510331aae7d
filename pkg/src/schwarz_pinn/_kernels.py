"""Single-pass elementwise kernels for the swish jet (numba when available)."""
from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


def _swish_terms(z0, mu):
    t = mu * z0
    if t >= 0.0:
        s = 1.0 / (1.0 + math.exp(-t))
    else:
        e = math.exp(t)
        s = e / (1.0 + e)
    q = s * (1.0 - s)
    r = 1.0 - 2.0 * s
    f0 = z0 * s
    f1 = s + t * q
    f2 = mu * q * (2.0 + t * r)
    f3 = mu * mu * q * (3.0 * r + t * (r * r - 2.0 * q))
    return f0, f1, f2, f3


def _forward(z, mu, y):
    m, n = z.shape[1], z.shape[2]
    for i in range(m):
        for j in range(n):
            z0 = z[0, i, j]
            z1 = z[1, i, j]
            f0, f1, f2, _ = _swish_terms(z0, mu)
            y[0, i, j] = f0
            y[1, i, j] = f1 * z1
            y[2, i, j] = f2 * z1 * z1 + f1 * z[2, i, j]


def _backward(z, mu, g, d):
    m, n = z.shape[1], z.shape[2]
    for i in range(m):
        for j in range(n):
            z1 = z[1, i, j]
            z2 = z[2, i, j]
            g0 = g[0, i, j]
            g1 = g[1, i, j]
            g2 = g[2, i, j]
            _, f1, f2, f3 = _swish_terms(z[0, i, j], mu)
            d[0, i, j] = g0 * f1 + g1 * f2 * z1 + g2 * (f3 * z1 * z1 + f2 * z2)
            d[1, i, j] = g1 * f1 + 2.0 * g2 * f2 * z1
            d[2, i, j] = g2 * f1


if njit is not None:
    _swish_terms = njit(cache=True, inline="always")(_swish_terms)
    _forward = njit(cache=True)(_forward)
    _backward = njit(cache=True)(_backward)


def swish_jet_forward(z, mu):
    """Map a stacked pre-activation jet ``(3, M, N)`` through swish."""
    z = np.ascontiguousarray(z)
    y = np.empty_like(z)
    _forward(z, float(mu), y)
    return y


def swish_jet_backward(z, mu, g):
    """Vector-Jacobian product of ``swish_jet_forward`` at ``z``."""
    d = np.empty_like(z)
    _backward(np.ascontiguousarray(z), float(mu), np.ascontiguousarray(g), d)
    return d
