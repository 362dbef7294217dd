"""Truncated Taylor series ("jets") for exact radial derivatives.

A jet of order N at a point x0 is the array (f(x0), f'(x0), f''(x0)/2!, ...,
f^{(N)}(x0)/N!) along the last axis; leading axes broadcast over points.
"""

from __future__ import annotations

import numpy as np


def variable(x0: np.ndarray, order: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    out = np.zeros(x0.shape + (order + 1,))
    out[..., 0] = x0
    if order >= 1:
        out[..., 1] = 1.0
    return out


def constant(c, shape: tuple, order: int) -> np.ndarray:
    out = np.zeros(shape + (order + 1,))
    out[..., 0] = c
    return out


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = min(a.shape[-1], b.shape[-1])
    a, b = np.broadcast_arrays(a[..., :n], b[..., :n])
    out = np.zeros(a.shape)
    for k in range(n):
        out[..., k] = np.sum(a[..., : k + 1] * b[..., k::-1], axis=-1)
    return out


def reciprocal(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    out = np.zeros(a.shape)
    out[..., 0] = 1.0 / a[..., 0]
    for k in range(1, n):
        out[..., k] = -np.sum(a[..., 1 : k + 1] * out[..., k - 1 :: -1], axis=-1) / a[..., 0]
    return out


def exp(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    out = np.zeros(a.shape)
    out[..., 0] = np.exp(a[..., 0])
    j = np.arange(1, n)
    for k in range(1, n):
        out[..., k] = np.sum(j[:k] * a[..., 1 : k + 1] * out[..., k - 1 :: -1], axis=-1) / k
    return out


def derivative(a: np.ndarray) -> np.ndarray:
    """Jet of f' (one order lower)."""
    n = a.shape[-1]
    return a[..., 1:] * np.arange(1, n)


def sinh_cosh(x0: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    x0 = np.asarray(x0, dtype=float)
    s, c = np.sinh(x0), np.cosh(x0)
    fact = np.cumprod(np.concatenate([[1.0], np.arange(1, order + 1)]))
    sj = np.empty(x0.shape + (order + 1,))
    cj = np.empty(x0.shape + (order + 1,))
    for k in range(order + 1):
        sj[..., k] = (s if k % 2 == 0 else c) / fact[k]
        cj[..., k] = (c if k % 2 == 0 else s) / fact[k]
    return sj, cj


def coth(x0: np.ndarray, order: int) -> np.ndarray:
    sj, cj = sinh_cosh(x0, order)
    return mul(cj, reciprocal(sj))


def ode_solution(value, slope, damping: np.ndarray, k) -> np.ndarray:
    """Jet of y solving y'' = -damping * y' - k y from y(x0), y'(x0).

    ``damping`` is itself a jet; ``value``, ``slope`` and ``k`` broadcast with
    its leading shape.  The returned jet has the same order as ``damping`` + 2.
    """
    n = damping.shape[-1] + 2
    value, slope, k = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (value, slope, k)))
    shape = np.broadcast_shapes(value.shape, damping.shape[:-1])
    y = np.zeros(shape + (n,))
    y[..., 0] = value
    y[..., 1] = slope
    damping = np.broadcast_to(damping, shape + (n - 2,))
    k = np.broadcast_to(k, shape)
    for j in range(n - 2):
        # coefficient of h^j in y'': (j+2)(j+1) y_{j+2}
        dy = (np.arange(1, j + 2)) * y[..., 1 : j + 2]  # y' coefficients 0..j
        conv = np.sum(damping[..., : j + 1] * dy[..., ::-1], axis=-1)
        y[..., j + 2] = (-conv - k * y[..., j]) / ((j + 2) * (j + 1))
    return y


def radial_laplacian(f: np.ndarray, coth_damping: np.ndarray) -> np.ndarray:
    """Jet of f'' + (d-1) coth(r) f', given the jet of (d-1) coth(r)."""
    d1 = derivative(f)
    d2 = derivative(d1)
    return d2 + mul(coth_damping[..., : d1.shape[-1] - 1], d1[..., :-1])[..., : d2.shape[-1]]
