"""Exact powers of the radial Laplacian applied to phi_lambda * u for a smooth bump u.

Two regimes are combined.  Away from the origin, Taylor jets in r are pushed
through f -> f'' + (d-1) coth(r) f'.  Near the origin the coth jets blow up, so
functions are expanded in x = r^2 at x = 0, where the Laplacian reads
4x g'' + (2 + 2(d-1) r coth r) g' with r coth r analytic in x.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from . import jets
from .space_model import SpaceModel, spherical_function_ode

ORIGIN_SWITCH = 0.15
_X_ORDER = 48


def _rcoth_series(n: int) -> np.ndarray:
    """Coefficients of r coth(r) in powers of x = r^2."""
    B = special.bernoulli(2 * n)
    i = np.arange(n)
    return 2.0 ** (2 * i) * B[2 * i] / special.factorial(2 * i)


def _phi_x_series(d: int, k: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    g = np.zeros(k.shape + (n,))
    g[..., 0] = 1.0
    for j in range(n - 1):
        acc = -k * g[..., j]
        for i in range(1, j + 1):
            acc = acc - 2 * (d - 1) * b[i] * (j - i + 1) * g[..., j - i + 1]
        g[..., j + 1] = acc / ((j + 1) * (4 * j + 2 * d))
    return g


def _laplacian_x(g: np.ndarray, d: int, b: np.ndarray) -> np.ndarray:
    n = g.shape[-1]
    out = np.zeros(g.shape[:-1] + (n - 1,))
    for j in range(n - 1):
        acc = (j + 1) * (4 * j + 2 * d) * g[..., j + 1]
        for i in range(1, j + 1):
            acc = acc + 2 * (d - 1) * b[i] * (j - i + 1) * g[..., j - i + 1]
        out[..., j] = acc
    return out


def _horner(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(coef.shape[:-1], x.shape))
    for j in range(coef.shape[-1] - 1, -1, -1):
        out = out * x + coef[..., j]
    return out


def bump_x_series(radius: float, amplitude: float, n: int) -> np.ndarray:
    """exp(1/(x/R^2 - 1)) in powers of x."""
    w = np.zeros(n)
    w[0] = -1.0
    w[1] = 1.0 / radius**2
    return amplitude * jets.exp(jets.reciprocal(w))


def bump_r_jet(r: np.ndarray, radius: float, amplitude: float, order: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    x = jets.variable(r / radius, order)
    x[..., 1:] /= radius
    g = jets.mul(x, x)
    g[..., 0] -= 1.0
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        out = amplitude * jets.exp(jets.reciprocal(g))
    out[r >= radius] = 0.0
    return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)


def laplacian_powers(
    space: SpaceModel,
    lams: np.ndarray,
    r: np.ndarray,
    radius: float,
    amplitude: float,
    n_max: int,
) -> np.ndarray:
    """Delta^n (phi_lam u)(r) for n = 0..n_max; shape (n_max + 1, len(lams), len(r))."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    d = space.dimension
    k = lams**2 + space.rho**2
    out = np.zeros((n_max + 1, lams.size, r.size))
    inside = r < radius
    near = inside & (r < ORIGIN_SWITCH * radius)
    far = inside & ~near

    if np.any(near):
        b = _rcoth_series(_X_ORDER)
        g = jets.mul(_phi_x_series(d, k, b, _X_ORDER), bump_x_series(radius, amplitude, _X_ORDER)[None, :])
        x = r[near] ** 2
        for n in range(n_max + 1):
            out[n][:, near] = _horner(g[:, None, :], x[None, :])
            g = _laplacian_x(g, d, b)

    if np.any(far):
        rf = r[far]
        order = 2 * n_max
        phi, dphi = spherical_function_ode(space, lams, rf)
        damping = (d - 1) * jets.coth(rf, max(order - 2, 0))
        pj = jets.ode_solution(phi, dphi, damping[None, :, :], k[:, None])
        F = jets.mul(pj, bump_r_jet(rf, radius, amplitude, order)[None, :, :])
        for n in range(n_max + 1):
            out[n][:, far] = F[..., 0]
            if n < n_max:
                F = jets.radial_laplacian(F, damping[None, :, : F.shape[-1]])
    return out
