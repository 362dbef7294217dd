"""Composite Gauss-Legendre panels and panel-wise barycentric interpolation."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_gauss(a: float, b: float, n_panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with equal panels on [a, b]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=64)
def _bary_weights(order: int) -> np.ndarray:
    x, _ = gauss_legendre(order)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def panel_interpolate(
    values: np.ndarray,
    a: float,
    b: float,
    n_panels: int,
    order: int,
    x_new: np.ndarray,
    fill: float | None = 0.0,
) -> np.ndarray:
    """Evaluate the piecewise polynomial through Gauss panel samples.

    ``values`` has shape (..., n_panels * order) with the last axis ordered as the
    nodes of :func:`composite_gauss`.  Points outside [a, b] get ``fill``; with
    ``fill=None`` the edge panels are extrapolated.
    """
    values = np.asarray(values)
    x_new = np.asarray(x_new, dtype=float)
    flat = x_new.ravel()
    xg, _ = gauss_legendre(order)
    bw = _bary_weights(order)
    h = (b - a) / n_panels
    idx = np.clip(np.floor((flat - a) / h).astype(int), 0, n_panels - 1)
    t = (flat - a - (idx + 0.5) * h) / (0.5 * h)
    panel_vals = values.reshape(values.shape[:-1] + (n_panels, order))
    diff = t[:, None] - xg[None, :]
    exact = np.abs(diff) < 1e-14
    diff = np.where(exact, 1.0, diff)
    # far outside the panel the barycentric sums can overflow; those points are filled below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c = bw[None, :] / diff
        hit = exact.any(axis=1)
        c[hit] = exact[hit].astype(float)
        c /= c.sum(axis=1, keepdims=True)
    picked = np.take(panel_vals, idx, axis=-2)
    out = np.einsum("...kj,kj->...k", picked, c)
    if fill is not None:
        outside = (flat < a - 1e-12) | (flat > b + 1e-12)
        out[..., outside] = fill
    return out.reshape(values.shape[:-1] + x_new.shape)
