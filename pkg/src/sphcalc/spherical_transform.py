"""Spherical transform pair, Abel transform and normalisation calibration."""

from __future__ import annotations

import numpy as np

from .cache import content_key, default_cache
from .errors import CalibrationError, NumericalError, TruncationError
from .quadrature import composite_gauss
from .space_model import (
    RadialFunction,
    RadialGrid,
    SpaceModel,
    SpectralFunction,
    SpectralGrid,
    make_space,
    plancherel_density,
    spherical_function,
    spherical_function_hc,
    spherical_function_ode,
)

DEFAULT_R_MAX = 20.0
DEFAULT_LAMBDA_MAX = 40.0
DECAY_TOL = 1e-12
CROSSCHECK_TOL = 1e-9
# above this many entries a d=2 table is built by the ODE route and the
# Mehler quadrature becomes the spot-check instead
MEHLER_TABLE_LIMIT = 100_000


def default_rgrid() -> RadialGrid:
    return RadialGrid.gauss(DEFAULT_R_MAX, 40, 16)


def default_sgrid() -> SpectralGrid:
    return SpectralGrid.gauss(DEFAULT_LAMBDA_MAX, 40, 16)


def _crosscheck(space: SpaceModel, lam_nodes: np.ndarray, r_nodes: np.ndarray, table: np.ndarray, by_ode: bool) -> None:
    """Compare a table against an independent evaluator on a sample of entries."""
    li = np.unique(np.linspace(0, lam_nodes.size - 1, 6).astype(int))
    ri = np.unique(np.linspace(0, r_nodes.size - 1, 6).astype(int))
    if space.dimension in (2, 3) and by_ode:
        ref = spherical_function(space, lam_nodes[li][:, None], r_nodes[ri][None, :])
    elif space.dimension in (2, 3):
        ref, _ = spherical_function_ode(space, lam_nodes[li], r_nodes[ri])
    else:
        ref = np.array([[spherical_function_hc(space, lam_nodes[i], r_nodes[j]) for j in ri[:3]] for i in li[:3]])
        li, ri = li[:3], ri[:3]
    err = float(np.max(np.abs(ref - table[np.ix_(li, ri)])))
    if err > CROSSCHECK_TOL:
        raise NumericalError(f"spherical-function table cross-check failed: max mismatch {err:.3e}")


def phi_table(space: SpaceModel, lam_nodes: np.ndarray, r_nodes: np.ndarray, cache=None) -> np.ndarray:
    """phi_{lam_i}(r_j) with shape (n_lam, n_r), memoised by content hash."""
    lam_nodes = np.asarray(lam_nodes, dtype=float)
    r_nodes = np.asarray(r_nodes, dtype=float)
    cache = cache or default_cache()

    def build():
        by_ode = space.dimension not in (2, 3) or (
            space.dimension == 2 and lam_nodes.size * r_nodes.size > MEHLER_TABLE_LIMIT
        )
        if by_ode:
            tab, _ = spherical_function_ode(space, lam_nodes, r_nodes)
        else:
            tab = spherical_function(space, lam_nodes[:, None], r_nodes[None, :])
        _crosscheck(space, lam_nodes, r_nodes, tab, by_ode)
        return tab

    return cache.get(content_key(space.dimension, lam_nodes, r_nodes), build)


def _check_decay(values: np.ndarray, what: str, allow: bool) -> None:
    ref = float(np.max(np.abs(values), initial=0.0))
    if ref == 0.0 or allow:
        return
    tail = float(np.abs(values[-1]))
    if tail > DECAY_TOL * ref:
        raise TruncationError(
            f"{what}: tail value {tail:.3e} exceeds {DECAY_TOL:g} x max {ref:.3e}; "
            "enlarge the grid or pass allow_truncation=True"
        )


def forward(
    space: SpaceModel,
    f: RadialFunction,
    sgrid: SpectralGrid | None = None,
    allow_truncation: bool = False,
) -> SpectralFunction:
    """f^(lam) = int phi_lam(r) f(r) J(r) dr."""
    sgrid = sgrid or default_sgrid()
    _check_decay(f.values, "forward transform", allow_truncation)
    tab = phi_table(space, sgrid.nodes, f.grid.nodes)
    w = f.grid.weights * space.jacobian(f.grid.nodes)
    return SpectralFunction(sgrid, tab @ (w * f.values))


def inverse(
    space: SpaceModel,
    F: SpectralFunction,
    rgrid: RadialGrid | None = None,
    allow_truncation: bool = False,
) -> RadialFunction:
    """f(r) = int_0^Lambda phi_lam(r) F(lam) omega(lam) dlam."""
    rgrid = rgrid or default_rgrid()
    _check_decay(F.values, "inverse transform", allow_truncation)
    tab = phi_table(space, F.grid.nodes, rgrid.nodes)
    w = F.grid.weights * plancherel_density(space, F.grid.nodes)
    return RadialFunction(rgrid, (w * F.values) @ tab)


def plancherel_check(space: SpaceModel, f: RadialFunction, sgrid: SpectralGrid | None = None) -> tuple[float, float]:
    lhs = f.l2_norm(space) ** 2
    if lhs == 0.0:
        return 0.0, 0.0
    rhs = forward(space, f, sgrid).l2_norm(space) ** 2
    return lhs, rhs


def relative_l2(space: SpaceModel, a: RadialFunction, b: RadialFunction) -> float:
    """||a - b|| / ||b|| on a common grid."""
    w = a.grid.weights * space.jacobian(a.grid.nodes)
    num = np.sqrt(np.sum(w * np.abs(a.values - b.values) ** 2))
    den = np.sqrt(np.sum(w * np.abs(b.values) ** 2))
    return float(num / den) if den > 0 else float(num)


# ---------------------------------------------------------------- Abel / Euclidean Fourier


def abel_transform(space: SpaceModel, f: RadialFunction, hgrid: RadialGrid | None = None, n_panels: int = 48) -> RadialFunction:
    """Horocyclic integral A f(H) = int_{|H|}^inf f(r) sinh r (cosh r - cosh H)^{(d-3)/2} dr.

    Returned as an even function of H sampled on ``hgrid`` (H >= 0).  The
    substitution r = H + w^2 removes the endpoint singularity when d = 2.
    """
    d = space.dimension
    if d not in (2, 3):
        raise NotImplementedError("Abel transform is implemented for d = 2 and d = 3 only")
    hgrid = hgrid or f.grid
    r_max = f.grid.upper
    out = np.zeros(hgrid.n_points)
    for i, H in enumerate(hgrid.nodes):
        if H >= r_max:
            continue
        w_nodes, w_wts = composite_gauss(0.0, np.sqrt(r_max - H), n_panels, 16)
        r = H + w_nodes**2
        jac = 2 * w_nodes * np.sinh(r)
        if d == 2:
            jac = jac / np.sqrt(2 * np.sinh(H + 0.5 * w_nodes**2) * np.sinh(0.5 * w_nodes**2))
        out[i] = np.sum(w_wts * jac * f(r))
    return RadialFunction(hgrid, out)


def euclidean_fourier(g: RadialFunction, sgrid: SpectralGrid | None = None) -> SpectralFunction:
    """g^(lam) = int_R e^{-i lam H} g(H) dH = 2 int_0^inf cos(lam H) g(H) dH for even g."""
    sgrid = sgrid or default_sgrid()
    H = g.grid.nodes
    vals = 2 * np.cos(np.outer(sgrid.nodes, H)) @ (g.grid.weights * g.values)
    return SpectralFunction(sgrid, vals)


def triangle_constant(space: SpaceModel, f: RadialFunction, sgrid: SpectralGrid | None = None) -> tuple[float, float]:
    """Least-squares kappa with EF(A f) ~ kappa f^, and the relative residual."""
    sgrid = sgrid or default_sgrid()
    a = euclidean_fourier(abel_transform(space, f), sgrid).values
    b = forward(space, f, sgrid).values
    kappa = float(np.dot(a, b) / np.dot(b, b))
    resid = float(np.linalg.norm(a - kappa * b) / np.linalg.norm(b))
    return kappa, resid


# ---------------------------------------------------------------- calibration


def calibration_family(rgrid: RadialGrid) -> list[RadialFunction]:
    """Three smooth, rapidly decaying radial bumps."""
    r = rgrid.nodes
    return [
        RadialFunction(rgrid, np.exp(-(r**2))),
        RadialFunction(rgrid, np.exp(-(r**2) / 1.8) * (1 + 0.5 * r**2)),
        RadialFunction(rgrid, np.exp(-(r**2) / 0.7) * np.cos(1.5 * r)),
    ]


def calibrate_normalization(
    space: SpaceModel,
    rgrid: RadialGrid | None = None,
    sgrid: SpectralGrid | None = None,
    tol: float = 1e-6,
) -> float:
    """Fit plancherel_scale so that inverse(forward(f)) = f on the calibration family.

    The fit is done with the raw Gamma-formula density, so calling it on an
    already calibrated space reproduces the same scale.
    """
    rgrid = rgrid or default_rgrid()
    sgrid = sgrid or default_sgrid()
    raw = make_space(space.dimension)
    raw.jacobian_scale = space.jacobian_scale
    fam = calibration_family(rgrid)
    num = den = 0.0
    per_bump = []
    recon = []
    for f in fam:
        g = inverse(raw, forward(raw, f, sgrid), rgrid, allow_truncation=True)
        w = rgrid.weights * raw.jacobian(rgrid.nodes)
        fg = float(np.sum(w * f.values * g.values))
        gg = float(np.sum(w * g.values**2))
        num += fg
        den += gg
        per_bump.append(fg / gg)
        recon.append(g)
    scale = num / den
    resid = max(
        float(np.sqrt(np.sum(rgrid.weights * raw.jacobian(rgrid.nodes) * (f.values - scale * g.values) ** 2)))
        / f.l2_norm(raw)
        for f, g in zip(fam, recon)
    )
    if resid > tol:
        raise CalibrationError(
            f"calibration residual {resid:.3e} > {tol:g} (R={rgrid.upper}, Lambda={sgrid.upper}, "
            f"nodes {rgrid.n_points}x{sgrid.n_points}, per-bump scales {per_bump})"
        )
    space.plancherel_scale = scale
    space.calibrated = True
    return scale


_calibrated: dict[tuple, SpaceModel] = {}


def calibrated_space(d: int, rgrid: RadialGrid | None = None, sgrid: SpectralGrid | None = None) -> SpaceModel:
    """A calibrated copy of H^d, memoised per grid pair."""
    rgrid = rgrid or default_rgrid()
    sgrid = sgrid or default_sgrid()
    key = (d, rgrid.key(), sgrid.key())
    if key not in _calibrated:
        sp = make_space(d)
        calibrate_normalization(sp, rgrid, sgrid)
        _calibrated[key] = sp
    sp = _calibrated[key]
    return make_space(d) if sp is None else _copy(sp)


def _copy(sp: SpaceModel) -> SpaceModel:
    out = make_space(sp.dimension)
    out.jacobian_scale = sp.jacobian_scale
    out.plancherel_scale = sp.plancherel_scale
    out.calibrated = sp.calibrated
    return out


# ---------------------------------------------------------------- <lambda>^{-M} integrability


def bracket_weight_l1(space: SpaceModel, M: float, lambda_max: float = DEFAULT_LAMBDA_MAX, n_panels: int = 400) -> tuple[float, float]:
    """int_0^Lambda <lam>^{-M} omega(dlam) and a closed-form bound on the tail beyond Lambda.

    The tail uses |c(lam)|^{-2} <= C lam^{2p} for lam >= 1 with C fitted on the
    grid, giving C Lambda^{2p+1-M} / (M - 2p - 1), infinite when M <= 2p + 1.
    """
    lam, w = composite_gauss(0.0, lambda_max, n_panels, 16)
    dens = plancherel_density(space, lam)
    val = float(np.sum(w * dens * (1 + lam**2) ** (-M / 2)))
    p2 = 2 * space.nilpotent_halfdim
    big = lam >= 1.0
    const = float(np.max(dens[big] / lam[big] ** p2)) * 2 ** (M / 2)
    if M <= p2 + 1:
        return val, float("inf")
    tail = const * lambda_max ** (p2 + 1 - M) / (M - p2 - 1)
    return val, tail
