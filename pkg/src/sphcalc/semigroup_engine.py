"""Sub-Feller semigroups, Hunt convolution, maximum-principle probes and Galerkin resolvent solves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .errors import ConditioningError, NumericalError
from .space_model import (
    RadialFunction,
    RadialGrid,
    SpaceModel,
    SpectralFunction,
    SpectralGrid,
    k_average,
    plancherel_density,
    radial_laplacian,
    spherical_function,
)
from .spherical_transform import default_rgrid, default_sgrid, forward, inverse
from .symbol_lab import (
    GangolliExponent,
    GangolliSymbol,
    LevyMeasureRadial,
    Q2Term,
    SmoothBump,
    Verdict,
    bm_exponent,
    exponent_from_characteristics,
    killed_exponent,
)

# ---------------------------------------------------------------- measures and evolution


@dataclass
class RadialMeasure:
    """density(r) J(r) dr plus an optional atom at the origin."""

    density: RadialFunction
    atom0: float = 0.0
    sub_probability: bool = True

    def mass(self, space: SpaceModel) -> float:
        return self.atom0 + float(np.sum(self.density.grid.weights * space.jacobian(self.density.grid.nodes) * self.density.values))

    def hat(self, space: SpaceModel, sgrid: SpectralGrid | None = None) -> SpectralFunction:
        sgrid = sgrid or default_sgrid()
        dh = forward(space, self.density, sgrid, allow_truncation=True)
        return SpectralFunction(sgrid, self.atom0 + dh.values)

    @classmethod
    def dirac(cls, grid: RadialGrid | None = None) -> "RadialMeasure":
        grid = grid or default_rgrid()
        return cls(RadialFunction(grid, np.zeros(grid.n_points)), 1.0)


def evolve(space: SpaceModel, psi: GangolliExponent, f: RadialFunction, t: float, sgrid: SpectralGrid | None = None, allow_truncation: bool = False) -> RadialFunction:
    """T_t f = inverse(exp(-t psi) fhat)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return RadialFunction(f.grid, f.values.copy())
    sgrid = sgrid or default_sgrid()
    fhat = forward(space, f, sgrid, allow_truncation)
    with np.errstate(over="ignore"):
        mult = np.exp(-t * psi(sgrid.nodes))
    vals = inverse(space, SpectralFunction(sgrid, mult * fhat.values), f.grid, allow_truncation=True).values if np.all(np.isfinite(mult)) else np.full(f.grid.n_points, np.inf)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("evolution blew up: the multiplier is not bounded")
    return RadialFunction(f.grid, vals)


def heat_kernel(space: SpaceModel, t: float, rgrid: RadialGrid | None = None, sgrid: SpectralGrid | None = None) -> RadialMeasure:
    """h_t = inverse(exp(-t (rho^2 + lam^2))), checked for mass <= 1 + 1e-6 and h_t >= -1e-10."""
    if t <= 0:
        raise ValueError("t must be > 0")
    rgrid = rgrid or default_rgrid()
    sgrid = sgrid or default_sgrid()
    mult = np.exp(-t * (space.rho**2 + sgrid.nodes**2))
    h = inverse(space, SpectralFunction(sgrid, mult), rgrid, allow_truncation=t * sgrid.upper**2 < 28)
    # beyond the round-off floor the exponential volume growth would amplify noise
    v = h.values.copy()
    floor = 1e3 * np.finfo(float).eps * np.max(np.abs(v))
    below = np.nonzero(np.abs(v) < floor)[0]
    if below.size:
        v[below[0] :] = 0.0
    h = RadialFunction(rgrid, v)
    mu = RadialMeasure(h)
    mass = mu.mass(space)
    if mass > 1 + 1e-6 or np.min(h.values) < -1e-10:
        raise NumericalError(f"heat kernel at t={t} violates mass/positivity (mass {mass:.3e}, min {np.min(h.values):.3e})")
    return mu


def hunt_convolution(space: SpaceModel, f: RadialFunction, mu: RadialMeasure, n_theta: int = 64, cutoff: float = 1e-16) -> RadialFunction:
    """(f * mu)(r) = int int f(d(r, s, theta)) w(theta) dtheta mu(ds), by direct quadrature.

    f is evaluated off-grid through its grid interpolant; shells where the
    density is below ``cutoff`` times its max are skipped.
    """
    r = f.grid.nodes
    out = mu.atom0 * f.values.astype(float)
    dens = mu.density
    w = dens.grid.weights * space.jacobian(dens.grid.nodes) * dens.values
    keep = np.abs(w) > cutoff * np.max(np.abs(w), initial=0.0)
    s, ws = dens.grid.nodes[keep], w[keep]
    if s.size:
        for i0 in range(0, r.size, 64):
            rr = r[i0 : i0 + 64]
            avg = k_average(space, f, rr[:, None], s[None, :], n_theta)
            out[i0 : i0 + 64] += avg @ ws
    return RadialFunction(f.grid, out)


def convolve_measures(space: SpaceModel, mu1: RadialMeasure, mu2: RadialMeasure, sgrid: SpectralGrid | None = None, clip_tol: float = 1e-9) -> RadialMeasure:
    """mu1 * mu2 via the product of transforms; negative round-off of total mass <= clip_tol is clipped."""
    sgrid = sgrid or default_sgrid()
    grid = mu1.density.grid
    if mu2.density.grid.key() != grid.key():
        raise ValueError("measures must share a radial grid")
    d1 = forward(space, mu1.density, sgrid, allow_truncation=True).values
    d2 = forward(space, mu2.density, sgrid, allow_truncation=True).values
    prod = mu1.atom0 * d2 + mu2.atom0 * d1 + d1 * d2
    dens = inverse(space, SpectralFunction(sgrid, prod), grid, allow_truncation=True).values
    neg = np.minimum(dens, 0.0)
    neg_mass = -float(np.sum(grid.weights * space.jacobian(grid.nodes) * neg))
    if neg_mass <= clip_tol:
        dens = np.maximum(dens, 0.0)
    return RadialMeasure(RadialFunction(grid, dens), mu1.atom0 * mu2.atom0, mu1.sub_probability and mu2.sub_probability)


# ---------------------------------------------------------------- audits


def default_unit_family(rgrid: RadialGrid | None = None) -> list[RadialFunction]:
    """Functions with values in [0, 1], smooth enough to be band-limited on the default grids."""
    rgrid = rgrid or default_rgrid()
    r = rgrid.nodes
    fam = []
    for p in (2, 4):
        for w in (1.0, 2.0, 3.0):
            fam.append(RadialFunction(rgrid, np.exp(-((r / w) ** p))))
    fam.append(RadialFunction(rgrid, 0.9 * np.exp(-(r**2)) * (1 + r**2) / 1.0))
    return [f for f in fam if np.max(f.values) <= 1.0]


def subfeller_audit(
    space: SpaceModel,
    generator: GangolliExponent | GangolliSymbol,
    f_family: Sequence[RadialFunction] | None = None,
    t_list: Sequence[float] = (0.1, 0.5, 1.0),
    tol: float = 1e-8,
    sgrid: SpectralGrid | None = None,
) -> Verdict:
    """Positivity, sup-contraction and a strong-continuity proxy for T_t = exp(-t psi(D)).

    Only sigma-independent generators have a computable semigroup here.
    """
    if isinstance(generator, GangolliSymbol):
        if not generator.is_constant_coefficient:
            raise NotImplementedError("semigroups of variable-coefficient symbols are not constructed")
        generator = generator.q1
    f_family = list(f_family) if f_family is not None else default_unit_family()
    worst_low, worst_high, worst_contr = np.inf, -np.inf, -np.inf
    continuity_ok = True
    reasons = []
    for f in f_family:
        if np.min(f.values) < 0 or np.max(f.values) > 1:
            raise ValueError("audit functions must take values in [0, 1]")
        sup_f = f.sup()
        for t in t_list:
            try:
                g = evolve(space, generator, f, t, sgrid, allow_truncation=True).values
            except NumericalError as exc:
                reasons.append(str(exc))
                worst_low = -np.inf
                continue
            worst_low = min(worst_low, float(np.min(g)))
            worst_high = max(worst_high, float(np.max(g)))
            worst_contr = max(worst_contr, float(np.max(np.abs(g))) - sup_f)
        dists = []
        for t in (1e-1, 1e-2, 1e-3, 1e-4):
            try:
                dists.append(float(np.max(np.abs(evolve(space, generator, f, t, sgrid, allow_truncation=True).values - f.values))))
            except NumericalError:
                dists.append(np.inf)
        if not (np.all(np.diff(dists) <= 1e-10) and dists[-1] < 0.1 * max(dists[0], 1e-300)):
            continuity_ok = False
    passed = worst_low >= -tol and worst_high <= 1 + tol and worst_contr <= tol and continuity_ok
    return Verdict(
        bool(passed),
        float(worst_low),
        {"max_value": worst_high, "contraction_excess": worst_contr, "strongly_continuous": continuity_ok, "errors": reasons},
    )


def ring_family(rgrid: RadialGrid | None = None, n: int = 20) -> list[RadialFunction]:
    """r^{2m} exp(-r^2 / w^2), normalised to max 1: interior maxima at r = w sqrt(m)."""
    rgrid = rgrid or default_rgrid()
    r = rgrid.nodes
    fam = []
    for m in (1, 2, 3, 4, 5):
        for w in (0.8, 1.2, 1.6, 2.0):
            v = r ** (2 * m) * np.exp(-(r**2) / w**2)
            fam.append(RadialFunction(rgrid, v / np.max(v)))
    return fam[:n]


def pmp_probe(
    space: SpaceModel,
    q: GangolliSymbol | Callable[[RadialFunction], RadialFunction],
    f_family: Sequence[RadialFunction] | None = None,
    tol: float = 1e-6,
    sgrid: SpectralGrid | None = None,
) -> Verdict:
    """Positive maximum principle for the generator -q(r, D) (or a given generator callable).

    At each grid argmax r* with f(r*) >= 0, require (A f)(r*) <= tol * ||A f||_inf.
    """
    from .psdo_calculus import apply_psdo

    if isinstance(q, GangolliSymbol):
        gen = lambda f: RadialFunction(f.grid, -apply_psdo(space, q, f, sgrid, allow_truncation=True).values)  # noqa: E731
    else:
        gen = q
    f_family = list(f_family) if f_family is not None else ring_family()
    worst = -np.inf
    points = []
    for f in f_family:
        i = int(np.argmax(f.values))
        if f.values[i] < 0:
            continue
        Af = gen(f).values
        scale = float(np.max(np.abs(Af))) or 1.0
        val = float(Af[i]) / scale
        worst = max(worst, val)
        points.append((float(f.grid.nodes[i]), val))
    return Verdict(bool(worst <= tol), float(worst), {"points": points})


# ---------------------------------------------------------------- coercive form and Galerkin


def alpha0_compute(q1: GangolliExponent, psi: GangolliExponent, c0: float, sgrid: SpectralGrid | None = None) -> float:
    """Smallest grid alpha_0 >= 0 with q1 >= c0 (1 + psi) - alpha_0."""
    sgrid = sgrid or default_sgrid()
    lam = sgrid.nodes
    return float(max(0.0, np.max(c0 * (1 + psi(lam)) - q1(lam))))


@dataclass
class GalerkinSystem:
    """B_alpha on the orthonormal spectral-cell basis.

    Basis element i is sqrt(w_i omega_i) phi_{lam_i}(r), with lam_i the
    Gauss nodes of the basis grid, so that coefficient vectors carry the
    discrete L^2 norm and q1(D) acts diagonally.
    """

    grid: SpectralGrid
    scale: np.ndarray
    B_matrix: np.ndarray
    gram_psi1: np.ndarray
    gram_l2: np.ndarray
    alpha: float
    c0: float
    q: GangolliSymbol = field(repr=False)

    @property
    def lam(self) -> np.ndarray:
        return self.grid.nodes[1:]

    @property
    def n(self) -> int:
        return self.lam.size


def _basis_grid(n_basis: int, lambda_max: float) -> SpectralGrid:
    order = 16 if n_basis % 16 == 0 else n_basis
    return SpectralGrid.gauss(lambda_max, n_basis // order, order)


def _support_rule(q: GangolliSymbol, n_panels: int = 48) -> RadialGrid:
    return RadialGrid.gauss(max(q.base_radius, 1e-3), n_panels, 16)


def assemble_bilinear_form(
    space: SpaceModel,
    q: GangolliSymbol,
    alpha: float,
    n_basis: int,
    c0: float | None = None,
    lambda_max: float = 40.0,
) -> GalerkinSystem:
    """B[i, j] = <(q(r, D) + alpha) e_j, e_i> and the H^{psi,1} Gram matrix."""
    from .symbol_lab import audit_A1

    grid = _basis_grid(n_basis, lambda_max)
    lam = grid.nodes[1:]
    ww = grid.weights[1:] * plancherel_density(space, lam)
    scale = np.sqrt(ww)
    B = np.diag(q.q1(lam) + alpha)
    if q.terms:
        sup = _support_rule(q)
        r = sup.nodes
        wr = sup.weights * space.jacobian(r)
        phi = spherical_function(space, lam[:, None], r[None, :])
        for t in q.terms:
            kern = (phi * (wr * t.u_values(r))) @ phi.T
            B = B + scale[:, None] * kern * (scale * t.v(lam))[None, :]
    gram = np.diag(1 + q.psi(lam))
    if c0 is None:
        c0 = audit_A1(q)[0]
    return GalerkinSystem(grid, scale, B, gram, np.eye(lam.size), float(alpha), float(c0), q)


def coercivity_audit(sys: GalerkinSystem, n_random: int = 1000, seed: int = 0) -> tuple[bool, float, dict]:
    """min of x^T B_sym x / x^T G x over random vectors, compared with c0 / 2 - 1e-6."""
    rng = np.random.default_rng(seed)
    Bs = 0.5 * (sys.B_matrix + sys.B_matrix.T)
    X = rng.normal(size=(sys.n, n_random))
    num = np.einsum("in,ij,jn->n", X, Bs, X)
    den = np.einsum("in,ij,jn->n", X, sys.gram_psi1, X)
    ratio = float(np.min(num / den))
    exact = float(linalg.eigh(Bs, sys.gram_psi1, eigvals_only=True)[0])
    margin = ratio - sys.c0 / 2
    return bool(margin >= -1e-6), margin, {"rayleigh_min": ratio, "generalized_eig_min": exact, "c0_half": sys.c0 / 2}


@dataclass
class ResolventSolution:
    u: RadialFunction
    uhat: SpectralFunction
    residual: float
    condition: float
    system: GalerkinSystem


def _residual(space: SpaceModel, q: GangolliSymbol, alpha: float, uhat_basis: SpectralFunction, fhat_ref: SpectralFunction, rgrid: RadialGrid) -> float:
    from .psdo_calculus import psdo_hat

    ref = fhat_ref.grid
    uh = SpectralFunction(ref, uhat_basis(ref.nodes))
    lhs = psdo_hat(space, q, uh, rgrid).values + alpha * uh.values
    w = ref.weights * plancherel_density(space, ref.nodes)
    num = np.sqrt(np.sum(w * np.abs(lhs - fhat_ref.values) ** 2))
    den = np.sqrt(np.sum(w * np.abs(fhat_ref.values) ** 2))
    return float(num / den) if den > 0 else float(num)


def solve_resolvent(
    space: SpaceModel,
    q: GangolliSymbol,
    alpha: float,
    f: RadialFunction,
    n_basis: int = 256,
    c0: float | None = None,
    max_condition: float = 1e12,
    sgrid_ref: SpectralGrid | None = None,
) -> ResolventSolution:
    """Galerkin solution of (q(r, D) + alpha) u = f.

    The residual is measured at the reference spectral resolution: the
    basis coefficients are interpolated panel-wise onto the reference grid
    and the full operator is applied there.
    """
    sys = assemble_bilinear_form(space, q, alpha, n_basis, c0, lambda_max=(sgrid_ref or default_sgrid()).upper)
    cond = float(np.linalg.cond(sys.B_matrix))
    if not np.isfinite(cond) or cond > max_condition:
        raise ConditioningError(f"Galerkin matrix condition number {cond:.3e} exceeds {max_condition:.1e}")
    fhat = forward(space, f, sys.grid, allow_truncation=True)
    load = sys.scale * fhat.values[1:]
    x = linalg.solve(sys.B_matrix, load)
    vals = np.concatenate([[0.0], x / sys.scale])
    # the zero node carries no weight; extrapolate for a clean interpolant
    lam = sys.lam
    vals[0] = vals[1] + (vals[1] - vals[2]) * lam[0] / (lam[1] - lam[0]) if lam.size > 1 else vals[1]
    uhat = SpectralFunction(sys.grid, vals)
    u = inverse(space, uhat, f.grid, allow_truncation=True)
    sref = sgrid_ref or default_sgrid()
    res = _residual(space, q, alpha, uhat, forward(space, f, sref, allow_truncation=True), f.grid)
    return ResolventSolution(u, uhat, res, cond, sys)


# ---------------------------------------------------------------- direct Gangolli operator


@dataclass
class Characteristics:
    """Spatially varying (c(r), a(r), nu(r, .)) with nu(r, .) = m(r) * nu1 for a fixed finite nu1."""

    c: Callable[[np.ndarray], np.ndarray]
    a: Callable[[np.ndarray], np.ndarray]
    jump_mass: Callable[[np.ndarray], np.ndarray]
    nu1: LevyMeasureRadial = field(default_factory=LevyMeasureRadial.zero)


def gangolli_apply_direct(space: SpaceModel, ch: Characteristics, f: RadialFunction, n_theta: int = 64) -> RadialFunction:
    """-c f + a Delta f + int (f(d(r, s, theta)) - f(r)) nu(r, ds), on a uniform grid.

    Delta is the finite-difference radial Laplacian; the jump integral is a
    K-average over shells.  No small-jump compensator is needed since nu1 is
    finite and radial.
    """
    if f.grid.kind != "uniform":
        raise ValueError("direct application needs a uniform radial grid")
    r = f.grid.nodes
    out = -ch.c(r) * f.values + ch.a(r) * radial_laplacian(space, f).values
    nu = ch.nu1
    if not nu.is_zero:
        if nu.density is not None:
            raise NotImplementedError("direct jumps support atomic nu1 only")
        m = ch.jump_mass(r)
        for s, mass in zip(nu.atoms_r, nu.atoms_mass):
            avg = k_average(space, f, r, np.full_like(r, s), n_theta)
            out = out + m * mass * (avg - f.values)
    return RadialFunction(f.grid, out)


def direct_families(space: SpaceModel, u: SmoothBump | None = None) -> list[tuple[str, GangolliSymbol, Characteristics]]:
    """Three separable test families, each as a symbol and as explicit characteristics.

    Only one of a, c, nu varies with r in each family.
    """
    u = u or SmoothBump(2.0, 1.0)
    nu1 = LevyMeasureRadial.atoms([0.5, 1.5], [0.8, 0.5])
    bm = bm_exponent(space)
    psi_nu = exponent_from_characteristics(space, nu=nu1, name="nu1")
    one = lambda r: np.ones_like(np.asarray(r, dtype=float))  # noqa: E731
    zero = lambda r: np.zeros_like(np.asarray(r, dtype=float))  # noqa: E731
    return [
        (
            "diffusion",
            GangolliSymbol(bm, [Q2Term(u.scaled(0.5), bm)]),
            Characteristics(zero, lambda r: 1 + 0.5 * u(r), zero),
        ),
        (
            "killing",
            GangolliSymbol(exponent_from_characteristics(space, a=1.0, c=0.3), [Q2Term(u, killed_exponent(space, 1.0))]),
            Characteristics(lambda r: 0.3 + u(r), one, zero),
        ),
        (
            "jumps",
            GangolliSymbol(bm + psi_nu.scaled(0.5), [Q2Term(u, psi_nu)]),
            Characteristics(zero, one, lambda r: 0.5 + u(r), nu1),
        ),
    ]


def direct_test_functions(n: int = 20) -> list[Callable[[np.ndarray], np.ndarray]]:
    fam = [
        (lambda r, w=w, b=b: np.exp(-(np.asarray(r) ** 2) / w) * (1 + b * np.asarray(r) ** 2))
        for w in (0.5, 1.0, 2.0, 3.0, 4.0)
        for b in (0.0, 0.5, 1.0, 2.0)
    ]
    return fam[:n]


def direct_vs_psdo(
    space: SpaceModel,
    q: GangolliSymbol,
    ch: Characteristics,
    fn: Callable[[np.ndarray], np.ndarray],
    fd_grid: RadialGrid | None = None,
    sgrid: SpectralGrid | None = None,
) -> float:
    """Relative L^2 gap between the direct generator (finite differences) and -q(r, D) (spectral).

    The spectral route runs on the Gauss grid and is interpolated onto the
    finite-difference mesh, so the two discretisations share nothing.
    """
    from .psdo_calculus import apply_psdo

    fd_grid = fd_grid or RadialGrid.uniform(20.0, 2001)
    direct = gangolli_apply_direct(space, ch, RadialFunction.from_callable(fd_grid, fn)).values
    spec = apply_psdo(space, q, RadialFunction.from_callable(default_rgrid(), fn), sgrid)
    ref = -spec.grid.interpolate(spec.values, fd_grid.nodes)
    w = fd_grid.weights * space.jacobian(fd_grid.nodes)
    return float(np.sqrt(np.sum(w * (direct - ref) ** 2) / np.sum(w * ref**2)))
