"""Pseudodifferential operators, fractional Laplacians, anisotropic Sobolev norms, mollifiers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError
from .quadrature import composite_gauss
from .space_model import (
    RadialFunction,
    RadialGrid,
    SpaceModel,
    SpectralFunction,
    SpectralGrid,
    plancherel_density,
)
from .spherical_transform import bracket_weight_l1, default_rgrid, default_sgrid, euclidean_fourier, forward, inverse
from .symbol_lab import GangolliExponent, GangolliSymbol, certificate


def _laplace_symbol(space: SpaceModel, lam) -> np.ndarray:
    return space.rho**2 + np.asarray(lam, dtype=float) ** 2


# ---------------------------------------------------------------- symbols acting


def psdo_hat(space: SpaceModel, q: GangolliSymbol, fhat: SpectralFunction, rgrid: RadialGrid) -> SpectralFunction:
    """(q(r, D) f)^ on the grid of ``fhat``; the q2 part goes through r-space on ``rgrid``."""
    lam = fhat.grid.nodes
    out = q.q1(lam) * fhat.values
    for t in q.terms:
        g = inverse(space, SpectralFunction(fhat.grid, t.v(lam) * fhat.values), rgrid, allow_truncation=True)
        out = out + forward(space, RadialFunction(rgrid, t.u_values(rgrid.nodes) * g.values), fhat.grid, allow_truncation=True).values
    return SpectralFunction(fhat.grid, out)


def apply_psdo(
    space: SpaceModel,
    q: GangolliSymbol,
    f: RadialFunction,
    sgrid: SpectralGrid | None = None,
    allow_truncation: bool = False,
) -> RadialFunction:
    """(q(r, D) f)(r) = int fhat(lam) phi_lam(r) q(r, lam) omega(dlam).

    The input must decay at r_max (guarded); multiplied spectra are assumed
    band-limited to the grid.
    """
    sgrid = sgrid or default_sgrid()
    fhat = forward(space, f, sgrid, allow_truncation)
    lam = sgrid.nodes
    out = inverse(space, SpectralFunction(sgrid, q.q1(lam) * fhat.values), f.grid, allow_truncation=True).values
    for t in q.terms:
        g = inverse(space, SpectralFunction(sgrid, t.v(lam) * fhat.values), f.grid, allow_truncation=True)
        out = out + t.u_values(f.grid.nodes) * g.values
    return RadialFunction(f.grid, out)


def apply_multiplier(space: SpaceModel, m, f: RadialFunction, sgrid: SpectralGrid | None = None, allow_truncation: bool = False) -> RadialFunction:
    sgrid = sgrid or default_sgrid()
    fhat = forward(space, f, sgrid, allow_truncation)
    return inverse(space, SpectralFunction(sgrid, m(sgrid.nodes) * fhat.values), f.grid, allow_truncation=True)


def fractional_laplacian(space: SpaceModel, f: RadialFunction, beta: float, sgrid: SpectralGrid | None = None) -> RadialFunction:
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return apply_multiplier(space, lambda lam: _laplace_symbol(space, lam) ** (beta / 2), f, sgrid)


def _bochner_multiplier(k: np.ndarray, delta: float, T: float, panels: int) -> np.ndarray:
    """(2 sqrt(pi))^{-1} [int_delta^T t^{-3/2} (1 - e^{-tk}) dt + 2 sqrt(delta) k + 2 / sqrt(T)]."""
    s, w = composite_gauss(np.log(delta), np.log(T), panels, 16)
    t = np.exp(s)
    integrand = t[None, :] ** (-0.5) * (-np.expm1(-np.outer(k, t)))
    main = integrand @ w
    return (main + 2 * np.sqrt(delta) * k + 2 / np.sqrt(T)) / (2 * np.sqrt(np.pi))


def fractional_laplacian_subordinated(
    space: SpaceModel,
    f: RadialFunction,
    delta: float = 1e-6,
    T: float = 1e3,
    panels: int = 40,
    sgrid: SpectralGrid | None = None,
    check: bool = True,
) -> RadialFunction:
    """(-Delta)^{1/2} f via the Bochner integral of t^{-3/2} (f - T_t f).

    T_t is the heat semigroup, applied spectrally at log-spaced times on
    [delta, T].  Below delta, T_t f ~ f + t Delta f gives -Delta f sqrt(delta/pi);
    above T, T_t f is negligible and contributes f / sqrt(pi T).  With
    ``check`` the result is recomputed with delta/2 and 2T and must move by
    less than 1e-4 relative.
    """
    sgrid = sgrid or default_sgrid()
    fhat = forward(space, f, sgrid)
    k = _laplace_symbol(space, sgrid.nodes)
    mult = _bochner_multiplier(k, delta, T, panels)
    out = inverse(space, SpectralFunction(sgrid, mult * fhat.values), f.grid, allow_truncation=True)
    if check:
        alt = _bochner_multiplier(k, delta / 2, 2 * T, panels + 4)
        ref = inverse(space, SpectralFunction(sgrid, alt * fhat.values), f.grid, allow_truncation=True)
        w = f.grid.weights * space.jacobian(f.grid.nodes)
        den = np.sqrt(np.sum(w * ref.values**2))
        change = np.sqrt(np.sum(w * (out.values - ref.values) ** 2)) / den if den > 0 else 0.0
        if change >= 1e-4:
            raise NumericalError(f"subordination integral not converged: change {change:.3e}")
    return out


# ---------------------------------------------------------------- F-hat and the q2 identity


def f_transform_hat(space: SpaceModel, q: GangolliSymbol, lam: float, eta: float, sgrid: SpectralGrid | None = None, rgrid: RadialGrid | None = None) -> SpectralFunction:
    """Transform of r -> phi_{-lam}(r) q2(r, eta)."""
    from .space_model import spherical_function

    sgrid = sgrid or default_sgrid()
    rgrid = rgrid or RadialGrid.gauss(max(q.base_radius, 1e-3), 32, 16)
    vals = spherical_function(space, lam, rgrid.nodes) * q.q2(rgrid.nodes, eta)
    return forward(space, RadialFunction(rgrid, vals), sgrid, allow_truncation=True)


def f_hat_matrix(space: SpaceModel, q: GangolliSymbol, lams, mus, etas) -> np.ndarray:
    """F^_{lam,eta}(mu) for all triples, shape (len(lams), len(mus), len(etas))."""
    from .space_model import spherical_function

    rgrid = RadialGrid.gauss(max(q.base_radius, 1e-3), 32, 16)
    r = rgrid.nodes
    w = rgrid.weights * space.jacobian(r)
    pl = spherical_function(space, np.asarray(lams, float)[:, None], r[None, :])
    pm = spherical_function(space, np.asarray(mus, float)[:, None], r[None, :])
    q2 = np.stack([q.q2(r, e) for e in np.atleast_1d(etas)], axis=1)
    return np.einsum("ir,jr,re->ije", pl * w, pm, q2)


def q2_hat_direct(space: SpaceModel, q: GangolliSymbol, u: RadialFunction, sgrid: SpectralGrid | None = None) -> SpectralFunction:
    """(q2(r, D) u)^ computed as forward(sum_k u_k * (v_k(D) u))."""
    sgrid = sgrid or default_sgrid()
    uhat = forward(space, u, sgrid, allow_truncation=True)
    g = np.zeros(u.grid.n_points)
    for t in q.terms:
        g = g + t.u_values(u.grid.nodes) * inverse(space, SpectralFunction(sgrid, t.v(sgrid.nodes) * uhat.values), u.grid, allow_truncation=True).values
    return forward(space, RadialFunction(u.grid, g), sgrid, allow_truncation=True)


def q2_hat_via_F(space: SpaceModel, q: GangolliSymbol, u: RadialFunction, lams, sgrid: SpectralGrid | None = None) -> np.ndarray:
    """(q2(r, D) u)^(lam) = int F^_{lam,eta}(eta) u^(eta) omega(deta), using evenness in eta."""
    sgrid = sgrid or default_sgrid()
    uhat = forward(space, u, sgrid, allow_truncation=True).values
    eta = sgrid.nodes
    w = sgrid.weights * plancherel_density(space, eta)
    from .space_model import spherical_function

    rgrid = RadialGrid.gauss(max(q.base_radius, 1e-3), 32, 16)
    r = rgrid.nodes
    wr = rgrid.weights * space.jacobian(r)
    pl = spherical_function(space, np.asarray(lams, float)[:, None], r[None, :])
    pe = spherical_function(space, eta[:, None], r[None, :])
    q2 = np.stack([q.q2(r, e) for e in eta], axis=0)  # (eta, r)
    diag = np.einsum("ir,er,er->ie", pl * wr, pe, q2)  # F^_{lam,eta}(eta)
    return diag @ (w * uhat)


# ---------------------------------------------------------------- Sobolev scale


@dataclass
class SobolevParams:
    psi: GangolliExponent
    s: float

    def Psi(self, lam) -> np.ndarray:
        return np.sqrt(1.0 + self.psi(lam))

    def weight(self, lam) -> np.ndarray:
        return (1.0 + self.psi(lam)) ** self.s


def bracket(lam) -> np.ndarray:
    return np.sqrt(1.0 + np.asarray(lam, dtype=float) ** 2)


def sobolev_norm_hat(space: SpaceModel, params: SobolevParams, fhat: SpectralFunction) -> float:
    lam = fhat.grid.nodes
    w = fhat.grid.weights * plancherel_density(space, lam)
    return float(np.sqrt(np.sum(w * params.weight(lam) * np.abs(fhat.values) ** 2)))


def sobolev_norm(space: SpaceModel, params: SobolevParams, f: RadialFunction, sgrid: SpectralGrid | None = None) -> float:
    """(int (1 + psi)^s |fhat|^2 omega)^{1/2}."""
    return sobolev_norm_hat(space, params, forward(space, f, sgrid or default_sgrid(), allow_truncation=True))


def bracket_sobolev_norm(space: SpaceModel, f: RadialFunction, s: float, sgrid: SpectralGrid | None = None) -> float:
    """Isotropic norm with weight <lam>^{2s}."""
    sgrid = sgrid or default_sgrid()
    fhat = forward(space, f, sgrid, allow_truncation=True)
    w = sgrid.weights * plancherel_density(space, sgrid.nodes)
    return float(np.sqrt(np.sum(w * bracket(sgrid.nodes) ** (2 * s) * np.abs(fhat.values) ** 2)))


def bracket_l2_norm(space: SpaceModel, s: float, lambda_max: float = 2000.0) -> float:
    """||<.>^{-s}||_{L^2(omega)}, i.e. the square root of int <lam>^{-2s} omega."""
    val, tail = bracket_weight_l1(space, 2 * s, lambda_max, n_panels=2000)
    return float(np.sqrt(val + tail))


def interpolation_constant(psi: GangolliExponent, s1: float, s2: float, s3: float, eps: float, sgrid: SpectralGrid | None = None) -> float:
    """Smallest grid c with Psi^{s2} <= eps Psi^{s3} + c Psi^{s1}, so that
    ||u||_{s2} <= eps ||u||_{s3} + c ||u||_{s1} for every u."""
    if not s1 < s2 < s3:
        raise ValueError("need s1 < s2 < s3")
    sgrid = sgrid or default_sgrid()
    P = np.sqrt(1 + psi(sgrid.nodes))
    return float(max(0.0, np.max((P**s2 - eps * P**s3) / P**s1)))


def c_s_psi(s: float, c_psi: float) -> float:
    return 2 ** ((abs(s - 1) + 2) / 2) * (1 + c_psi) ** ((abs(s - 1) + 1) / 2) * abs(s)


def weight_difference_check(psi: GangolliExponent, s: float, n_pairs: int = 10_000, seed: int = 0, lam_max: float = 20.0) -> tuple[bool, float]:
    """|Psi(lam)^s - Psi(eta)^s| <= C_{s,psi} <lam - eta>^{|s-1|+1} Psi(eta)^{s-1} on random pairs.

    Returns the verdict and the largest lhs / rhs ratio.
    """
    rng = np.random.default_rng(seed)
    lam = rng.uniform(-lam_max, lam_max, n_pairs)
    eta = rng.uniform(-lam_max, lam_max, n_pairs)
    Pl = np.sqrt(1 + psi(lam))
    Pe = np.sqrt(1 + psi(eta))
    C = c_s_psi(s, certificate(psi).c_psi)
    lhs = np.abs(Pl**s - Pe**s)
    rhs = C * bracket(lam - eta) ** (abs(s - 1) + 1) * Pe ** (s - 1)
    ratio = float(np.max(lhs / rhs)) if C > 0 else float(np.max(lhs))
    return bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-300)), ratio


def random_bandlimited(space: SpaceModel, rgrid: RadialGrid, sgrid: SpectralGrid, rng: np.random.Generator, n_bumps: int = 4, width: float = 1.0) -> RadialFunction:
    """Random radial function whose spectrum is a sum of Gaussians centred in [0, Lambda/2]."""
    lam = sgrid.nodes
    top = 0.5 * sgrid.upper - 5 * width
    centres = rng.uniform(0, top, n_bumps)
    coefs = rng.normal(size=n_bumps)
    spec = sum(c * (np.exp(-0.5 * ((lam - m) / width) ** 2) + np.exp(-0.5 * ((lam + m) / width) ** 2)) for c, m in zip(coefs, centres))
    return inverse(space, SpectralFunction(sgrid, spec), rgrid, allow_truncation=True)


# ---------------------------------------------------------------- mollifiers


def _unit_bump_integral() -> float:
    x, w = composite_gauss(0.0, 1.0, 8, 16)
    return 2 * float(np.sum(w * np.exp(1.0 / (x**2 - 1.0))))


C0 = 1.0 / _unit_bump_integral()


def mollifier_bump(H, eps: float = 1.0) -> np.ndarray:
    """l_eps(H) = l(H / eps) / eps with l = C0 exp(1/(H^2 - 1)) on |H| < 1."""
    x = np.abs(np.asarray(H, dtype=float)) / eps
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        val = C0 * np.exp(1.0 / np.minimum(x**2 - 1.0, -1e-300))
    return np.where(x < 1.0, val, 0.0) / eps


@lru_cache(maxsize=64)
def _bump_grid(eps: float) -> RadialGrid:
    return RadialGrid.gauss(eps, 16, 16)


def jhat_unit(lam) -> np.ndarray:
    """Euclidean Fourier transform of the unit bump l at arbitrary frequencies."""
    lam = np.asarray(lam, dtype=float)
    g = _bump_grid(1.0)
    H = g.nodes
    return 2 * np.cos(lam[..., None] * H) @ (g.weights * mollifier_bump(H))


@dataclass
class Mollifier:
    eps: float
    jhat: SpectralFunction
    j: RadialFunction | None = None


def make_mollifier(space: SpaceModel, eps: float, sgrid: SpectralGrid | None = None, rgrid: RadialGrid | None = None) -> Mollifier:
    """j_eps with spectrum the Euclidean Fourier transform of l_eps.

    The spectrum is computed from the scaled bump itself; jhat(eps lam) from
    the unit bump is the independent route used in checks.  j_eps in r-space
    is an inverse transform without decay guard (it is only indicative when
    eps is small).
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    sgrid = sgrid or default_sgrid()
    g = _bump_grid(float(eps))
    jhat = euclidean_fourier(RadialFunction(g, mollifier_bump(g.nodes, eps)), sgrid)
    j = inverse(space, jhat, rgrid, allow_truncation=True) if rgrid is not None else None
    return Mollifier(float(eps), jhat, j)


def apply_mollifier(space: SpaceModel, m: Mollifier, f: RadialFunction) -> RadialFunction:
    fhat = forward(space, f, m.jhat.grid, allow_truncation=True)
    return inverse(space, SpectralFunction(m.jhat.grid, m.jhat.values * fhat.values), f.grid, allow_truncation=True)


def commutator_hat(space: SpaceModel, q: GangolliSymbol, m: Mollifier, uhat: SpectralFunction, rgrid: RadialGrid) -> SpectralFunction:
    """([J_eps, q(r, D)] u)^ = jhat * (q u)^ - (q J_eps u)^."""
    a = m.jhat.values * psdo_hat(space, q, uhat, rgrid).values
    b = psdo_hat(space, q, SpectralFunction(uhat.grid, m.jhat.values * uhat.values), rgrid).values
    return SpectralFunction(uhat.grid, a - b)


def commutator_probe(space: SpaceModel, q: GangolliSymbol, m: Mollifier, u: RadialFunction, s: float, psi: GangolliExponent | None = None) -> float:
    """||J_eps q(r, D) u - q(r, D) J_eps u||_{psi, s}."""
    psi = psi or q.psi
    uhat = forward(space, u, m.jhat.grid, allow_truncation=True)
    return sobolev_norm_hat(space, SobolevParams(psi, s), commutator_hat(space, q, m, uhat, u.grid))


def packet_spectrum(sgrid: SpectralGrid, centre: float, width: float = 1.0) -> SpectralFunction:
    """Even Gaussian packet in lam centred at +-centre."""
    lam = sgrid.nodes
    return SpectralFunction(sgrid, np.exp(-0.5 * ((lam - centre) / width) ** 2) + np.exp(-0.5 * ((lam + centre) / width) ** 2))


def commutator_sweep(
    space: SpaceModel,
    q: GangolliSymbol,
    eps: float,
    s: float = 1.0,
    rgrid: RadialGrid | None = None,
    sgrid: SpectralGrid | None = None,
    step: float = 2.0,
    psi: GangolliExponent | None = None,
) -> tuple[float, float]:
    """Largest ||[J_eps, q] u||_{psi,s} / ||u||_{psi,s+1} over packets sweeping the spectral grid.

    Returns (ratio, centre of the worst packet).  This is a lower bound for
    the operator norm H^{psi,s+1} -> H^{psi,s}; for a single fixed u the
    ratio tends to zero as eps -> 0 and says nothing about uniformity.
    """
    rgrid = rgrid or default_rgrid()
    sgrid = sgrid or default_sgrid()
    psi = psi or q.psi
    m = make_mollifier(space, eps, sgrid)
    lo, hi = SobolevParams(psi, s), SobolevParams(psi, s + 1)
    best, where = 0.0, 0.0
    for c in np.arange(0.0, 0.9 * sgrid.upper, step):
        uh = packet_spectrum(sgrid, c)
        ratio = sobolev_norm_hat(space, lo, commutator_hat(space, q, m, uh, rgrid)) / sobolev_norm_hat(space, hi, uh)
        if ratio > best:
            best, where = ratio, float(c)
    return best, where
