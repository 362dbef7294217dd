"""Gangolli exponents and symbols, negative-definite toolkit, symbol audits."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidMeasureError, SmoothnessError
from .laplacian_powers import laplacian_powers
from .quadrature import composite_gauss
from .space_model import (
    RadialFunction,
    RadialGrid,
    SpaceModel,
    SpectralFunction,
    SpectralGrid,
    spherical_function,
)
from .spherical_transform import (
    bracket_weight_l1,
    default_rgrid,
    default_sgrid,
    forward,
    inverse,
)

SAFETY_C_PSI = 1.05
SAFETY_PHI = 1.1
ENV_LAMBDA = 30.0
ENV_SAMPLES = 60


# ---------------------------------------------------------------- Levy measures


@dataclass
class LevyMeasureRadial:
    """Radial Levy measure: point masses on spheres plus an optional density.

    ``density`` is per unit radial volume J(r) dr.  The density part is
    integrated on geometrically graded panels over [r_min, r_max]; the piece
    of the small-jump moment inside [0, r_min] is estimated from the local
    power law of the integrand, which is also how divergence is detected.
    """

    atoms_r: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atoms_mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density: Callable[[np.ndarray], np.ndarray] | None = None
    r_max: float = 10.0
    r_min: float = 1e-6
    n_panels: int = 40

    def __post_init__(self):
        self.atoms_r = np.atleast_1d(np.asarray(self.atoms_r, dtype=float))
        self.atoms_mass = np.atleast_1d(np.asarray(self.atoms_mass, dtype=float))
        if self.atoms_r.shape != self.atoms_mass.shape:
            raise InvalidMeasureError("atom radii and masses differ in length")

    @classmethod
    def zero(cls) -> "LevyMeasureRadial":
        return cls()

    @classmethod
    def atoms(cls, radii: Sequence[float], masses: Sequence[float]) -> "LevyMeasureRadial":
        return cls(np.asarray(radii, float), np.asarray(masses, float))

    @property
    def is_zero(self) -> bool:
        return self.density is None and not np.any(self.atoms_mass)

    def _density_rule(self, space: SpaceModel) -> tuple[np.ndarray, np.ndarray]:
        edges = np.geomspace(self.r_min, self.r_max, self.n_panels + 1)
        nodes, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = composite_gauss(a, b, 1, 16)
            nodes.append(x)
            weights.append(w)
        r = np.concatenate(nodes)
        w = np.concatenate(weights)
        return r, w * space.jacobian(r) * np.asarray(self.density(r), dtype=float)

    def _origin_tail(self, space: SpaceModel) -> float:
        """int_0^{r_min} r^2 nu(r) J(r) dr from the local power law."""
        r1, r2 = self.r_min, 10 * self.r_min
        g1, g2 = (float(r**2 * self.density(np.array([r]))[0] * space.jacobian(r)) for r in (r1, r2))
        if g1 <= 0.0:
            return 0.0
        p = np.log(g2 / g1) / np.log(r2 / r1) if g2 > 0 else np.inf
        if p <= -1 + 0.02:
            raise InvalidMeasureError(
                f"small-jump moment diverges: integrand r^2 nu J ~ r^{p:.3f} near 0"
            )
        return g1 * r1 / (p + 1)

    def validate(self, space: SpaceModel) -> float:
        """Check nonnegativity and return the small-jump moment int min(r^2, 1) nu."""
        if np.any(self.atoms_mass < 0) or np.any(self.atoms_r < 0):
            raise InvalidMeasureError("atoms must have nonnegative radius and mass")
        if np.any((self.atoms_r == 0) & (self.atoms_mass > 0)):
            raise InvalidMeasureError("a Levy measure carries no mass at the origin")
        moment = float(np.sum(self.atoms_mass * np.minimum(self.atoms_r**2, 1.0)))
        if self.density is not None:
            r, m = self._density_rule(space)
            if np.any(m < 0) or not np.all(np.isfinite(m)):
                raise InvalidMeasureError("density must be finite and nonnegative")
            moment += float(np.sum(m * np.minimum(r**2, 1.0))) + self._origin_tail(space)
        return moment

    def total_mass(self, space: SpaceModel) -> float:
        mass = float(np.sum(self.atoms_mass))
        if self.density is not None:
            mass += float(np.sum(self._density_rule(space)[1]))
        return mass

    def jump_part(self, space: SpaceModel, lam: np.ndarray) -> np.ndarray:
        """int (1 - phi_lam(r)) nu(dr)."""
        lam = np.asarray(lam, dtype=float)
        out = np.zeros(lam.shape)
        keep = self.atoms_mass > 0
        if np.any(keep):
            phi = spherical_function(space, lam[..., None], self.atoms_r[keep])
            out = out + np.sum(self.atoms_mass[keep] * (1.0 - phi), axis=-1)
        if self.density is not None:
            r, m = self._density_rule(space)
            phi = spherical_function(space, lam.ravel()[:, None], r[None, :])
            out = out + ((1.0 - phi) @ m).reshape(lam.shape)
            k = lam**2 + space.rho**2
            out = out + k / (2 * space.dimension) * self._origin_tail(space)
        return out

    def scaled(self, s: float) -> "LevyMeasureRadial":
        dens = self.density
        return replace(
            self,
            atoms_mass=s * self.atoms_mass,
            density=None if dens is None else (lambda r, dens=dens: s * dens(r)),
        )

    def __add__(self, other: "LevyMeasureRadial") -> "LevyMeasureRadial":
        if self.density is None:
            dens = other.density
        elif other.density is None:
            dens = self.density
        else:
            dens = lambda r, a=self.density, b=other.density: a(r) + b(r)  # noqa: E731
        return LevyMeasureRadial(
            np.concatenate([self.atoms_r, other.atoms_r]),
            np.concatenate([self.atoms_mass, other.atoms_mass]),
            dens,
            max(self.r_max, other.r_max),
            min(self.r_min, other.r_min),
            max(self.n_panels, other.n_panels),
        )


# ---------------------------------------------------------------- exponents


@dataclass
class GrowthCertificate:
    c_psi: float
    r_exp: float
    c_low: float
    slope: float
    flagged: bool

    def to_dict(self) -> dict:
        return dict(c_psi=self.c_psi, r_exp=self.r_exp, c_low=self.c_low, slope=self.slope, flagged=self.flagged)


@dataclass
class GangolliExponent:
    """psi(lam) = c + a (rho^2 + lam^2) + sum_k w_k (rho^2 + lam^2)^{alpha_k/2} + int (1 - phi_lam) nu.

    ``custom`` adds an arbitrary callable; it is how deliberately invalid
    multipliers are built for counterexamples, and it is never validated.
    """

    space: SpaceModel
    a: float = 0.0
    c: float = 0.0
    levy: LevyMeasureRadial = field(default_factory=LevyMeasureRadial.zero)
    stable_terms: tuple[tuple[float, float], ...] = ()
    custom: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "psi"
    certificate: GrowthCertificate | None = None

    def __call__(self, lam) -> np.ndarray:
        lam = np.abs(np.asarray(lam, dtype=float))
        k = self.space.rho**2 + lam**2
        out = self.c + self.a * k
        for w, alpha in self.stable_terms:
            out = out + w * k ** (alpha / 2)
        if not self.levy.is_zero:
            out = out + self.levy.jump_part(self.space, lam)
        if self.custom is not None:
            out = out + self.custom(lam)
        return np.asarray(out, dtype=float) + np.zeros(lam.shape)

    @property
    def diffusion_coeff(self) -> float:
        return self.a

    @property
    def kill_rate(self) -> float:
        return self.c

    @property
    def stable_index(self) -> float | None:
        return self.stable_terms[0][1] if len(self.stable_terms) == 1 else None

    def samples(self, sgrid: SpectralGrid | None = None) -> SpectralFunction:
        sgrid = sgrid or default_sgrid()
        return SpectralFunction(sgrid, self(sgrid.nodes))

    def scaled(self, s: float) -> "GangolliExponent":
        if s < 0:
            raise ValueError("exponents form a cone: scale must be >= 0")
        cust = self.custom
        return GangolliExponent(
            self.space,
            s * self.a,
            s * self.c,
            self.levy.scaled(s),
            tuple((s * w, al) for w, al in self.stable_terms),
            None if cust is None else (lambda lam, cust=cust: s * cust(lam)),
            f"{s:g}*{self.name}",
        )

    def __add__(self, other: "GangolliExponent") -> "GangolliExponent":
        if self.custom is None:
            cust = other.custom
        elif other.custom is None:
            cust = self.custom
        else:
            cust = lambda lam, f=self.custom, g=other.custom: f(lam) + g(lam)  # noqa: E731
        return GangolliExponent(
            self.space,
            self.a + other.a,
            self.c + other.c,
            self.levy + other.levy,
            self.stable_terms + other.stable_terms,
            cust,
            f"{self.name}+{other.name}",
        )

    def to_dict(self) -> dict:
        if self.custom is not None:
            raise ValueError("custom exponents are not serialisable")
        return dict(
            a=self.a,
            c=self.c,
            stable=[list(t) for t in self.stable_terms],
            atoms=[[float(r), float(m)] for r, m in zip(self.levy.atoms_r, self.levy.atoms_mass)],
            name=self.name,
        )


def bm_exponent(space: SpaceModel) -> GangolliExponent:
    return GangolliExponent(space, a=1.0, name="bm")


def exponent_from_characteristics(
    space: SpaceModel, a: float = 0.0, c: float = 0.0, nu: LevyMeasureRadial | None = None, name: str = "gangolli"
) -> GangolliExponent:
    if a < 0 or c < 0:
        raise ValueError("diffusion coefficient and kill rate must be nonnegative")
    nu = nu or LevyMeasureRadial.zero()
    nu.validate(space)
    return GangolliExponent(space, a=a, c=c, levy=nu, name=name)


def stable_exponent(space: SpaceModel, alpha: float) -> GangolliExponent:
    if not 0 < alpha <= 2:
        raise ValueError("stable index must lie in (0, 2]")
    return GangolliExponent(space, stable_terms=((1.0, float(alpha)),), name=f"stable{alpha:g}")


def killed_exponent(space: SpaceModel, c: float = 0.3) -> GangolliExponent:
    """Pure killing at rate c; the multiplier at lam = 0 is exp(-c t)."""
    return exponent_from_characteristics(space, c=c, name=f"killed{c:g}")


def compound_jump_exponent(space: SpaceModel) -> GangolliExponent:
    nu = LevyMeasureRadial.atoms([0.5, 1.5], [0.8, 0.5])
    return exponent_from_characteristics(space, nu=nu, name="compound_jump")


def custom_exponent(space: SpaceModel, fn: Callable, name: str = "custom") -> GangolliExponent:
    return GangolliExponent(space, custom=fn, name=name)


def library_exponents(space: SpaceModel) -> dict[str, GangolliExponent]:
    return {
        "bm": bm_exponent(space),
        "stable0.5": stable_exponent(space, 0.5),
        "stable1": stable_exponent(space, 1.0),
        "stable1.5": stable_exponent(space, 1.5),
        "killed": killed_exponent(space, 0.3),
        "compound_jump": compound_jump_exponent(space),
    }


# ---------------------------------------------------------------- definiteness


@dataclass
class Verdict:
    passed: bool
    worst: float
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return dict(passed=self.passed, worst=self.worst, **self.details)


def positive_definite_sampling(fn: Callable[[np.ndarray], np.ndarray], lam_samples, tol: float = 1e-10) -> Verdict:
    """min eigenvalue of [fn(lam_i - lam_j)] against -tol * n."""
    lam = np.asarray(lam_samples, dtype=float)
    n = lam.size
    with np.errstate(over="ignore", invalid="ignore"):
        mat = np.asarray(fn(lam[:, None] - lam[None, :]), dtype=float)
    if not np.all(np.isfinite(mat)):
        return Verdict(False, -np.inf, {"reason": "non-finite entries"})
    mat = 0.5 * (mat + mat.T)
    ev = float(np.linalg.eigvalsh(mat)[0])
    return Verdict(ev >= -tol * n, ev, {"n": n})


def schoenberg_check(
    psi: GangolliExponent,
    t_list: Sequence[float] = (0.1, 1.0, 10.0),
    lam_samples=None,
    tol: float = 1e-10,
    seed: int = 0,
) -> Verdict:
    """PSD test of [exp(-t psi(lam_i - lam_j))] for each t."""
    if lam_samples is None:
        lam_samples = np.random.default_rng(seed).uniform(-10, 10, 12)
    lam_samples = np.asarray(lam_samples, dtype=float)
    if lam_samples.size > 12:
        raise ValueError("at most 12 samples per matrix")
    per_t = {}
    worst = np.inf
    ok = True
    for t in t_list:
        with np.errstate(over="ignore"):
            v = positive_definite_sampling(lambda x: np.exp(-t * psi(x)), lam_samples, tol)
        per_t[float(t)] = v.worst
        worst = min(worst, v.worst)
        ok &= v.passed
    return Verdict(bool(ok), float(worst), {"min_eig_per_t": per_t})


def negdef_inequality_suite(
    psi: GangolliExponent,
    n_random: int = 10_000,
    seed: int = 0,
    lam_max: float = 20.0,
    s_values: Sequence[float] = (-2, -1, 1, 2),
    tol: float = 1e-12,
) -> Verdict:
    """Square-root subadditivity and the generalised Peetre inequality on random pairs.

    Slack is (rhs - lhs) / max(1, |rhs|), so large values are compared relatively.
    """
    rng = np.random.default_rng(seed)
    lam = rng.uniform(-lam_max, lam_max, n_random)
    eta = rng.uniform(-lam_max, lam_max, n_random)
    pl, pe, pd = psi(lam), psi(eta), psi(lam - eta)
    slacks = {}
    lhs = np.abs(np.sqrt(np.abs(pl)) - np.sqrt(np.abs(pe)))
    rhs = np.sqrt(np.abs(pd))
    slacks["sqrt"] = float(np.min((rhs - lhs) / np.maximum(1.0, rhs)))
    for s in s_values:
        lhs = ((1 + pl) / (1 + pe)) ** s
        rhs = 2.0 ** abs(s) * (1 + pd) ** abs(s)
        slacks[f"peetre_s={s:g}"] = float(np.min((rhs - lhs) / np.maximum(1.0, np.abs(rhs))))
    worst = min(slacks.values())
    return Verdict(worst >= -tol, worst, {"slacks": slacks, "n_pairs": n_random})


def fit_growth_constants(psi: GangolliExponent, sgrid: SpectralGrid | None = None) -> GrowthCertificate:
    """c_psi with |psi| <= c_psi (1 + lam^2), and (r, c) with psi >= c |lam|^{2r} on |lam| >= 1.

    r is read off the log-log slope at the top of the grid, rounded to two
    decimals, then c is the grid infimum of psi / lam^{2r}.  No growth
    (r = 0) is flagged since the lower bound then carries no information.
    """
    sgrid = sgrid or default_sgrid()
    lam = sgrid.nodes
    vals = psi(lam)
    c_psi = SAFETY_C_PSI * float(np.max(np.abs(vals) / (1 + lam**2)))
    top = sgrid.upper
    l1, l2 = 0.5 * top, top
    v1, v2 = psi(np.array([l1, l2]))
    slope = float(np.log(v2 / v1) / np.log(l2 / l1)) if v1 > 0 and v2 > 0 else 0.0
    r_exp = max(0.0, round(slope / 2, 2))
    big = lam >= 1.0
    c_low = float(np.min(vals[big] / lam[big] ** (2 * r_exp)))
    flagged = r_exp <= 0.0 or c_low <= 0.0
    cert = GrowthCertificate(c_psi, r_exp, c_low, slope, flagged)
    psi.certificate = cert
    return cert


def certificate(psi: GangolliExponent) -> GrowthCertificate:
    return psi.certificate or fit_growth_constants(psi)


def reconstruct_characteristics(
    psi: GangolliExponent, atom_radii: Sequence[float], sgrid: SpectralGrid | None = None
) -> dict:
    """Least-squares (c, a, atom masses) from samples of psi on a known atom support."""
    sgrid = sgrid or default_sgrid()
    lam = sgrid.nodes
    space = psi.space
    cols = [np.ones_like(lam), space.rho**2 + lam**2]
    radii = np.asarray(atom_radii, dtype=float)
    if radii.size:
        cols += list((1.0 - spherical_function(space, lam[:, None], radii[None, :])).T)
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, psi(lam), rcond=None)
    resid = float(np.max(np.abs(A @ coef - psi(lam))))
    return {"c": float(coef[0]), "a": float(coef[1]), "masses": coef[2:], "residual": resid}


# ---------------------------------------------------------------- symbols


@dataclass(frozen=True)
class SmoothBump:
    """u(r) = amplitude * exp(1 / ((r/R)^2 - 1)) on [0, R), zero beyond."""

    radius: float = 1.0
    amplitude: float = 1.0

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        x = np.clip(r / self.radius, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            out = self.amplitude * np.exp(1.0 / np.minimum(x**2 - 1.0, -1e-300))
        return np.where(r < self.radius, out, 0.0)

    def scaled(self, s: float) -> "SmoothBump":
        return SmoothBump(self.radius, s * self.amplitude)

    def as_radial(self, grid: RadialGrid) -> RadialFunction:
        return RadialFunction(grid, self(grid.nodes))


@dataclass
class Q2Term:
    u: SmoothBump | RadialFunction | Callable
    v: GangolliExponent

    def u_values(self, r) -> np.ndarray:
        return np.asarray(self.u(np.asarray(r, dtype=float)), dtype=float)


@dataclass
class GangolliSymbol:
    """q(r, lam) = q1(lam) + sum_k u_k(r) v_k(lam).

    ``psi`` is the reference exponent for the Sobolev scale and the ellipticity audit;
    ``kappa`` is set for the kappa * psi + u v example class.
    """

    q1: GangolliExponent
    terms: list[Q2Term] = field(default_factory=list)
    M: int = 6
    psi: GangolliExponent | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.M % 2:
            raise ValueError("smoothness order M must be even")
        if self.psi is None:
            self.psi = self.q1

    @property
    def space(self) -> SpaceModel:
        return self.q1.space

    @property
    def is_constant_coefficient(self) -> bool:
        return all(np.all(t.u_values(np.linspace(0, 20, 101)) == 0) for t in self.terms) or not self.terms

    @property
    def base_radius(self) -> float:
        """A radius sigma_0 outside every u_k support, where q(sigma_0, .) = q1."""
        radii = [t.u.radius for t in self.terms if isinstance(t.u, SmoothBump)]
        return max(radii, default=0.0)

    def q2(self, r, lam) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        lam = np.asarray(lam, dtype=float)
        out = np.zeros(np.broadcast_shapes(r.shape, lam.shape))
        for t in self.terms:
            out = out + t.u_values(r) * t.v(lam)
        return out

    def __call__(self, r, lam) -> np.ndarray:
        return self.q1(lam) + self.q2(r, lam)

    def with_kappa(self, kappa: float) -> "GangolliSymbol":
        if self.kappa is None:
            raise ValueError("symbol is not of the kappa * psi + u v form")
        return GangolliSymbol(self.psi.scaled(kappa), list(self.terms), self.M, self.psi, kappa)


def example_symbol(
    space: SpaceModel,
    psi: GangolliExponent | None = None,
    kappa: float = 1.0,
    u: SmoothBump | None = None,
    v: GangolliExponent | None = None,
    M: int = 6,
) -> GangolliSymbol:
    """q = kappa * psi + u(r) v(lam) with bm defaults for psi and v."""
    psi = psi or bm_exponent(space)
    v = v or bm_exponent(space)
    u = SmoothBump(1.0, 1.0) if u is None else u
    terms = [] if u.amplitude == 0 else [Q2Term(u, v)]
    return GangolliSymbol(psi.scaled(kappa), terms, M, psi, kappa)


def vbnd_constant(v: GangolliExponent, psi: GangolliExponent, eta: np.ndarray) -> float:
    """Grid sup of |v| / (1 + psi)."""
    return float(np.max(np.abs(v(eta)) / (1 + psi(eta))))


# ---------------------------------------------------------------- audits


def audit_A1(q: GangolliSymbol, psi_ref: GangolliExponent | None = None, sgrid: SpectralGrid | None = None) -> tuple[float, float, bool]:
    """c0 = inf q1 / (1 + psi) and c1 = sup over grid nodes with |lam| >= 1."""
    sgrid = sgrid or default_sgrid()
    psi_ref = psi_ref or q.psi
    lam = sgrid.nodes[sgrid.nodes >= 1.0]
    ratio = q.q1(lam) / (1 + psi_ref(lam))
    c0, c1 = float(np.min(ratio)), float(np.max(ratio))
    return c0, c1, c0 > 0


def _envelope_panel(lam_env: float, n: int) -> np.ndarray:
    return np.linspace(0.0, lam_env, n)


def _support_grid(radius: float) -> RadialGrid:
    return RadialGrid.gauss(radius, 32, 16)


@dataclass
class EnvelopeData:
    """Pointwise sup envelopes E_n = sup_lam |Delta^n (phi_lam u)| <lam>^{-M}, n = 0..M/2."""

    grid: RadialGrid
    E: np.ndarray
    norms: np.ndarray
    c_v: float


def _term_envelopes(space: SpaceModel, term: Q2Term, psi: GangolliExponent, M: int, lam_env: float, n_samples: int, rgrid: RadialGrid) -> tuple[EnvelopeData, np.ndarray]:
    if not isinstance(term.u, SmoothBump):
        raise SmoothnessError("envelopes need a bump with analytic derivatives up to order M")
    lam = _envelope_panel(lam_env, n_samples)
    weight = (1 + lam**2) ** (-M / 2)
    sgrid = _support_grid(term.u.radius)
    P = laplacian_powers(space, lam, sgrid.nodes, term.u.radius, term.u.amplitude, M // 2)
    E = np.max(np.abs(P) * weight[None, :, None], axis=1)
    # r = 0 carries zero weight; keep the envelope continuous there
    E[:, 0] = E[:, 1]
    norms = np.array([RadialFunction(sgrid, e).l1_norm(space) for e in E])
    Pd = laplacian_powers(space, lam, rgrid.nodes, term.u.radius, term.u.amplitude, M // 2)
    Ed = np.max(np.abs(Pd) * weight[None, :, None], axis=1)
    c_v = vbnd_constant(term.v, psi, _envelope_panel(lam_env, n_samples))
    return EnvelopeData(sgrid, E, norms, c_v), Ed


def _odd_split(n_lo: float, n_hi: float) -> tuple[float, float]:
    """Optimal split time a and the resulting L1 bound for the half-order step."""
    if n_lo == 0.0 or n_hi == 0.0:
        return 1.0, 0.0
    a = 2 * n_lo / n_hi
    return a, (2 * np.sqrt(a) * n_hi + 4 * n_lo / np.sqrt(a)) / (2 * np.sqrt(np.pi))


def _odd_multipliers(space: SpaceModel, lam: np.ndarray, a: float) -> tuple[np.ndarray, np.ndarray]:
    from scipy.special import erf, erfc

    k = space.rho**2 + lam**2
    sk = np.sqrt(k)
    m1 = 2 * np.sqrt(np.pi) / sk * erf(np.sqrt(a) * sk) - 2 / np.sqrt(a) * (-np.expm1(-a * k)) / k
    m2 = 2 / np.sqrt(a) * np.exp(-a * k) - 2 * np.sqrt(np.pi) * sk * erfc(np.sqrt(a) * sk)
    return m1, m2


def phi_beta_envelopes(
    space: SpaceModel,
    q: GangolliSymbol,
    lam_env: float = ENV_LAMBDA,
    n_samples: int = ENV_SAMPLES,
    rgrid: RadialGrid | None = None,
    sgrid: SpectralGrid | None = None,
) -> tuple[list[RadialFunction], np.ndarray, dict]:
    """All Phi_beta, beta = 0..M, with their L1 norms.

    Even beta: 1.1 c_v E_{beta/2}, with E_n computed exactly from Taylor jets.
    Odd beta = 2k+1: the half-order step is bounded through
    (-Delta)^{1/2} = (2 sqrt(pi))^{-1} int_0^inf t^{-3/2} (1 - T_t) dt split at
    time a, with |G - T_t G| <= int_0^t T_s |Delta G| ds.  This yields the
    pointwise envelope
        (2 sqrt(pi))^{-1} [int_0^a 2(s^{-1/2} - a^{-1/2}) T_s E_{k+1} ds
                           + 2 a^{-1/2} E_k + int_a^inf t^{-3/2} T_t E_k dt],
    whose L1 norm is exact because T_t preserves the mass of nonnegative
    functions; a is chosen to minimise it.  Pointwise values of the odd
    envelopes are evaluated spectrally and are indicative only.
    """
    rgrid = rgrid or default_rgrid()
    sgrid = sgrid or default_sgrid()
    M = q.M
    values = np.zeros((M + 1, rgrid.n_points))
    norms = np.zeros(M + 1)
    diag: dict = {"terms": []}
    for term in q.terms:
        env, Ed = _term_envelopes(space, term, q.psi, M, lam_env, n_samples, rgrid)
        scale = SAFETY_PHI * env.c_v
        splits = []
        for beta in range(M + 1):
            k = beta // 2
            if beta % 2 == 0:
                values[beta] += scale * Ed[k]
                norms[beta] += scale * env.norms[k]
                continue
            a, bound = _odd_split(env.norms[k], env.norms[k + 1])
            splits.append(a)
            norms[beta] += scale * bound
            if bound == 0.0:
                continue
            m1, m2 = _odd_multipliers(space, sgrid.nodes, a)
            hi = forward(space, RadialFunction(rgrid, Ed[k + 1]), sgrid, allow_truncation=True).values
            lo = forward(space, RadialFunction(rgrid, Ed[k]), sgrid, allow_truncation=True).values
            smooth = inverse(space, SpectralFunction(sgrid, m1 * hi + m2 * lo), rgrid, allow_truncation=True).values
            values[beta] += scale * (smooth + 2 / np.sqrt(a) * Ed[k]) / (2 * np.sqrt(np.pi))
        diag["terms"].append({"c_v": env.c_v, "E_norms": env.norms.tolist(), "split_times": splits})
    return [RadialFunction(rgrid, v) for v in values], norms, diag


def phi_beta_envelope(space: SpaceModel, q: GangolliSymbol, beta: int, **kw) -> tuple[RadialFunction, float]:
    if not 0 <= beta <= q.M:
        raise ValueError("beta must lie in [0, M]")
    funcs, norms, _ = phi_beta_envelopes(space, q, **kw)
    return funcs[beta], float(norms[beta])


def constants_CM_gammaM(space: SpaceModel, psi: GangolliExponent, M: int, c_psi: float | None = None) -> tuple[float, float, dict]:
    """C_M = 2^{M/2} sup <lam>^M / sum_beta (rho^2 + lam^2)^{beta/2}, and gamma_M."""
    if M <= space.dimension + 1:
        raise ValueError(f"need M > d + 1 = {space.dimension + 1}")
    lam = np.concatenate([np.linspace(0, 50, 5001), np.geomspace(50, 1e8, 2000)])
    k = space.rho**2 + lam**2
    denom = sum(k ** (b / 2) for b in range(M + 1))
    ratio = (1 + lam**2) ** (M / 2) / denom
    # ratio -> 1 from below as lam -> inf, so the limit bounds the tail
    sup = max(float(np.max(ratio)), 1.0)
    C_M = 2 ** (M / 2) * sup
    c_psi = certificate(psi).c_psi if c_psi is None else c_psi
    val, tail = bracket_weight_l1(space, M - 1)
    weight_norm = val + tail
    gamma = 1.0 / (8 * C_M * np.sqrt(2 * (1 + c_psi)) * weight_norm)
    return C_M, float(gamma), {"bracket_l1": val, "bracket_tail": tail, "ratio_sup_grid": float(np.max(ratio))}


@dataclass
class AuditReport:
    c0: float | None = None
    c1: float | None = None
    c_psi: float | None = None
    r_exp: float | None = None
    c_low: float | None = None
    C_M: float | None = None
    gamma_M: float | None = None
    phi_norms: list[float] = field(default_factory=list)
    alpha0: float | None = None
    kappa: float | None = None
    kappa_min: float | None = None
    verdicts: dict[str, bool] = field(default_factory=dict)
    skipped: dict[str, str] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    safety: dict = field(default_factory=lambda: {"c_psi": SAFETY_C_PSI, "phi": SAFETY_PHI})

    @property
    def phi_sum(self) -> float:
        return float(sum(self.phi_norms))

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(self.verdicts.values()) and not self.skipped

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "c0", "c1", "c_psi", "r_exp", "c_low", "C_M", "gamma_M", "phi_norms", "alpha0",
            "kappa", "kappa_min", "verdicts", "skipped", "diagnostics", "safety")}
        out["phi_sum"] = self.phi_sum
        out["passed"] = self.passed
        return out


def minimal_kappa(
    space: SpaceModel,
    psi: GangolliExponent,
    u: SmoothBump,
    v: GangolliExponent,
    M: int = 6,
    rel_tol: float = 1e-3,
    sgrid: SpectralGrid | None = None,
) -> tuple[float, AuditReport]:
    """Smallest kappa with sum ||Phi_beta||_1 <= gamma_M c0(kappa), by bisection.

    Returns the upper end of the final bracket, which always passes.
    """
    report = AuditReport()
    cert = certificate(psi)
    report.c_psi, report.r_exp, report.c_low = cert.c_psi, cert.r_exp, cert.c_low
    C_M, gamma, cdiag = constants_CM_gammaM(space, psi, M, cert.c_psi)
    report.C_M, report.gamma_M = C_M, gamma
    report.diagnostics["C_M"] = cdiag
    if u.amplitude == 0:
        report.phi_norms = [0.0] * (M + 1)
        report.kappa_min = 0.0
        return 0.0, report
    base = example_symbol(space, psi, 1.0, u, v, M)
    _, norms, ediag = phi_beta_envelopes(space, base)
    report.phi_norms = norms.tolist()
    report.diagnostics["envelopes"] = ediag
    total = float(norms.sum())

    def passes(kappa: float) -> bool:
        c0, _, _ = audit_A1(base.with_kappa(kappa), psi, sgrid)
        return total <= gamma * c0

    hi = 1.0
    while not passes(hi):
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("no kappa satisfies the smallness condition")
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    report.kappa_min = hi
    return hi, report
