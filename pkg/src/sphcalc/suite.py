"""Invariant-suite runner, end-to-end symbol audit and plot-data export."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import SphcError
from .space_model import (
    RadialFunction,
    RadialGrid,
    SpaceModel,
    SpectralFunction,
    SpectralGrid,
    k_average,
    radial_laplacian,
    spherical_function,
)
from .spherical_transform import (
    calibrated_space,
    calibration_family,
    forward,
    inverse,
    plancherel_check,
    relative_l2,
    triangle_constant,
)
from .symbol_lab import (
    AuditReport,
    GangolliExponent,
    GangolliSymbol,
    LevyMeasureRadial,
    SmoothBump,
    audit_A1,
    bm_exponent,
    certificate,
    compound_jump_exponent,
    constants_CM_gammaM,
    custom_exponent,
    example_symbol,
    exponent_from_characteristics,
    killed_exponent,
    library_exponents,
    minimal_kappa,
    negdef_inequality_suite,
    phi_beta_envelopes,
    schoenberg_check,
    stable_exponent,
)

DEFAULT_TOLERANCES = {
    "roundtrip": 1e-6,
    "roundtrip_seconds": 60.0,
    "plancherel": 1e-6,
    "functional_equation": 1e-8,
    "eigenrelation": 1e-5,
    "hunt": 1e-4,
    "subfeller_positivity": 1e-8,
    "killed_multiplier": 1e-10,
    "schoenberg": 1e-10,
    "negdef_slack": 1e-12,
    "frac_laplacian": 1e-3,
    "jhat_scaling": 1e-10,
    "mollifier_decay": 10.0,
    "commutator_spread": 2.0,
    "coercivity": 1e-6,
    "resolvent": 1e-4,
    "resolvent_monotone_noise": 0.05,
    "resolvent_closed_form": 1e-8,
    "direct_gangolli": 1e-3,
    "pmp": 1e-6,
}

GROUPS = ("transform", "symbol", "psdo", "semigroup", "pipeline")


@dataclass
class SuiteConfig:
    """Everything a suite run depends on; serialised verbatim into the manifest."""

    d: int = 3
    r_max: float = 20.0
    r_panels: int = 40
    lambda_max: float = 40.0
    lambda_panels: int = 40
    order: int = 16
    seed: int = 0
    plancherel_scale_factor: float = 1.0
    bump_radius: float = 1.0
    bump_amplitude: float = 1.0
    M: int = 6
    kappa_factor: float = 2.0
    commutator_lambda_max: float = 160.0
    commutator_s: float = 1.0
    fd_points: int = 2001
    workers: int = 1
    only: list[str] | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(data.get("tolerances", {}))
        cfg.tolerances = tol
        return cfg

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def rgrid(self) -> RadialGrid:
        return RadialGrid.gauss(self.r_max, self.r_panels, self.order)

    def sgrid(self) -> SpectralGrid:
        return SpectralGrid.gauss(self.lambda_max, self.lambda_panels, self.order)

    def bump(self) -> SmoothBump:
        return SmoothBump(self.bump_radius, self.bump_amplitude)


@dataclass
class CheckResult:
    name: str
    group: str
    criterion: int
    passed: bool
    value: float
    tolerance: float
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: str | None = None

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.criterion:2d} {self.group:<9s} {self.name:<20s} value={self.value:.3e} tol={self.tolerance:.1e} ({self.seconds:.1f}s)"


# ---------------------------------------------------------------- shared context


def make_space(cfg: SuiteConfig) -> SpaceModel:
    sp = calibrated_space(cfg.d, cfg.rgrid(), cfg.sgrid())
    sp.plancherel_scale *= cfg.plancherel_scale_factor
    return sp


@lru_cache(maxsize=8)
def _kappa_min_cached(d: int, scale: float, radius: float, amplitude: float, M: int) -> tuple[float, AuditReport]:
    sp = calibrated_space(d)
    sp.plancherel_scale = scale
    psi = bm_exponent(sp)
    return minimal_kappa(sp, psi, SmoothBump(radius, amplitude), psi, M)


def kappa_min_for(space: SpaceModel, cfg: SuiteConfig) -> tuple[float, AuditReport]:
    return _kappa_min_cached(space.dimension, space.plancherel_scale, cfg.bump_radius, cfg.bump_amplitude, cfg.M)


def _rel_l2(space: SpaceModel, grid: RadialGrid, a: np.ndarray, b: np.ndarray) -> float:
    w = grid.weights * space.jacobian(grid.nodes)
    return float(np.sqrt(np.sum(w * (a - b) ** 2) / np.sum(w * b**2)))


# ---------------------------------------------------------------- transform checks


def check_roundtrip(cfg: SuiteConfig) -> CheckResult:
    t0 = time.perf_counter()
    sp = make_space(cfg)
    rg, sg = cfg.rgrid(), cfg.sgrid()
    errs = [relative_l2(sp, inverse(sp, forward(sp, f, sg), rg, allow_truncation=True), f) for f in calibration_family(rg)]
    secs = time.perf_counter() - t0
    tol = cfg.tolerances["roundtrip"]
    ok = max(errs) <= tol and secs <= cfg.tolerances["roundtrip_seconds"]
    return CheckResult("roundtrip", "transform", 1, ok, max(errs), tol, {"per_bump": errs, "seconds": secs})


def check_plancherel(cfg: SuiteConfig) -> CheckResult:
    sp = make_space(cfg)
    errs = []
    for f in calibration_family(cfg.rgrid()):
        lhs, rhs = plancherel_check(sp, f, cfg.sgrid())
        errs.append(abs(lhs - rhs) / lhs)
    tol = cfg.tolerances["plancherel"]
    return CheckResult("plancherel", "transform", 2, max(errs) <= tol, max(errs), tol, {"per_bump": errs})


def check_functional_equation(cfg: SuiteConfig, n_theta: int = 512) -> CheckResult:
    """phi(r) phi(s) against the sphere average of phi(d(r, s, theta))."""
    sp = make_space(cfg)
    lams = np.linspace(0.0, 10.0, 11)
    rs = np.linspace(0.0, 5.0, 11)
    worst = 0.0
    for lam in lams:
        fn = lambda x, lam=lam: spherical_function(sp, lam, x)  # noqa: E731
        R, S = np.meshgrid(rs, rs, indexing="ij")
        lhs = fn(R) * fn(S)
        rhs = k_average(sp, fn, R, S, n_theta)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    tol = cfg.tolerances["functional_equation"]
    return CheckResult("functional_equation", "transform", 3, worst <= tol, worst, tol, {"d": sp.dimension})


def check_eigenrelation(cfg: SuiteConfig, n_points: int = 5001) -> CheckResult:
    sp = make_space(cfg)
    grid = RadialGrid.uniform(5.0, n_points)
    worst = 0.0
    for lam in np.linspace(0.0, 10.0, 11):
        phi = spherical_function(sp, lam, grid.nodes)
        fd = radial_laplacian(sp, RadialFunction(grid, phi)).values
        worst = max(worst, _rel_l2(sp, grid, fd, -(sp.rho**2 + lam**2) * phi))
    tol = cfg.tolerances["eigenrelation"]
    return CheckResult("eigenrelation", "transform", 4, worst <= tol, worst, tol, {"h": grid.nodes[1]})


# ---------------------------------------------------------------- symbol checks


def _counterexample(space: SpaceModel) -> GangolliExponent:
    # exp(-t lam^4) is not positive definite, so lam^4 is not negative definite
    return custom_exponent(space, lambda lam: lam**4, name="quartic")


def check_schoenberg(cfg: SuiteConfig) -> CheckResult:
    sp = make_space(cfg)
    tol = cfg.tolerances["schoenberg"]
    per = {}
    worst = np.inf
    for name, psi in library_exponents(sp).items():
        v = schoenberg_check(psi, tol=tol, seed=cfg.seed)
        per[name] = (v.passed, v.worst)
        worst = min(worst, v.worst)
    bad = schoenberg_check(_counterexample(sp), tol=tol, seed=cfg.seed)
    ok = all(p for p, _ in per.values()) and not bad.passed
    return CheckResult("schoenberg", "symbol", 7, ok, worst, tol, {"library": per, "counterexample_min_eig": bad.worst, "counterexample_rejected": not bad.passed})


def check_negdef(cfg: SuiteConfig) -> CheckResult:
    sp = make_space(cfg)
    tol = cfg.tolerances["negdef_slack"]
    per = {}
    for name, psi in library_exponents(sp).items():
        v = negdef_inequality_suite(psi, 10_000, cfg.seed, tol=tol)
        per[name] = v.worst
    worst = min(per.values())
    return CheckResult("negdef", "symbol", 8, worst >= -tol, worst, tol, {"min_slack": per})


def check_phi_beta_bound(cfg: SuiteConfig) -> CheckResult:
    """|F^_{lam,eta}(mu)| <= C_M sum ||Phi_beta|| <lam + mu>^{-M} (1 + psi(eta)) on a 10^3 panel."""
    from .psdo_calculus import f_hat_matrix

    sp = make_space(cfg)
    psi = bm_exponent(sp)
    q = example_symbol(sp, psi, 1.0, cfg.bump(), psi, cfg.M)
    _, norms, _ = phi_beta_envelopes(sp, q)
    C_M, _, _ = constants_CM_gammaM(sp, psi, cfg.M)
    L = np.linspace(-30.0, 30.0, 10)
    E = np.linspace(0.0, 30.0, 10)
    F = f_hat_matrix(sp, q, L, L, E)
    S = L[:, None, None] + L[None, :, None]
    rhs = C_M * norms.sum() * (1 + S**2) ** (-cfg.M / 2) * (1 + psi(E))[None, None, :]
    ratio = np.abs(F) / rhs
    i = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    sym = C_M * norms.sum() * (1 + (np.abs(L[:, None, None]) - np.abs(L[None, :, None])) ** 2) ** (-cfg.M / 2) * (1 + psi(E))[None, None, :]
    worst = float(ratio.max())
    return CheckResult(
        "phi_beta_bound",
        "symbol",
        12,
        worst <= 1.0,
        worst,
        1.0,
        {
            "worst_at": [float(L[i[0]]), float(L[i[1]]), float(E[i[2]])],
            "fraction_violated": float(np.mean(ratio > 1)),
            "phi_sum": float(norms.sum()),
            "C_M": C_M,
            "ratio_with_abs_difference": float((np.abs(F) / sym).max()),
        },
    )


# ---------------------------------------------------------------- psdo checks


def check_frac_laplacian(cfg: SuiteConfig) -> CheckResult:
    from .psdo_calculus import fractional_laplacian, fractional_laplacian_subordinated

    sp = make_space(cfg)
    rg, sg = cfg.rgrid(), cfg.sgrid()
    r = rg.nodes
    errs = []
    for w in np.linspace(0.5, 3.0, 10):
        f = RadialFunction(rg, np.exp(-(r**2) / w))
        a = fractional_laplacian(sp, f, 1.0, sg)
        b = fractional_laplacian_subordinated(sp, f, sgrid=sg)
        errs.append(relative_l2(sp, b, a))
    tol = cfg.tolerances["frac_laplacian"]
    return CheckResult("frac_laplacian", "psdo", 9, max(errs) <= tol, max(errs), tol, {"per_bump": errs})


def check_mollifier(cfg: SuiteConfig) -> CheckResult:
    from .psdo_calculus import SobolevParams, jhat_unit, make_mollifier, sobolev_norm_hat

    sp = make_space(cfg)
    sg, rg = cfg.sgrid(), cfg.rgrid()
    psi = bm_exponent(sp)
    eps_grid = (1.0, 0.3, 0.1, 0.03, 0.01)
    u = RadialFunction(rg, np.exp(-(rg.nodes**2)))
    uhat = forward(sp, u, sg)
    contraction = True
    scaling = 0.0
    dist = {}
    for s in (0.0, 1.0):
        P = SobolevParams(psi, s)
        nu = sobolev_norm_hat(sp, P, uhat)
        for eps in eps_grid:
            m = make_mollifier(sp, eps, sg)
            scaling = max(scaling, float(np.max(np.abs(m.jhat.values - jhat_unit(eps * sg.nodes)))))
            ju = SpectralFunction(sg, m.jhat.values * uhat.values)
            contraction &= sobolev_norm_hat(sp, P, ju) <= nu * (1 + 1e-12)
            if s == 1.0:
                dist[eps] = sobolev_norm_hat(sp, P, SpectralFunction(sg, ju.values - uhat.values))
    decay = dist[1.0] / dist[0.01]
    ok = contraction and scaling <= cfg.tolerances["jhat_scaling"] and decay >= cfg.tolerances["mollifier_decay"]
    return CheckResult(
        "mollifier", "psdo", 10, bool(ok), scaling, cfg.tolerances["jhat_scaling"],
        {"contraction": bool(contraction), "distance": dist, "decay_factor": decay},
    )


def check_commutator(cfg: SuiteConfig) -> CheckResult:
    """Spread of the worst-packet commutator ratio across eps."""
    from .psdo_calculus import commutator_probe, commutator_sweep, SobolevParams, sobolev_norm, make_mollifier

    sp = make_space(cfg)
    L = cfg.commutator_lambda_max
    n = int(round(L))
    rg = RadialGrid.gauss(cfg.r_max, max(cfg.r_panels, n), cfg.order)
    sg = SpectralGrid.gauss(L, max(cfg.lambda_panels, n), cfg.order)
    psi = bm_exponent(sp)
    q = example_symbol(sp, psi, 1.0, cfg.bump(), psi, cfg.M)
    s = cfg.commutator_s
    sweep, single = {}, {}
    u = RadialFunction(cfg.rgrid(), np.exp(-(cfg.rgrid().nodes ** 2)))
    for eps in (1.0, 0.3, 0.1, 0.03):
        sweep[eps] = commutator_sweep(sp, q, eps, s, rg, sg)
        m = make_mollifier(sp, eps, cfg.sgrid())
        single[eps] = commutator_probe(sp, q, m, u, s) / sobolev_norm(sp, SobolevParams(psi, s + 1), u, cfg.sgrid())
    vals = [v for v, _ in sweep.values()]
    spread = max(vals) / min(vals)
    interior = all(c < 0.9 * L - 2.0 for _, c in sweep.values())
    tol = cfg.tolerances["commutator_spread"]
    return CheckResult(
        "commutator", "psdo", 11, bool(spread <= tol), spread, tol,
        {"sweep": {str(k): v for k, v in sweep.items()}, "peaks_interior": interior, "single_u_ratio": {str(k): v for k, v in single.items()}},
    )


# ---------------------------------------------------------------- semigroup checks


def check_hunt(cfg: SuiteConfig) -> CheckResult:
    from .semigroup_engine import evolve, heat_kernel, hunt_convolution

    sp = make_space(cfg)
    rg, sg = cfg.rgrid(), cfg.sgrid()
    f = RadialFunction(rg, np.exp(-(rg.nodes**2)))
    bm = bm_exponent(sp)
    errs = {}
    for t in (0.1, 0.5, 1.0):
        a = evolve(sp, bm, f, t, sg)
        b = hunt_convolution(sp, f, heat_kernel(sp, t, rg, sg))
        errs[t] = relative_l2(sp, b, a)
    worst = max(errs.values())
    tol = cfg.tolerances["hunt"]
    return CheckResult("hunt", "semigroup", 5, worst <= tol, worst, tol, {"per_t": {str(k): v for k, v in errs.items()}})


def check_subfeller(cfg: SuiteConfig) -> CheckResult:
    from .semigroup_engine import default_unit_family, evolve, subfeller_audit

    sp = make_space(cfg)
    tol = cfg.tolerances["subfeller_positivity"]
    per = {}
    ok = True
    worst = np.inf
    for name, psi in library_exponents(sp).items():
        v = subfeller_audit(sp, psi, tol=tol, sgrid=cfg.sgrid())
        per[name] = v.passed
        ok &= v.passed
        worst = min(worst, v.worst)
    killed = killed_exponent(sp, 0.3)
    ts = np.array([0.1, 0.5, 1.0, 2.0])
    mult_err = float(np.max(np.abs(np.exp(-ts * killed(0.0)) - np.exp(-0.3 * ts))))
    f = default_unit_family(cfg.rgrid())[0]
    decay_err = max(abs(evolve(sp, killed, f, t, cfg.sgrid(), True).sup() - np.exp(-0.3 * t) * f.sup()) for t in ts)
    bad = subfeller_audit(sp, custom_exponent(sp, lambda lam: lam**4 - lam**2, name="quartic"), tol=tol, sgrid=cfg.sgrid())
    ok &= mult_err <= cfg.tolerances["killed_multiplier"] and not bad.passed
    return CheckResult(
        "subfeller", "semigroup", 6, bool(ok), worst, tol,
        {"library": per, "killed_multiplier_error": mult_err, "killed_sup_decay_error": float(decay_err), "counterexample_rejected": not bad.passed},
    )


def _example(cfg: SuiteConfig, sp: SpaceModel, factor: float | None = None) -> tuple[GangolliSymbol, float]:
    kmin, _ = kappa_min_for(sp, cfg)
    psi = bm_exponent(sp)
    kappa = (factor if factor is not None else cfg.kappa_factor) * kmin
    return example_symbol(sp, psi, kappa, cfg.bump(), psi, cfg.M), kmin


def check_coercivity(cfg: SuiteConfig) -> CheckResult:
    from .semigroup_engine import alpha0_compute, assemble_bilinear_form, coercivity_audit

    sp = make_space(cfg)
    q, kmin = _example(cfg, sp)
    c0 = audit_A1(q)[0]
    alpha = alpha0_compute(q.q1, q.psi, c0, cfg.sgrid())
    sys = assemble_bilinear_form(sp, q, alpha, 256, c0, cfg.lambda_max)
    ok, margin, diag = coercivity_audit(sys, 1000, cfg.seed)
    tol = cfg.tolerances["coercivity"]
    rel = margin / (c0 / 2)
    return CheckResult("coercivity", "semigroup", 13, margin >= -tol, rel, tol, {"kappa": q.kappa, "kappa_min": kmin, "alpha0": alpha, **diag})


def check_resolvent(cfg: SuiteConfig) -> CheckResult:
    from .semigroup_engine import alpha0_compute, solve_resolvent

    sp = make_space(cfg)
    q, _ = _example(cfg, sp)
    c0 = audit_A1(q)[0]
    alpha = alpha0_compute(q.q1, q.psi, c0, cfg.sgrid()) + c0
    rg = cfg.rgrid()
    f = RadialFunction(rg, np.exp(-(rg.nodes**2)))
    res = {n: solve_resolvent(sp, q, alpha, f, n, c0, sgrid_ref=cfg.sgrid()).residual for n in (64, 128, 256, 512)}
    noise = cfg.tolerances["resolvent_monotone_noise"]
    vals = list(res.values())
    monotone = all(b <= a * (1 + noise) for a, b in zip(vals, vals[1:]))
    # constant coefficients: compare with plain division
    q0 = GangolliSymbol(q.q1, [], q.M, q.psi, q.kappa)
    sol = solve_resolvent(sp, q0, alpha, f, 256, c0, sgrid_ref=cfg.sgrid())
    def spectral_gap(grid: SpectralGrid, uh: np.ndarray) -> float:
        exact = forward(sp, f, grid).values / (q.q1(grid.nodes) + alpha)
        w = grid.weights * sp.density(grid.nodes)
        return float(np.sqrt(np.sum(w * (uh - exact) ** 2) / np.sum(w * exact**2)))

    # at the Galerkin nodes; on the reference grid the panel interpolant adds its own error
    closed = spectral_gap(sol.system.grid, sol.uhat.values)
    closed_ref = spectral_gap(cfg.sgrid(), sol.uhat(cfg.sgrid().nodes))
    tol = cfg.tolerances["resolvent"]
    ok = res[256] <= tol and monotone and closed <= cfg.tolerances["resolvent_closed_form"]
    return CheckResult(
        "resolvent", "semigroup", 14, bool(ok), res[256], tol,
        {"residuals": {str(k): v for k, v in res.items()}, "monotone": monotone, "closed_form_error": closed, "closed_form_error_reference_grid": closed_ref},
    )


def check_direct_gangolli(cfg: SuiteConfig) -> CheckResult:
    from .semigroup_engine import direct_families, direct_test_functions, direct_vs_psdo

    sp = make_space(cfg)
    grid = RadialGrid.uniform(cfg.r_max, cfg.fd_points)
    per = {}
    for name, q, ch in direct_families(sp):
        per[name] = max(direct_vs_psdo(sp, q, ch, fn, grid, cfg.sgrid()) for fn in direct_test_functions(20))
    worst = max(per.values())
    tol = cfg.tolerances["direct_gangolli"]
    return CheckResult("direct_gangolli", "semigroup", 15, worst <= tol, worst, tol, {"per_family": per})


def check_pmp(cfg: SuiteConfig) -> CheckResult:
    from .psdo_calculus import apply_psdo
    from .semigroup_engine import direct_families, pmp_probe, ring_family

    sp = make_space(cfg)
    tol = cfg.tolerances["pmp"]
    fam = ring_family(cfg.rgrid(), 20)
    symbols = {"example": example_symbol(sp, u=cfg.bump())}
    symbols.update({name: q for name, q, _ in direct_families(sp)})
    per = {name: pmp_probe(sp, q, fam, tol, cfg.sgrid()).worst for name, q in symbols.items()}
    q = symbols["example"]
    flipped = pmp_probe(sp, lambda f: apply_psdo(sp, q, f, cfg.sgrid(), allow_truncation=True), fam, tol)
    worst = max(per.values())
    ok = worst <= tol and not flipped.passed
    return CheckResult("pmp", "semigroup", 16, bool(ok), worst, tol, {"per_symbol": per, "flipped_worst": flipped.worst, "flipped_rejected": not flipped.passed})


# ---------------------------------------------------------------- audit pipeline


def exponent_from_spec(space: SpaceModel, spec: dict | str | None) -> GangolliExponent:
    """Exponent from JSON: {"kind": "bm"|"stable"|"killed"|"compound_jump"|"characteristics", ...}."""
    if spec is None:
        return bm_exponent(space)
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind", "characteristics")
    scale = float(spec.get("scale", 1.0))
    if kind == "bm":
        psi = bm_exponent(space)
    elif kind == "stable":
        psi = stable_exponent(space, float(spec["alpha"]))
    elif kind == "killed":
        psi = killed_exponent(space, float(spec.get("c", 0.3)))
    elif kind == "compound_jump":
        psi = compound_jump_exponent(space)
    elif kind == "characteristics":
        atoms = spec.get("atoms", [])
        nu = LevyMeasureRadial.atoms([a[0] for a in atoms], [a[1] for a in atoms]) if atoms else None
        psi = exponent_from_characteristics(space, float(spec.get("a", 0.0)), float(spec.get("c", 0.0)), nu, spec.get("name", "gangolli"))
        for w, alpha in spec.get("stable", []):
            psi = psi + GangolliExponent(space, stable_terms=((float(w), float(alpha)),))
    else:
        raise ValueError(f"unknown exponent kind '{kind}'")
    return psi.scaled(scale) if scale != 1.0 else psi


@dataclass
class SymbolSpec:
    d: int = 3
    psi: dict | str | None = None
    u: dict | None = field(default_factory=lambda: {"radius": 1.0, "amplitude": 1.0})
    v: dict | str | None = None
    kappa: float | None = None
    kappa_factor: float = 2.0
    M: int = 6

    @classmethod
    def load(cls, path) -> "SymbolSpec":
        data = json.loads(Path(path).read_text())
        return cls(**data)


def symbol_from_spec(spec: SymbolSpec, space: SpaceModel | None = None, M: int | None = None) -> tuple[GangolliSymbol, float, AuditReport | None]:
    """Build kappa psi + u(r) v(lam); kappa defaults to kappa_factor * kappa_min.

    Returns (symbol, kappa_min, report of the kappa_min search or None).
    """
    sp = space or calibrated_space(spec.d)
    M = M or spec.M
    psi = exponent_from_spec(sp, spec.psi)
    v = exponent_from_spec(sp, spec.v)
    u = SmoothBump(float(spec.u.get("radius", 1.0)), float(spec.u.get("amplitude", 1.0))) if spec.u else None
    if u is not None and u.amplitude == 0:
        u = None
    kmin, krep = minimal_kappa(sp, psi, u, v, M) if u is not None else (0.0, None)
    if spec.kappa is not None:
        kappa = float(spec.kappa)
    else:
        kappa = spec.kappa_factor * kmin if kmin > 0 else 1.0
    if u is None:
        return GangolliSymbol(psi.scaled(kappa), [], M, psi, kappa), kmin, krep
    return example_symbol(sp, psi, kappa, u, v, M), kmin, krep


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def audit_pipeline(spec: SymbolSpec, M: int | None = None, n_basis: int = 256, seed: int = 0) -> AuditReport:
    """Ellipticity, growth fit, envelopes, C_M / gamma_M, smallness, alpha_0, coercivity, smoke solve.

    The first failing stage short-circuits; the rest are listed in
    ``skipped`` with the reason, and ``diagnostics["failure"]`` names it.
    """
    from .semigroup_engine import alpha0_compute, assemble_bilinear_form, coercivity_audit, solve_resolvent

    M = M or spec.M
    sp = calibrated_space(spec.d)
    psi = exponent_from_spec(sp, spec.psi)
    report = AuditReport()
    stages = ["ellipticity", "growth", "envelopes", "constants", "smallness", "alpha0", "coercivity", "resolvent"]

    def fail(stage: str, reason: str) -> AuditReport:
        report.verdicts[stage] = False
        report.diagnostics["failure"] = {"stage": stage, "reason": reason}
        for later in stages[stages.index(stage) + 1 :]:
            report.skipped[later] = f"skipped: stage '{stage}' failed"
        return report

    q, kmin, krep = symbol_from_spec(spec, sp, M)
    report.kappa_min, report.kappa = kmin, q.kappa
    if krep is not None:
        report.diagnostics["kappa_min_phi_norms"] = krep.phi_norms

    try:
        c0, c1, ok = audit_A1(q, psi)
    except (SphcError, ValueError, ArithmeticError) as exc:
        return fail("ellipticity", str(exc))
    report.c0, report.c1 = c0, c1
    report.verdicts["ellipticity"] = bool(ok)
    if not ok:
        return fail("ellipticity", f"c0 = {c0:.3e}, c1 = {c1:.3e}")

    cert = certificate(psi)
    report.c_psi, report.r_exp, report.c_low = cert.c_psi, cert.r_exp, cert.c_low
    report.diagnostics["growth"] = cert.to_dict()
    ok = np.isfinite(cert.c_psi) and cert.c_psi > 0
    report.verdicts["growth"] = bool(ok)
    if not ok:
        return fail("growth", "no finite c_psi")

    if q.terms:
        _, norms, ediag = phi_beta_envelopes(sp, q)
        report.diagnostics["envelopes"] = ediag
    else:
        norms = np.zeros(M + 1)
    report.phi_norms = [float(x) for x in norms]
    ok = bool(np.all(np.isfinite(norms)))
    report.verdicts["envelopes"] = ok
    if not ok:
        return fail("envelopes", "non-finite envelope norm")

    try:
        C_M, gamma, cdiag = constants_CM_gammaM(sp, psi, M, cert.c_psi)
    except ValueError as exc:
        return fail("constants", str(exc))
    report.C_M, report.gamma_M = C_M, gamma
    report.diagnostics["constants"] = cdiag
    report.verdicts["constants"] = bool(np.isfinite(C_M) and np.isfinite(gamma) and gamma > 0)

    lhs, rhs = report.phi_sum, gamma * c0
    report.diagnostics["smallness"] = {"phi_sum": lhs, "gamma_c0": rhs}
    ok = lhs <= rhs
    report.verdicts["smallness"] = bool(ok)
    if not ok:
        return fail("smallness", f"sum ||Phi_beta||_1 = {lhs:.4e} exceeds gamma_M c0 = {rhs:.4e}")

    alpha = alpha0_compute(q.q1, psi, c0)
    report.alpha0 = alpha
    report.verdicts["alpha0"] = bool(np.isfinite(alpha))

    sys = assemble_bilinear_form(sp, q, alpha, n_basis, c0)
    ok, margin, diag = coercivity_audit(sys, 1000, seed)
    report.diagnostics["coercivity"] = {"margin": margin, **diag}
    report.verdicts["coercivity"] = bool(ok)
    if not ok:
        return fail("coercivity", f"Rayleigh margin {margin:.3e} below -1e-6")

    rg = RadialGrid.gauss(20.0, 40, 16)
    f = RadialFunction(rg, np.exp(-(rg.nodes**2)))
    try:
        sol = solve_resolvent(sp, q, alpha + c0, f, n_basis, c0)
    except SphcError as exc:
        return fail("resolvent", str(exc))
    report.diagnostics["resolvent"] = {"residual": sol.residual, "condition": sol.condition}
    ok = sol.residual <= 1e-4
    report.verdicts["resolvent"] = bool(ok)
    if not ok:
        return fail("resolvent", f"residual {sol.residual:.3e} > 1e-4")
    return report


def check_audit_pipeline(cfg: SuiteConfig) -> CheckResult:
    base = dict(d=cfg.d, u={"radius": cfg.bump_radius, "amplitude": cfg.bump_amplitude}, M=cfg.M)
    good = audit_pipeline(SymbolSpec(kappa_factor=2.0, **base), seed=cfg.seed)
    bad = audit_pipeline(SymbolSpec(kappa_factor=0.1, **base), seed=cfg.seed)
    empty = audit_pipeline(SymbolSpec(u=None, d=cfg.d, M=cfg.M), seed=cfg.seed)
    consts = [good.c0, good.c_psi, good.C_M, good.gamma_M, good.alpha0, good.kappa_min, *good.phi_norms]
    finite = all(x is not None and np.isfinite(x) for x in consts)
    bad_stage = bad.diagnostics.get("failure", {}).get("stage")
    ok = finite and good.passed and bad_stage == "smallness" and empty.passed and empty.phi_sum == 0.0
    return CheckResult(
        "audit_pipeline", "pipeline", 17, bool(ok), float(good.kappa_min or np.nan), 0.0,
        {"good": good.to_dict(), "bad_failure": bad.diagnostics.get("failure"), "bad_skipped": bad.skipped, "empty_passed": empty.passed},
    )


# ---------------------------------------------------------------- registry and runner

CHECKS: dict[str, tuple[str, Callable[[SuiteConfig], CheckResult]]] = {
    "roundtrip": ("transform", check_roundtrip),
    "plancherel": ("transform", check_plancherel),
    "functional_equation": ("transform", check_functional_equation),
    "eigenrelation": ("transform", check_eigenrelation),
    "hunt": ("semigroup", check_hunt),
    "subfeller": ("semigroup", check_subfeller),
    "schoenberg": ("symbol", check_schoenberg),
    "negdef": ("symbol", check_negdef),
    "frac_laplacian": ("psdo", check_frac_laplacian),
    "mollifier": ("psdo", check_mollifier),
    "commutator": ("psdo", check_commutator),
    "phi_beta_bound": ("symbol", check_phi_beta_bound),
    "coercivity": ("semigroup", check_coercivity),
    "resolvent": ("semigroup", check_resolvent),
    "direct_gangolli": ("semigroup", check_direct_gangolli),
    "pmp": ("semigroup", check_pmp),
    "audit_pipeline": ("pipeline", check_audit_pipeline),
}


def select_checks(only: list[str] | None) -> list[str]:
    if not only:
        return list(CHECKS)
    out = []
    for key in only:
        if key in CHECKS:
            out.append(key)
        elif key in GROUPS:
            out.extend(n for n, (g, _) in CHECKS.items() if g == key)
        else:
            raise ValueError(f"unknown check or group '{key}'")
    return list(dict.fromkeys(out))


def run_check(name: str, cfg: SuiteConfig) -> CheckResult:
    group, fn = CHECKS[name]
    t0 = time.perf_counter()
    try:
        res = fn(cfg)
    except Exception as exc:  # a crashing check is a failing check
        res = CheckResult(name, group, 0, False, float("nan"), float("nan"), error=f"{type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def _run_check_star(args):
    return run_check(*args)


@dataclass
class RunManifest:
    config: dict
    space: dict
    calibration: dict
    symbol_hash: str | None
    results: list[CheckResult]
    seed: int
    environment: dict
    wall_seconds: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def verdicts(self) -> dict[str, bool]:
        return {r.name: r.passed for r in self.results}

    def table(self) -> str:
        lines = [r.line() for r in self.results]
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} passed in {self.wall_seconds:.1f}s")
        return "\n".join(lines)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default))


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    return str(x)


def run_suite(cfg: SuiteConfig, symbol_file=None) -> RunManifest:
    """Run the selected checks (in a process pool when workers > 1); results keep registry order."""
    names = select_checks(cfg.only)
    t0 = time.perf_counter()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_check_star, [(n, cfg) for n in names]))
    else:
        results = [run_check(n, cfg) for n in names]
    sp = make_space(cfg)
    try:
        kappa = triangle_constant(sp, calibration_family(cfg.rgrid())[0], cfg.sgrid())[0]
    except SphcError:
        kappa = float("nan")
    return RunManifest(
        config=cfg.to_dict(),
        space={"d": sp.dimension, "rho": sp.rho, "jacobian_scale": sp.jacobian_scale},
        calibration={"plancherel_scale": sp.plancherel_scale, "triangle_kappa": kappa},
        symbol_hash=file_hash(symbol_file) if symbol_file else None,
        results=results,
        seed=cfg.seed,
        environment={"python": platform.python_version(), "numpy": np.__version__},
        wall_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------- plot data

PLOT_KINDS = ("psi", "heat", "solution", "residual")


def export_plots(kind: str, path, d: int = 3) -> Path:
    """Columnar CSV for external plotting; nothing is rendered here."""
    from .semigroup_engine import heat_kernel, solve_resolvent

    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind '{kind}'; choose from {', '.join(PLOT_KINDS)}")
    sp = calibrated_space(d)
    if kind == "psi":
        lam = np.linspace(0.0, 20.0, 201)
        lib = library_exponents(sp)
        header = ["lambda", *lib]
        cols = [lam, *(psi(lam) for psi in lib.values())]
    elif kind == "heat":
        rg = RadialGrid.gauss(20.0, 40, 16)
        ts = (0.1, 0.5, 1.0)
        header = ["r", *(f"h_t={t:g}" for t in ts)]
        cols = [rg.nodes, *(heat_kernel(sp, t, rg).density.values for t in ts)]
    else:
        psi = bm_exponent(sp)
        q = example_symbol(sp, psi, 10.0)
        c0 = audit_A1(q)[0]
        rg = RadialGrid.gauss(20.0, 40, 16)
        f = RadialFunction(rg, np.exp(-(rg.nodes**2)))
        if kind == "solution":
            sol = solve_resolvent(sp, q, c0, f, 256, c0)
            header, cols = ["r", "u", "f"], [rg.nodes, sol.u.values, f.values]
        else:
            ns = np.array([64, 128, 256, 512])
            res = [solve_resolvent(sp, q, c0, f, int(n), c0).residual for n in ns]
            header, cols = ["n_basis", "residual"], [ns, np.array(res)]
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
    return path
