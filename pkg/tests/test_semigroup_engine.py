import numpy as np
import pytest

from sphcalc.errors import ConditioningError, NumericalError
from sphcalc.space_model import RadialFunction, RadialGrid
from sphcalc.semigroup_engine import (
    RadialMeasure,
    alpha0_compute,
    assemble_bilinear_form,
    coercivity_audit,
    convolve_measures,
    default_unit_family,
    direct_families,
    direct_test_functions,
    direct_vs_psdo,
    evolve,
    heat_kernel,
    hunt_convolution,
    pmp_probe,
    ring_family,
    solve_resolvent,
    subfeller_audit,
)
from sphcalc.spherical_transform import default_rgrid, default_sgrid, forward, relative_l2
from sphcalc.symbol_lab import (
    GangolliSymbol,
    bm_exponent,
    custom_exponent,
    example_symbol,
    killed_exponent,
    library_exponents,
)


def test_heat_kernel_h3_closed_form(h3):
    rg = default_rgrid()
    r = rg.nodes
    for t in (0.2, 1.0):
        h = heat_kernel(h3, t).density.values
        sr = np.where(r > 0, r / np.sinh(np.maximum(r, 1e-300)), 1.0)
        exact = 4 * np.pi * (4 * np.pi * t) ** -1.5 * sr * np.exp(-t - r**2 / (4 * t))
        assert np.max(np.abs(h - exact)) < 1e-10 * np.max(exact)


def test_heat_kernel_mass_and_sign(space):
    for t in (0.05, 0.5):
        mu = heat_kernel(space, t)
        assert np.min(mu.density.values) >= 0.0
        assert 1 - 1e-6 < mu.mass(space) <= 1 + 1e-6
    # for large t the clipped round-off tail carries some mass, which is lost, never gained
    assert 1 - 1e-4 < heat_kernel(space, 2.0).mass(space) <= 1.0
    with pytest.raises(ValueError):
        heat_kernel(space, 0.0)


def test_heat_semigroup_property(space):
    a, b = heat_kernel(space, 0.3), heat_kernel(space, 0.5)
    ab = convolve_measures(space, a, b)
    ref = heat_kernel(space, 0.8)
    r = ref.density.grid.nodes
    keep = r < 10
    assert np.max(np.abs(ab.density.values - ref.density.values)[keep]) < 1e-9 * np.max(ref.density.values)


def test_dirac_is_identity(h2):
    mu = heat_kernel(h2, 0.4)
    conv = convolve_measures(h2, mu, RadialMeasure.dirac(mu.density.grid))
    assert conv.atom0 == 0.0
    assert np.allclose(conv.density.values, mu.density.values, atol=1e-12)
    assert RadialMeasure.dirac().mass(h2) == 1.0


def test_hunt_convolution_matches_semigroup(space):
    # direct quadrature over shells versus the spectral semigroup
    f = RadialFunction(default_rgrid(), np.exp(-(default_rgrid().nodes ** 2)))
    t = 0.3
    hunt = hunt_convolution(space, f, heat_kernel(space, t))
    spec = evolve(space, bm_exponent(space), f, t)
    assert relative_l2(space, hunt, spec) < 1e-4


def test_evolve_properties(h3):
    f = default_unit_family()[0]
    psi = bm_exponent(h3)
    assert np.array_equal(evolve(h3, psi, f, 0.0).values, f.values)
    a = evolve(h3, psi, evolve(h3, psi, f, 0.2, allow_truncation=True), 0.3, allow_truncation=True)
    b = evolve(h3, psi, f, 0.5, allow_truncation=True)
    assert np.max(np.abs(a.values - b.values)) < 1e-10
    with pytest.raises(ValueError):
        evolve(h3, psi, f, -1.0)
    with pytest.raises(NumericalError):
        evolve(h3, custom_exponent(h3, lambda lam: -(lam**2)), f, 1.0, allow_truncation=True)


def test_killed_semigroup_decays(h3):
    f = default_unit_family()[0]
    g = evolve(h3, killed_exponent(h3, 0.3), f, 2.0, allow_truncation=True)
    assert np.allclose(g.values, np.exp(-0.6) * f.values, atol=1e-10)


def test_subfeller_library_and_counterexample(space):
    for psi in library_exponents(space).values():
        assert subfeller_audit(space, psi).passed, psi.name
    bad = custom_exponent(space, lambda lam: lam**4 - lam**2, "bad")
    v = subfeller_audit(space, bad)
    assert not v.passed and v.worst < -1e-3


def test_subfeller_rejects_variable_coefficients(h3):
    with pytest.raises(NotImplementedError):
        subfeller_audit(h3, example_symbol(h3))
    with pytest.raises(ValueError):
        subfeller_audit(h3, bm_exponent(h3), [RadialFunction(default_rgrid(), 2 * np.ones(default_rgrid().n_points))])


def test_unit_and_ring_families():
    for f in default_unit_family():
        assert 0 <= np.min(f.values) and np.max(f.values) <= 1
    rings = ring_family()
    assert len(rings) == 20
    assert all(np.argmax(f.values) > 0 for f in rings)


def test_pmp_holds_for_symbol_and_fails_when_flipped(space):
    q = example_symbol(space, kappa=2.0)
    assert pmp_probe(space, q).passed
    from sphcalc.psdo_calculus import apply_psdo

    flipped = lambda f: apply_psdo(space, q, f, allow_truncation=True)  # noqa: E731
    assert not pmp_probe(space, flipped).passed


def test_alpha0(h3):
    psi = bm_exponent(h3)
    assert alpha0_compute(psi.scaled(2.0), psi, 1.0) == 0.0
    # 0.5 psi >= c0 (1 + psi) - alpha0 needs alpha0 = c0 at worst when c0 = 0.5
    assert alpha0_compute(psi.scaled(0.5), psi, 0.5) == pytest.approx(0.5)


def test_galerkin_is_diagonal_for_constant_symbols(h3):
    sys = assemble_bilinear_form(h3, GangolliSymbol(bm_exponent(h3)), 1.0, 64)
    assert sys.n == 64
    assert np.allclose(sys.B_matrix, np.diag(np.diag(sys.B_matrix)))
    assert np.allclose(np.diag(sys.B_matrix), 2 + sys.lam**2)


def test_coercivity(space):
    q = example_symbol(space, kappa=4.0, u=None)
    sys = assemble_bilinear_form(space, q, 0.0, 128)
    ok, margin, diag = coercivity_audit(sys, n_random=200)
    assert ok and diag["generalized_eig_min"] <= diag["rayleigh_min"] + 1e-12
    # u(r) v(D) is not symmetric, but K[i, j] / v_j is: it is the u-weighted Gram matrix
    K = sys.B_matrix - np.diag(q.q1(sys.lam))
    G = K / q.terms[0].v(sys.lam)[None, :]
    assert np.allclose(G, G.T, atol=1e-12 * np.max(np.abs(G)))


def test_resolvent_converges(h3):
    q = example_symbol(h3, kappa=4.0)
    f = RadialFunction(default_rgrid(), np.exp(-(default_rgrid().nodes ** 2)))
    res = [solve_resolvent(h3, q, 1.0, f, n).residual for n in (64, 128, 256)]
    assert res[0] > res[1] > res[2] and res[2] < 1e-5


def test_resolvent_constant_symbol_closed_form(h3):
    psi = bm_exponent(h3)
    f = RadialFunction(default_rgrid(), np.exp(-(default_rgrid().nodes ** 2)))
    sol = solve_resolvent(h3, GangolliSymbol(psi), 1.0, f, 128)
    fhat = forward(h3, f, sol.system.grid, allow_truncation=True).values
    lam = sol.system.lam
    assert np.allclose(sol.uhat.values[1:], fhat[1:] / (psi(lam) + 1.0), rtol=1e-13)


def test_resolvent_conditioning_guard(h3):
    f = RadialFunction(default_rgrid(), np.exp(-(default_rgrid().nodes ** 2)))
    with pytest.raises(ConditioningError):
        solve_resolvent(h3, example_symbol(h3), 1.0, f, 64, max_condition=10.0)


def test_direct_operator_agrees_with_psdo(space):
    fns = direct_test_functions(4)
    for name, q, ch in direct_families(space):
        for fn in fns:
            assert direct_vs_psdo(space, q, ch, fn) < 1e-3, name


def test_direct_needs_uniform_grid(h3):
    from sphcalc.semigroup_engine import gangolli_apply_direct

    name, q, ch = direct_families(h3)[0]
    with pytest.raises(ValueError):
        gangolli_apply_direct(h3, ch, RadialFunction(RadialGrid.gauss(5.0, 4, 16), np.zeros(65)))
