import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import hyp2f1

from sphcalc.errors import InvalidDimensionError, ResolutionError
from sphcalc.space_model import (
    RadialFunction,
    RadialGrid,
    SpectralGrid,
    composite_distance,
    k_average,
    make_space,
    parse_space,
    plancherel_density,
    radial_laplacian,
    read_csv,
    sphere_average_rule,
    spherical_function,
    spherical_function_hc,
    spherical_function_ode,
    write_csv,
)


def test_make_space_geometry():
    sp = make_space(5)
    assert sp.rho == 2.0 and sp.nilpotent_halfdim == 2.0
    assert np.isclose(sp.jacobian(1.0), np.sinh(1.0) ** 4)
    with pytest.raises(InvalidDimensionError):
        make_space(1)
    with pytest.raises(InvalidDimensionError):
        make_space(2.5)


def test_parse_space():
    assert parse_space("H3").dimension == 3
    assert parse_space("hd:6").dimension == 6
    with pytest.raises(InvalidDimensionError):
        parse_space("s2")


def test_grid_validation():
    with pytest.raises(ResolutionError):
        RadialGrid.gauss(-1.0)
    with pytest.raises(ResolutionError):
        RadialGrid.uniform(1.0, 1)
    g = SpectralGrid.gauss(10.0, 4, 16)
    assert g.nodes[0] == 0.0 and g.weights[0] == 0.0 and g.n_points == 65


# ---------------------------------------------------------------- spherical functions, three routes


@pytest.mark.parametrize("lam", [0.0, 0.5, 3.0, 12.0])
def test_h3_closed_form_against_harish_chandra_integral(lam):
    sp = make_space(3)
    for r in (0.3, 2.0, 6.0):
        assert abs(spherical_function(sp, lam, r) - spherical_function_hc(sp, lam, r)) < 1e-10


def test_h3_closed_form_value():
    sp = make_space(3)
    r, lam = 1.2, 2.0
    assert abs(spherical_function(sp, lam, r) - np.sin(lam * r) / (lam * np.sinh(r))) < 1e-15


@pytest.mark.parametrize("r", [0.2, 1.0, 3.0, 8.0])
def test_h2_mehler_at_zero_spectral_parameter_matches_hypergeometric(r):
    # phi_0 = P_{-1/2}(cosh r) = 2F1(1/2, 1/2; 1; (1 - cosh r)/2)
    sp = make_space(2)
    ref = hyp2f1(0.5, 0.5, 1.0, (1 - np.cosh(r)) / 2)
    assert abs(spherical_function(sp, 0.0, r) - ref) < 1e-11


def test_h2_mehler_ode_and_integral_agree():
    sp = make_space(2)
    lams = np.array([0.0, 1.0, 7.5, 25.0])
    rs = np.array([0.1, 1.5, 4.0, 12.0])
    mehler = spherical_function(sp, lams[:, None], rs[None, :])
    ode, _ = spherical_function_ode(sp, lams, rs)
    assert np.max(np.abs(mehler - ode)) < 1e-9
    for i in (0, 1):
        for j in (1, 2):
            assert abs(mehler[i, j] - spherical_function_hc(sp, lams[i], rs[j])) < 1e-9


def test_general_dimension_ode_against_integral():
    sp = make_space(5)
    ode, dode = spherical_function_ode(sp, np.array([0.0, 2.0]), np.array([0.0, 0.5, 3.0]))
    assert np.allclose(ode[:, 0], 1.0) and np.allclose(dode[:, 0], 0.0)
    for i, lam in enumerate((0.0, 2.0)):
        for j, r in enumerate((0.5, 3.0)):
            assert abs(ode[i, j + 1] - spherical_function_hc(sp, lam, r)) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.0, 15.0))
def test_spherical_function_bounded_by_phi0(lam, r):
    sp = make_space(3)
    assert abs(spherical_function(sp, lam, r)) <= spherical_function(sp, 0.0, r) + 1e-12


def test_plancherel_density_shapes(h2, h3):
    lam = np.array([0.5, 1.0, 4.0, 9.0])
    d3 = plancherel_density(h3, lam) / lam**2
    assert np.allclose(d3, d3[0], rtol=1e-12)
    d2 = plancherel_density(h2, lam) / (lam * np.tanh(np.pi * lam))
    assert np.allclose(d2, d2[0], rtol=1e-12)


# ---------------------------------------------------------------- geometry


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 8), st.floats(0, 8), st.floats(0, np.pi))
def test_composite_distance_bounds_and_symmetry(r, s, theta):
    D = composite_distance(r, s, theta)
    assert abs(r - s) - 1e-9 <= D <= r + s + 1e-9
    assert abs(D - composite_distance(s, r, theta)) < 1e-9


def test_composite_distance_extremes_and_cosine_law():
    assert np.isclose(composite_distance(1.0, 2.0, 0.0), 3.0)
    assert np.isclose(composite_distance(1.0, 2.5, np.pi), 1.5)
    r, s, t = 0.7, 1.9, 1.1
    lhs = np.cosh(composite_distance(r, s, t))
    assert np.isclose(lhs, np.cosh(r) * np.cosh(s) + np.sinh(r) * np.sinh(s) * np.cos(t))


@pytest.mark.parametrize("d,second_moment", [(2, 0.5), (3, 1 / 3), (4, 0.25)])
def test_sphere_average_rule_moments(d, second_moment):
    theta, w = sphere_average_rule(d, 64)
    assert abs(w.sum() - 1) < 1e-14
    assert abs(np.sum(w * np.cos(theta))) < 1e-13
    assert abs(np.sum(w * np.cos(theta) ** 2) - second_moment) < 1e-12


def test_k_average_of_spherical_function_is_product(space):
    # functional equation at a few points with a generous angular rule
    fn = lambda x: spherical_function(space, 3.0, x)  # noqa: E731
    got = k_average(space, fn, np.array([0.5, 2.0]), np.array([1.0, 2.0]), 256)
    assert np.allclose(got, fn(np.array([0.5, 2.0])) * fn(np.array([1.0, 2.0])), atol=1e-12)


def test_radial_laplacian_second_order():
    sp = make_space(3)
    errs = []
    for n in (401, 801):
        g = RadialGrid.uniform(6.0, n)
        r = g.nodes
        f = RadialFunction(g, np.exp(-(r**2)))
        exact = np.exp(-(r**2)) * (4 * r**2 - 2) - 4 * r * np.exp(-(r**2)) / np.where(r > 0, np.tanh(np.maximum(r, 1e-300)), 1.0)
        exact[0] = -6.0
        errs.append(np.max(np.abs(radial_laplacian(sp, f).values - exact)[:-1]))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_csv_roundtrip_is_bit_exact(tmp_path):
    x = np.linspace(0, 1, 7)
    v = np.exp(x) / 3
    write_csv(tmp_path / "a.csv", x, v)
    x2, v2 = read_csv(tmp_path / "a.csv")
    assert np.array_equal(x, x2) and np.array_equal(v, v2)
    write_csv(tmp_path / "c.csv", x, v + 1j * x)
    _, vc = read_csv(tmp_path / "c.csv")
    assert np.array_equal(vc, v + 1j * x)


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(p)
