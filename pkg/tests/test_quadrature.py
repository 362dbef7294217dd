import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from sphcalc.quadrature import composite_gauss, gauss_legendre, panel_interpolate


def test_gauss_legendre_integrates_polynomials_exactly():
    x, w = gauss_legendre(8)
    for k in range(16):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(np.sum(w * x**k) - exact) < 1e-14


def test_composite_gauss_total_weight():
    x, w = composite_gauss(0.0, 7.5, 5, 16)
    assert x.size == 80
    assert abs(w.sum() - 7.5) < 1e-13
    assert np.all(np.diff(x) > 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=10), st.floats(0.0, 6.0))
def test_panel_interpolation_reproduces_low_degree_polynomials(coefs, x0):
    x, _ = composite_gauss(0.0, 6.0, 3, 16)
    poly = np.polynomial.Polynomial(coefs)
    got = panel_interpolate(poly(x), 0.0, 6.0, 3, 16, np.array([x0]))
    assert abs(got[0] - poly(x0)) <= 1e-10 * max(1.0, np.max(np.abs(poly(x))))


def test_panel_interpolation_hits_nodes_exactly():
    x, _ = composite_gauss(0.0, 1.0, 2, 16)
    v = np.sin(3 * x)
    assert np.array_equal(panel_interpolate(v, 0.0, 1.0, 2, 16, x), v)


def test_panel_interpolation_fill_outside():
    x, _ = composite_gauss(0.0, 1.0, 2, 16)
    out = panel_interpolate(np.ones_like(x), 0.0, 1.0, 2, 16, np.array([1.5, 40.0]), fill=0.0)
    assert np.all(out == 0.0)
