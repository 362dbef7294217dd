import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from sphcalc import jets


def test_exp_of_variable_gives_taylor_coefficients():
    x0 = 0.7
    j = jets.exp(jets.variable(x0, 10))
    expected = np.exp(x0) / np.array([math.factorial(k) for k in range(11)])
    assert np.allclose(j, expected, rtol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 4.0))
def test_reciprocal_times_self_is_one(x0):
    a = jets.sinh_cosh(np.array(x0), 8)[1]
    prod = jets.mul(a, jets.reciprocal(a))
    assert abs(prod[0] - 1) < 1e-13
    assert np.max(np.abs(prod[1:])) < 1e-10


def test_coth_jet_against_series_of_known_derivative():
    x0 = 1.3
    c = jets.coth(np.array(x0), 3)
    # d/dx coth = -csch^2, d2/dx2 coth = 2 coth csch^2
    csch2 = 1 / np.sinh(x0) ** 2
    assert abs(c[0] - 1 / np.tanh(x0)) < 1e-14
    assert abs(c[1] + csch2) < 1e-13
    assert abs(c[2] - (2 / np.tanh(x0) * csch2) / 2) < 1e-12


def test_ode_solution_reproduces_cosine():
    # y'' = -k y with y(x0) = cos(w x0), y'(x0) = -w sin(w x0)
    w, x0 = 2.5, 0.4
    damping = np.zeros(12)
    y = jets.ode_solution(np.cos(w * x0), -w * np.sin(w * x0), damping, w**2)
    h = 0.05
    approx = np.polyval(y[::-1], h)
    assert abs(approx - np.cos(w * (x0 + h))) < 1e-14


def test_radial_laplacian_jet_of_exponential():
    # f = e^{r}, d = 3: f'' + 2 coth(r) f' = e^r (1 + 2 coth r)
    r0 = 0.9
    f = jets.exp(jets.variable(r0, 6))
    lap = jets.radial_laplacian(f, 2 * jets.coth(np.array(r0), 6))
    assert abs(lap[0] - np.exp(r0) * (1 + 2 / np.tanh(r0))) < 1e-12
