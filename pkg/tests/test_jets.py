from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from holonomy_lab.errors import CapabilityError
from holonomy_lab.jets import Jet, monomials, raise_order, variables

point = st.tuples(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))


def test_monomial_count_and_grading():
    for n, k in ((2, 3), (3, 4), (4, 2)):
        mons = monomials(n, k)
        assert len(mons) == comb(n + k, k)
        degrees = [sum(e) for e in mons]
        assert degrees == sorted(degrees)
    assert monomials(3, 2)[:4] == monomials(3, 1)


@given(point)
def test_product_rule_oracle(p):
    # f = sin(x) y^2: f_x = cos(x) y^2, f_xy = 2 cos(x) y, f_yy = 2 sin(x), f_xxy = -2 sin(x) y
    x, y = variables(np.array(p), 3)
    f = x.sin() * y * y
    a, b = p
    assert f.value == pytest.approx(np.sin(a) * b * b, abs=1e-14)
    assert f.partial((1, 0)) == pytest.approx(np.cos(a) * b * b, abs=1e-14)
    assert f.partial((1, 1)) == pytest.approx(2 * np.cos(a) * b, abs=1e-14)
    assert f.partial((0, 2)) == pytest.approx(2 * np.sin(a), abs=1e-14)
    assert f.partial((2, 1)) == pytest.approx(-2 * np.sin(a) * b, abs=1e-14)
    assert f.partial((0, 3)) == pytest.approx(0.0, abs=1e-14)


@given(point)
def test_quotient_and_sqrt_oracle(p):
    # h = 1 / sqrt(1 + x^2 + y^2): h_x = -x h^3, h_xx = (3 x^2 - r) h^5 with r = 1 + x^2 + y^2
    x, y = variables(np.array(p), 2)
    h = (1.0 + x * x + y * y).sqrt().reciprocal()
    a, b = p
    r = 1 + a * a + b * b
    h0 = r ** -0.5
    assert h.value == pytest.approx(h0, rel=1e-14)
    assert h.partial((1, 0)) == pytest.approx(-a * h0 ** 3, abs=1e-14)
    assert h.partial((2, 0)) == pytest.approx((3 * a * a - r) * h0 ** 5, abs=1e-13)
    assert h.partial((1, 1)) == pytest.approx(3 * a * b * h0 ** 5, abs=1e-13)


def test_division_matches_reciprocal():
    x, y = variables(np.array([0.3, -0.2]), 4)
    f = (x + 2.0) / (y.cos() + 1.0)
    g = (x + 2.0) * (y.cos() + 1.0).reciprocal()
    assert np.allclose(f.coeffs, g.coeffs, atol=1e-15)


def test_deriv_commutes_with_partials():
    x, y = variables(np.array([0.1, 0.7]), 4)
    f = x.cos() * y.sin() + x * x * y
    fx = f.deriv(0)
    assert fx.order == 3
    for e in ((0, 0), (1, 0), (1, 2), (0, 3)):
        assert fx.partial(e) == pytest.approx(f.partial((e[0] + 1, e[1])), abs=1e-13)


def test_matrix_expm_jet_matches_finite_differences():
    A = np.array([[0.0, 1.0], [-2.0, 0.3]])
    B = np.array([[0.5, 0.0], [1.0, -0.5]])
    (t,) = variables(np.array([0.2]), 2)
    M = (Jet.constant(A, 1, 2) * t + Jet.constant(B, 1, 2) * (t * t)).expm()
    f = lambda s: expm(A * s + B * s * s)
    h = 1e-4
    assert np.allclose(M.value, f(0.2), atol=1e-14)
    assert np.allclose(M.partial((1,)), (f(0.2 + h) - f(0.2 - h)) / (2 * h), atol=1e-7)
    assert np.allclose(M.partial((2,)), (f(0.2 + h) - 2 * f(0.2) + f(0.2 - h)) / h ** 2,
                       atol=1e-5)


def test_bracket_and_matmul():
    x, y = variables(np.array([0.0, 0.0]), 2)
    X = Jet.constant(np.array([[0, 1], [0, 0]]), 2, 2)
    Y = Jet.constant(np.array([[0, 0], [1, 0]]), 2, 2)
    P = X * x
    Q = Y * y
    C = P.bracket(Q)
    assert np.allclose(C.coefficient((1, 1)), np.diag([1.0, -1.0]))
    assert np.allclose((P @ Q).coefficient((1, 1)), np.diag([1.0, 0.0]))


def test_evaluate_reproduces_polynomial():
    x, y = variables(np.array([1.0, -1.0]), 3)
    f = x * x * y - 3.0 * y + 2.0
    h = np.array([[0.2, 0.1], [-0.3, 0.5]])
    pts = h + np.array([1.0, -1.0])
    exact = pts[:, 0] ** 2 * pts[:, 1] - 3 * pts[:, 1] + 2
    assert np.allclose(f.evaluate(h), exact, atol=1e-14)


def test_batched_centres():
    c = np.array([[0.1, 0.2], [0.3, -0.4], [1.0, 0.0]])
    x, y = variables(c, 1)
    f = x * y
    assert f.batch_shape == (3,)
    assert np.allclose(f.value, c[:, 0] * c[:, 1])
    assert np.allclose(f.partial((1, 0)), c[:, 1])


def test_truncation_and_capability_errors():
    x, _ = variables(np.zeros(2), 2)
    assert x.truncate(1).order == 1
    with pytest.raises(CapabilityError):
        x.truncate(3)
    with pytest.raises(CapabilityError):
        x.truncate(0).deriv(0)


def test_raise_order_keeps_centre():
    z = variables(np.array([0.5, 0.25]), 1)
    zz = raise_order(z, 2)
    assert zz[0].order == 3
    assert zz[1].value == 0.25


def test_mixed_order_arithmetic_truncates_to_lower():
    x2, _ = variables(np.zeros(2), 2)
    x4, _ = variables(np.zeros(2), 4)
    assert (x2 * x4).order == 2
