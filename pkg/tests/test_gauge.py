import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonomy_lab.errors import CapabilityError, PreconditionError
from holonomy_lab.gauge import (CurvatureField, Field, GaugeConnection, MatrixPolynomial,
                                abelian_constant_curvature, check_partials, covariant_derivative,
                                covariant_derivative_along, curvature_at, exponential_gauge,
                                gauge_transform, random_gauge, random_polynomial_connection,
                                su2_example, zero_connection)
from holonomy_lab.jets import variables
from holonomy_lab.liegroup import mat_exp, so3, su2

seeds = st.integers(0, 10_000)


def comm(A, B):
    return A @ B - B @ A


def finite_difference_curvature(c, z, h=1e-5):
    # Omega_ij = d_i w_j - d_j w_i + [w_i, w_j] with central differences
    n = c.dim
    W = c.omega(z)
    D = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        D.append((c.omega(z + e) - c.omega(z - e)) / (2 * h))
    return np.array([[D[i][j] - D[j][i] + comm(W[i], W[j]) for j in range(n)] for i in range(n)])


def test_su2_example_curvature_closed_form():
    X = su2().basis
    c = su2_example()
    z = np.array([0.7, -0.3])
    Om = curvature_at(c, z)
    expect = X[1] + 0.7 * comm(X[0], X[1])
    assert np.allclose(Om[0, 1], expect, atol=1e-15)
    assert np.allclose(Om[1, 0], -expect, atol=1e-15)
    assert np.allclose(Om[0, 0], 0)


def test_abelian_curvature_is_constant():
    A0 = np.array([[2.5j]])
    c = abelian_constant_curvature(A0)
    pts = np.random.default_rng(0).normal(size=(20, 2))
    Om = curvature_at(c, pts)
    assert np.allclose(Om[:, 0, 1], A0, atol=1e-15)


def test_zero_connection_is_flat():
    c = zero_connection(3, q=2)
    assert np.all(curvature_at(c, np.ones(3)) == 0)


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_curvature_matches_finite_differences(seed):
    c = random_polynomial_connection(3, su2(), seed)
    z = np.random.default_rng(seed).uniform(-0.5, 0.5, 3)
    assert np.max(np.abs(curvature_at(c, z) - finite_difference_curvature(c, z))) < 1e-8


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_bianchi_identity(seed):
    c = random_polynomial_connection(3, so3(), seed, degree=2)
    pts = np.random.default_rng(seed).normal(size=(5, 3))
    assert CurvatureField(c).bianchi_residual(pts) < 1e-11


def test_coefficients_stay_in_algebra():
    g = su2()
    c = random_polynomial_connection(2, g, 1)
    W = c.omega(np.random.default_rng(1).normal(size=(10, 2)))
    assert np.max(g.membership_residual(W)) < 1e-14
    Om = curvature_at(c, np.array([0.3, 0.2]))
    assert g.membership_residual(Om[0, 1]) < 1e-14


def test_flat_at_basepoint_preset():
    c = random_polynomial_connection(2, su2(), 4, flat_at_basepoint=True)
    assert np.max(np.abs(curvature_at(c, np.zeros(2)))) < 1e-15
    grad = CurvatureField(c).component(0, 1).gradient(np.zeros(2))
    assert np.max(np.abs(grad)) > 0.1


def test_covariant_derivative_oracle():
    c = su2_example()
    X = su2().basis
    f = Field(lambda z: MatrixPolynomial({(0, 1): X[2]}, np.zeros(2)).on(z), 2)
    z = np.array([0.4, -1.2])
    # d_2 f = X3, [w_2, f] = z1 z2 [X2, X3]
    expect = X[2] + 0.4 * -1.2 * comm(X[1], X[2])
    assert np.allclose(covariant_derivative(c, f, 1)(z), expect, atol=1e-15)
    along = covariant_derivative_along(c, f, lambda zz: [zz[0] * 0.0, zz[0] * 0.0 + 1.0])
    assert np.allclose(along(z), expect, atol=1e-15)


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_gauge_transform_conjugates_curvature(seed):
    g = su2()
    c = random_polynomial_connection(2, g, seed)
    P = MatrixPolynomial({(1, 0): g.element([0.3, 0.1, -0.2]), (1, 1): g.element([0, 0.5, 0])},
                         np.zeros(2))
    ct = gauge_transform(c, exponential_gauge(P))
    z = np.random.default_rng(seed).uniform(-0.5, 0.5, 2)
    a = mat_exp(P(z))
    expect = np.linalg.inv(a) @ curvature_at(c, z) @ a
    assert np.max(np.abs(curvature_at(ct, z) - expect)) < 1e-13


def test_gauge_transform_formula():
    g = su2()
    c = su2_example()
    P = MatrixPolynomial({(1, 0): g.basis[2]}, np.zeros(2))
    ct = gauge_transform(c, exponential_gauge(P))
    z = np.array([0.6, 0.1])
    a = mat_exp(0.6 * g.basis[2])
    ainv = np.linalg.inv(a)
    W = c.omega(z)
    # a^{-1} da = X3 dz_1 since P depends on z_1 only
    expect = [ainv @ W[0] @ a + g.basis[2], ainv @ W[1] @ a]
    assert np.allclose(ct.omega(z), np.array(expect), atol=1e-14)


def test_gauge_must_fix_basepoint():
    g = su2()
    c = random_polynomial_connection(2, g, 0)
    P = MatrixPolynomial({(0, 0): g.basis[0]}, np.zeros(2))
    with pytest.raises(PreconditionError):
        gauge_transform(c, exponential_gauge(P))


def test_random_gauge_is_identity_at_basepoint():
    fn = random_gauge(3, su2(), 5)
    a, ainv = fn(variables(np.zeros(3), 0))
    assert np.allclose(a.value, np.eye(2))
    b, binv = fn(variables(np.array([0.2, 0.1, -0.3]), 0))
    assert np.allclose(b.value @ binv.value, np.eye(2), atol=1e-14)


def test_from_callables_first_order_only():
    poly = su2_example()
    c = GaugeConnection.from_callables(poly.omega, dim=2, q=2)
    z = np.array([0.3, 0.5])
    assert np.allclose(curvature_at(c, z), curvature_at(poly, z), atol=1e-9)
    with pytest.raises(CapabilityError):
        c.jets(z, 2)
    with pytest.raises(PreconditionError):
        GaugeConnection.from_callables(poly.omega)


def test_analytic_partials_match_differences():
    c = random_polynomial_connection(3, su2(), 9)
    assert check_partials(c, np.random.default_rng(2).normal(size=(4, 3))) < 1e-8


def test_matrix_polynomial_derivative():
    C = np.array([[1.0, 2.0], [3.0, 4.0]])
    p = MatrixPolynomial({(2, 1): C}, np.array([1.0, 0.0]))
    z = np.array([1.5, 2.0])
    assert np.allclose(p(z), 0.25 * 2.0 * C)
    assert np.allclose(p.deriv(0)(z), 2 * 0.5 * 2.0 * C)
