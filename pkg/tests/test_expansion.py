import json
import math
from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonomy_lab.errors import CapabilityError, PreconditionError
from holonomy_lab.expansion import (ExpansionFunctional, MultiIndex, covariant_taylor,
                                    euclidean_F3, heisenberg_q_functional, homogeneous_component,
                                    model_F5, multi_indices, selector_modify, selector_residual,
                                    taylor_coefficient, taylor_functional, weighted_taylor)
from holonomy_lab.gauge import (GaugeConnection, abelian_constant_curvature, gauge_transform,
                                random_gauge, random_polynomial_connection, su2_example,
                                zero_connection)
from holonomy_lab.holonomy import holonomy
from holonomy_lab.jets import Jet
from holonomy_lab.liegroup import norm, su2, u1
from holonomy_lab.loops import (DilationStructure, TrigLoop, circle, dilate_loop, figure_eight,
                                polygon)
from holonomy_lab.models import horizontal_lift, make_euclidean, make_heisenberg, make_hopf

E2 = DilationStructure.euclidean(2)
H = DilationStructure((1, 1, 2))
seeds = st.integers(0, 10_000)


def max_diff(a, b):
    keys = set(a) | set(b)
    zero = 0 * next(iter(a.values()))
    return max(float(np.max(np.abs(a.get(k, zero) - b.get(k, zero)))) for k in keys)


# ---------------------------------------------------------------------------
# multi-indices and coefficients

def test_multi_index_properties():
    mu = MultiIndex((0, 2, 2))
    assert mu.j == 3 and mu.size == 7 and mu.w((1, 1, 2)) == 5
    assert mu.exponent(3) == (1, 0, 2)


def test_multi_indices_enumeration():
    assert multi_indices((1, 1), 2) == [(), (0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)]
    assert len(multi_indices((1, 1, 2), 2)) == 8
    assert len(multi_indices((1, 1), 3)) == 1 + 2 + 4 + 8


def test_taylor_coefficient_values():
    assert taylor_coefficient((0, 1, 1), (1, 1)) == Fraction(1, 6)
    # weights (1, 1, 2): mu = (1, 3) gives 1*2 / (1*3), mu = (3, 1) gives 2*1 / (2*3)
    assert taylor_coefficient((0, 2), (1, 1, 2)) == Fraction(2, 3)
    assert taylor_coefficient((2, 0), (1, 1, 2)) == Fraction(1, 3)
    assert taylor_coefficient((2, 0), (1, 1, 2), "symmetric") == Fraction(1, 2)
    assert taylor_coefficient((), (1, 1)) == 1
    with pytest.raises(PreconditionError):
        taylor_coefficient((0,), (1,), "other")


@given(st.lists(st.integers(0, 2), min_size=1, max_size=4, unique=True))
def test_ray_coefficients_of_distinct_indices_sum_to_one(mu):
    # for commuting derivatives the orderings of a squarefree monomial add up to 1
    w = (1, 1, 2)
    assert sum(taylor_coefficient(p, w) for p in permutations(mu)) == 1


@given(st.lists(st.integers(0, 1), min_size=1, max_size=5))
def test_unit_weight_orderings_sum_to_inverse_multinomial(mu):
    e = MultiIndex(tuple(mu)).exponent(2)
    total = sum(taylor_coefficient(p, (1, 1)) for p in set(permutations(mu)))
    assert total == Fraction(1, math.factorial(e[0]) * math.factorial(e[1]))


# ---------------------------------------------------------------------------
# homogeneous components

def poly_f(z):
    x, y, t = z
    return x + y * y + t + x * t + 3.0 * t * t


def test_weighted_taylor_components():
    comps = {m: {e: c for e, c in p.items() if c != 0}
             for m, p in weighted_taylor(poly_f, H, 4).items()}
    assert comps[1] == {(1, 0, 0): 1.0}
    assert comps[2] == {(0, 2, 0): 1.0, (0, 0, 1): 1.0}
    assert comps[3] == {(1, 0, 1): 1.0}
    assert comps[4] == {(0, 0, 2): 3.0}


def test_homogeneous_component_dilation_scaling():
    p = homogeneous_component(poly_f, H, 2)
    z = np.array([0.3, -0.5, 0.7])
    s = 0.4
    assert p(H.dilate(z, s)) == pytest.approx(s ** 2 * p(z))
    assert p(z) == pytest.approx(0.25 + 0.7)
    # a dz_3 factor takes weight 2 from the coefficient
    q = homogeneous_component(poly_f, H, 3, form=(2,))
    assert q(z) == pytest.approx(0.3)
    assert homogeneous_component(poly_f, H, 1, form=(2,))(z).shape == ()
    with pytest.raises(PreconditionError):
        homogeneous_component(poly_f, H, -1)


def test_covariant_taylor_reduces_to_taylor_for_flat_connection():
    # f = sin(x) cos(y) I: coefficient of x^a y^b is sin^(a)(0) cos^(b)(0) / (a! b!)
    c = zero_connection(2)
    poly = covariant_taylor(c, lambda z: [(z[0].sin() * z[1].cos()).outer(np.eye(2))], E2, 5)[0]
    sin_d, cos_d = [0, 1, 0, -1, 0, 1], [1, 0, -1, 0, 1, 0]
    for a in range(6):
        for b in range(6 - a):
            expect = sin_d[a] * cos_d[b] / (math.factorial(a) * math.factorial(b))
            got = poly.get((a, b), np.zeros((2, 2)))
            assert np.allclose(got, expect * np.eye(2), atol=1e-14)


def test_covariant_taylor_of_curvature_is_gauge_covariant():
    # under a gauge fixing the centre the polynomial is conjugated by a(x)
    g = su2()
    c = random_polynomial_connection(2, g, 11)
    a = random_gauge(2, g, 0)
    ct = gauge_transform(c, a)
    F = lambda c_: (lambda z: [c_.curvature().components(z)[0][1]])
    p = covariant_taylor(c, F(c), E2, 3)[0]
    pt = covariant_taylor(ct, F(ct), E2, 3)[0]
    assert max_diff(p, pt) < 1e-13


# ---------------------------------------------------------------------------
# Euclidean functionals

def test_abelian_F3_is_stokes():
    A0 = np.array([[0.8j]])
    c = abelian_constant_curvature(A0)
    F = taylor_functional(c, E2, 3)
    for r in (0.1, 0.4):
        assert np.allclose(F.evaluate(circle(r)), np.pi * r * r * A0, atol=1e-14)
    assert set(F.canonical(1e-15)) == {((0,), 1), ((1,), 0)}


@given(seeds)
@settings(max_examples=5, deadline=None)
def test_abelian_polynomial_curvature_is_captured_exactly(seed):
    # u(1) connection of degree 3 has curvature of degree 2: F^4 equals log Hol exactly
    c = random_polynomial_connection(2, u1(), seed)
    loop = figure_eight(0.6, 0.4, bend=0.2)
    L = holonomy(c, loop, steps=2000).log_value
    assert norm(L + taylor_functional(c, E2, 4).evaluate(loop)) < 1e-12
    assert norm(L + taylor_functional(c, E2, 3).evaluate(loop)) > 1e-6


@given(seeds)
@settings(max_examples=10, deadline=None)
def test_dual_path_F3(seed):
    c = random_polynomial_connection(2, su2(), seed)
    T = taylor_functional(c, E2, 3).canonical()
    E = euclidean_F3(c).canonical()
    assert set(T) == set(E)
    assert max_diff(T, E) < 1e-12


def test_euclidean_F3_three_dimensional_keys():
    c = random_polynomial_connection(3, su2(), 1)
    d = DilationStructure.euclidean(3)
    assert max_diff(taylor_functional(c, d, 3).canonical(), euclidean_F3(c).canonical()) < 1e-12


def test_euclidean_F3_needs_centre():
    c = abelian_constant_curvature(np.array([[1j]]))
    assert c.basepoint is None
    with pytest.raises(PreconditionError):
        euclidean_F3(c)


def test_symmetric_and_ray_rules_agree_for_unit_weights():
    c = random_polynomial_connection(2, su2(), 2)
    a = taylor_functional(c, E2, 5).canonical()
    b = taylor_functional(c, E2, 5, rule="symmetric").canonical()
    assert max_diff(a, b) < 1e-14


def test_gauge_invariance_of_coefficients():
    g = su2()
    c = random_polynomial_connection(2, g, 8)
    F = taylor_functional(c, E2, 4).canonical()
    for seed in range(3):
        ct = gauge_transform(c, random_gauge(2, g, seed))
        assert max_diff(taylor_functional(ct, E2, 4).canonical(), F) < 1e-13


def test_F3_residual_order_on_halving():
    c = random_polynomial_connection(2, su2(), 3)
    F = taylor_functional(c, E2, 3)
    res = []
    for s in (0.1, 0.05):
        loop = dilate_loop(figure_eight(1.0, 0.3, bend=0.2), E2, s)
        res.append(norm(holonomy(c, loop, steps=1000).log_value + F.evaluate(loop)))
    assert 12 < res[0] / res[1] < 20


def test_capability_error_for_first_order_connections():
    poly = su2_example()
    c = GaugeConnection.from_callables(poly.omega, dim=2, q=2, basepoint=np.zeros(2))
    taylor_functional(c, E2, 2)
    with pytest.raises(CapabilityError):
        taylor_functional(c, E2, 3)


def test_functional_bookkeeping():
    c = random_polynomial_connection(2, su2(), 4)
    F = taylor_functional(c, E2, 4)
    assert F.max_term_weight() == 4
    assert F.kind == "taylor-Fk"
    assert ((0,), 1) in F.keys()
    G = F + euclidean_F3(c)
    loop = figure_eight(0.3, 0.2)
    assert np.allclose(G.evaluate(loop), F.evaluate(loop) + euclidean_F3(c).evaluate(loop))
    with pytest.raises(PreconditionError):
        taylor_functional(c, E2, -1)
    empty = taylor_functional(c, E2, 1)
    assert np.all(empty.evaluate(loop) == 0)


def test_functional_json_round_trip():
    c = random_polynomial_connection(2, su2(), 5)
    F = taylor_functional(c, E2, 3)
    back = ExpansionFunctional.from_dict(json.loads(json.dumps(F.to_dict())))
    assert back.kind == F.kind and back.weights == F.weights and back.q == F.q
    assert [t.factor for t in back.terms] == [t.factor for t in F.terms]
    loop = polygon(np.array([[0, 0], [0.3, 0.1], [0.1, 0.4]]))
    assert np.array_equal(back.evaluate(loop), F.evaluate(loop))


# ---------------------------------------------------------------------------
# selector-modified functionals

def test_heisenberg_functionals_agree():
    m = make_heisenberg()
    c = random_polynomial_connection(3, su2(), 6)
    flat = model_F5(c, m)
    nil = model_F5(c, m, frame="nilpotent")
    q = heisenberg_q_functional(c, m)
    assert flat.kind == "heisenberg-F5"
    for r, bend in ((0.3, 0.3), (0.5, -0.2), (0.2, 0.6)):
        loop = horizontal_lift(figure_eight(r, bend=bend), m)
        v = flat.evaluate(loop)
        assert norm(nil.evaluate(loop) - v) < 1e-13
        assert norm(q.evaluate(loop) - v) < 1e-13


def test_heisenberg_mutated_leading_rational_differs():
    m = make_heisenberg()
    c = random_polynomial_connection(3, su2(), 7)
    loop = horizontal_lift(figure_eight(0.3, bend=0.3), m)
    good = heisenberg_q_functional(c, m).evaluate(loop)
    bad = heisenberg_q_functional(c, m, leading=Fraction(1, 2)).evaluate(loop)
    assert norm(good - bad) > 1e-6


def test_selector_modification_identities():
    for m in (make_heisenberg(), make_hopf()):
        c = random_polynomial_connection(3, su2(), 9)
        tilde, curv = selector_modify(c, m)
        pts = np.random.default_rng(0).uniform(-0.3, 0.3, (25, 3))
        assert selector_residual(tilde, m, pts) < 1e-12
        # only the vertical covector is modified
        assert curv(pts).shape == (25, 3, 3, 2, 2)
        loop = horizontal_lift(figure_eight(0.3, bend=0.3), m)
        h1 = holonomy(c, loop, steps=2000).group_value
        h2 = holonomy(tilde, loop, steps=2000).group_value
        assert np.max(np.abs(h1 - h2)) < 1e-12


def test_selector_requires_model_support():
    c = random_polynomial_connection(2, su2(), 0)
    with pytest.raises(CapabilityError):
        selector_modify(c, make_euclidean(2))
    c3 = random_polynomial_connection(3, su2(), 0)
    with pytest.raises(PreconditionError):
        model_F5(c3, make_heisenberg(), frame="other")


def test_hopf_functional_order():
    m = make_hopf()
    c = random_polynomial_connection(3, su2(), 10)
    F = model_F5(c, m)
    assert F.kind == "hopf-F5"
    res = []
    for r in (0.2, 0.1):
        loop = horizontal_lift(figure_eight(r, bend=0.3), m)
        res.append(norm(holonomy(c, loop, steps=1500).log_value + F.evaluate(loop)))
    # sixth order: halving the loop divides the residual by about 64
    assert res[0] / res[1] > 40
