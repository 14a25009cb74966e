from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnot import catalog
from carnot.errors import PreconditionError
from carnot.group import (HomogeneousNorm, bch_terms, calibrate_norm, compute_group_law, dilate,
                          homogeneous_distance, ideal_membership_check, second_kind_law)

ENGEL = compute_group_law(catalog.engel_algebra())
MODEL = catalog.engel_law()
vec4 = arrays(np.float64, 4, elements=st.floats(-2, 2))


def test_heisenberg_p3_exact():
    law = compute_group_law(catalog.heisenberg_algebra(1))
    names = ["x1", "x2", "x3", "y1", "y2", "y3"]
    assert law.P[2].to_string(names) == "1/2*x1*y2 - 1/2*x2*y1 + x3 + y3"


def test_bch_terms_truncated_by_step():
    for step in (1, 2, 3, 4):
        terms = bch_terms(step)
        assert max(len(w) for _, w in terms) == step
    # degree-2 part is [X, Y]/2 once words are read as nested brackets
    xy = sum(c for c, w in bch_terms(2) if w == ("X", "Y"))
    yx = sum(c for c, w in bch_terms(2) if w == ("Y", "X"))
    assert xy - yx == Fraction(1, 2)


def test_engel_product_example():
    z = ENGEL.multiply([1.0, 0, 0, 0], [0, 1.0, 0, 0])
    assert np.allclose(z, [1, 1, 0.5, 1 / 12])


def test_inverse_is_negation_in_exponential_coordinates():
    x = np.array([0.3, -1.2, 0.7, 2.0])
    assert np.allclose(ENGEL.inverse(x), -x)
    assert np.allclose(ENGEL.multiply(x, ENGEL.inverse(x)), 0)


def test_model_chart_frame():
    # left-invariant frame of the Engel model: X2 = d2 + x1 d3 + x1^2/2 d4, X3 = d3 + x1 d4
    F = MODEL.field_matrix(np.array([2.0, 5.0, -1.0, 3.0]))
    want = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 2, 1, 0], [0, 2, 2, 1]], dtype=float)
    assert np.allclose(F, want)


def test_chart_round_trip():
    x = np.random.default_rng(0).normal(size=(50, 4))
    assert np.allclose(MODEL.from_exponential(MODEL.to_exponential(x)), x)


@settings(max_examples=50, deadline=None)
@given(vec4, vec4, vec4)
def test_associativity_numeric(a, b, c):
    for law in (ENGEL, MODEL):
        lhs = law.multiply(law.multiply(a, b), c)
        rhs = law.multiply(a, law.multiply(b, c))
        assert np.allclose(lhs, rhs, atol=1e-9, rtol=1e-9)


@settings(max_examples=50, deadline=None)
@given(vec4, vec4, st.floats(0.1, 3))
def test_dilation_is_automorphism(a, b, r):
    alg = ENGEL.algebra
    lhs = dilate(alg, r, ENGEL.multiply(a, b))
    rhs = ENGEL.multiply(dilate(alg, r, a), dilate(alg, r, b))
    assert np.allclose(lhs, rhs, atol=1e-9, rtol=1e-9)


@settings(max_examples=50, deadline=None)
@given(vec4, vec4, st.floats(0.1, 3))
def test_norm_homogeneous_and_left_invariant(a, b, r):
    norm = HomogeneousNorm(ENGEL.algebra, (1.0, 1.0, 1.0))
    alg = ENGEL.algebra
    assert np.isclose(norm(dilate(alg, r, a)), r * norm(a), rtol=1e-9, atol=1e-12)
    g = np.array([0.5, -0.1, 0.2, 1.0])
    d1 = norm.distance(ENGEL, ENGEL.multiply(g, a), ENGEL.multiply(g, b))
    # cube roots amplify round-off near the diagonal
    assert np.isclose(d1, norm.distance(ENGEL, a, b), rtol=1e-6, atol=1e-4)


def test_distance_chart_independent():
    norm = HomogeneousNorm(ENGEL.algebra, (1.0, 1.0, 1.0))
    a, b = np.array([0.2, 0.3, -0.1, 0.5]), np.array([-0.4, 0.1, 0.6, -0.2])
    d_exp = norm.distance(ENGEL, a, b)
    d_model = norm.distance(MODEL, MODEL.from_exponential(a), MODEL.from_exponential(b))
    assert np.isclose(d_exp, d_model)


def test_homogeneous_distance_requires_norm():
    with pytest.raises(PreconditionError):
        homogeneous_distance(None, ENGEL, np.zeros(4), np.zeros(4))


def test_calibration():
    for name in ("heisenberg1", "engel4", "e5", "abelian2"):
        law = catalog.get(name).law
        norm = calibrate_norm(law, seed=1)
        assert norm.epsilons[0] == 1.0
        assert all(0 < e <= 1 for e in norm.epsilons)
    with pytest.raises(PreconditionError):
        calibrate_norm(ENGEL, sample_count=100)


def test_ideal_membership():
    assert ideal_membership_check(ENGEL, [1, 2]) == (True, None)
    assert ideal_membership_check(ENGEL, [1, 2, 3]) == (True, None)
    with pytest.raises(PreconditionError):
        ideal_membership_check(ENGEL, [0, 2])


def test_second_kind_chart_polynomial_and_associative():
    law = second_kind_law(ENGEL, catalog.ENGEL_CHART_ORDER, "test-chart")
    for j, p in enumerate(law.P):
        assert p.coefficient(tuple(int(i == j) for i in range(8))) == 1
    a, b = np.array([0.1, 0.2, 0.3, 0.4]), np.array([-0.3, 0.5, 0.1, 0.0])
    assert np.allclose(law.multiply(a, b), MODEL.multiply(a, b))
