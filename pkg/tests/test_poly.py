from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot.errors import PreconditionError
from carnot.poly import Polynomial

x, y, z = Polynomial.variables(3, [1, 1, 2])

terms = st.dictionaries(st.tuples(*[st.integers(0, 3)] * 3),
                        st.fractions(min_value=-5, max_value=5, max_denominator=6), max_size=4)


def poly(t):
    return Polynomial(3, t, [1, 1, 2])


def test_exact_coefficients_and_string():
    p = (x * y).scale(Fraction(1, 2)) - y * x + z
    assert p.coefficient((1, 1, 0)) == Fraction(-1, 2)
    assert p.to_string(["a", "b", "c"]) == "-1/2*a*b + c"


def test_weighted_degree_and_homogeneity():
    p = x * y + z
    assert p.weighted_degree() == 2
    assert p.is_weighted_homogeneous(2)
    assert not (p + x).is_weighted_homogeneous(2)
    assert Polynomial.zero(3).weighted_degree() is None


def test_partial_derivative_and_substitution():
    p = x ** 2 * z + y
    assert p.partial_derivative(0) == 2 * x * z
    q = p.substitute([y, x, z])
    assert q == y ** 2 * z + x
    assert p.restrict_zero([2]) == y


def test_evaluate_broadcasts():
    p = x * y + z
    pts = np.arange(12.0).reshape(4, 3)
    assert np.allclose(p.evaluate(pts.T), pts[:, 0] * pts[:, 1] + pts[:, 2])


def test_mismatched_ring_rejected():
    with pytest.raises(PreconditionError):
        x + Polynomial.variable(0, 2)


@settings(max_examples=60, deadline=None)
@given(terms, terms, terms)
def test_ring_axioms(a, b, c):
    a, b, c = poly(a), poly(b), poly(c)
    assert (a + b) * c == a * c + b * c
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a - a == Polynomial.zero(3, [1, 1, 2])


@settings(max_examples=40, deadline=None)
@given(terms, terms)
def test_leibniz_rule(a, b):
    a, b = poly(a), poly(b)
    for j in range(3):
        assert (a * b).partial_derivative(j) == a.partial_derivative(j) * b + a * b.partial_derivative(j)
