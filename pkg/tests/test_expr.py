import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot import expr as ex


def test_dual_examples():
    d = ex.eval_point(ex.parse("x^2"), ["x"], [3.0])
    assert d.value == 9 and d.partials[0] == 6
    d = ex.eval_point(ex.parse("exp(y)"), ["y"], [0.0])
    assert d.value == 1 and d.partials[0] == 1
    d = ex.eval_point(ex.parse("x*exp(y)+x^2/2"), ["x", "y"], [1.0, 0.0])
    assert d.value == 1.5 and np.allclose(d.partials, [2, 1])


def test_syntax_error_position():
    with pytest.raises(ex.ExprSyntaxError) as info:
        ex.parse("x + ")
    assert info.value.position == 4
    with pytest.raises(ex.ExprSyntaxError):
        ex.parse("x^1.5")
    with pytest.raises(ex.ExprSyntaxError):
        ex.parse("foo(x)")


def test_domain_and_unbound_errors():
    with pytest.raises(ex.ExprDomainError):
        ex.evaluate(ex.parse("ln(x)"), {"x": -1.0})
    with pytest.raises(ex.ExprDomainError):
        ex.evaluate(ex.parse("1/x"), {"x": 0.0})
    with pytest.raises(ex.UnboundVariableError):
        ex.evaluate(ex.parse("x + z"), {"x": 1.0})


def test_printing_is_canonical():
    assert ex.to_string(ex.parse("(x)+((y*2))")) == "x + y*2"
    assert ex.to_string(ex.parse("x - (y - z)")) == "x - (y - z)"
    assert ex.to_string(ex.parse("-(x^2)")) in ("-x^2", "-(x^2)")
    assert ex.to_string(ex.parse("0.25*x")) == "0.25*x"


def test_vectorized_evaluation():
    u = np.random.default_rng(0).normal(size=(7, 2))
    d = ex.eval_point(ex.parse("sin(x)*y"), ["x", "y"], u)
    assert np.allclose(d.value, np.sin(u[:, 0]) * u[:, 1])
    assert np.allclose(d.partials[:, 0], np.cos(u[:, 0]) * u[:, 1])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_parse_print_round_trip(seed):
    e = ex.random_expr(np.random.default_rng(seed), ["x", "y"], depth=4)
    text = ex.to_string(e)
    assert ex.to_string(ex.parse(text)) == text
    u = np.array([0.3, -0.7])
    assert np.isclose(ex.eval_point(ex.parse(text), ["x", "y"], u).value,
                      ex.eval_point(e, ["x", "y"], u).value, rtol=1e-12, atol=1e-12)
