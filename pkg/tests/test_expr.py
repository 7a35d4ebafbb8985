import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbgeo import expr as ex
from helpers import VARS, derivative_agreement, random_expr


def test_parse_power_of_function():
    e = ex.parse("sin(th)^2")
    assert e is ex.Pow(ex.Fn("sin", ex.Var("th")), ex.Const(2))


def test_parse_constant():
    assert ex.parse("1") is ex.Const(1)


def test_parse_error_offset():
    with pytest.raises(ex.ParseError) as info:
        ex.parse("th+")
    assert info.value.offset == 3


@pytest.mark.parametrize("text", ["", "(x", "x)", "sin x", "2**3", "x $ y", "f(x)"])
def test_parse_rejects(text):
    with pytest.raises(ex.ExprError):
        ex.parse(text)


def test_precedence_and_associativity():
    b = {"a": 2.0, "b": 3.0, "c": 4.0}
    assert ex.evaluate(ex.parse("a - b - c"), b) == -5.0
    assert ex.evaluate(ex.parse("a / b / c"), b) == pytest.approx(2 / 12)
    assert ex.evaluate(ex.parse("a ^ b ^ 2"), b) == 2.0 ** 9
    assert ex.evaluate(ex.parse("-a ^ 2"), b) == -4.0
    assert ex.evaluate(ex.parse("a * b + c"), b) == 10.0


def test_pi_is_constant():
    assert ex.free_variables(ex.parse("2*pi")) == frozenset()
    assert ex.evaluate(ex.parse("cos(pi)"), {}) == -1.0


def test_derivative_examples():
    b = {"x": 1.7, "th": 0.4}
    d = ex.differentiate(ex.parse("x^2"), "x")
    assert ex.evaluate(d, b) == pytest.approx(3.4)
    d = ex.differentiate(ex.parse("sin(th)^2"), "th")
    assert ex.evaluate(d, b) == pytest.approx(2 * math.sin(0.4) * math.cos(0.4))
    assert ex.differentiate(ex.parse("3.5"), "x") is ex.ZERO
    assert ex.differentiate(ex.parse("y*sin(y)"), "x") is ex.ZERO


def test_evaluate_examples():
    assert ex.evaluate(ex.parse("sin(th)^2"), {"th": math.pi / 2}) == 1.0
    assert ex.evaluate(ex.parse("x*y+1"), {"x": 2, "y": 3}) == 7.0


def test_unbound_variable():
    with pytest.raises(ex.UnboundVariableError):
        ex.evaluate(ex.parse("x"), {})


def test_domain_error_names_subexpression():
    with pytest.raises(ex.DomainError) as info:
        ex.evaluate(ex.parse("1 + log(x - 2)"), {"x": 1.0})
    assert "log" in str(info.value)
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.parse("1/(x - x)"), {"x": 1.0})


def test_derivatives_match_finite_differences():
    count, worst = derivative_agreement(count=1000)
    assert count == 1000
    assert worst < 1e-5


def test_compiled_matches_tree_walker():
    rng = np.random.default_rng(3)
    exprs = [random_expr(rng) for _ in range(40)]
    b = {"x": 0.3, "y": -0.7, "z": 1.1}
    fn = ex.compile_exprs(exprs, VARS)
    np.testing.assert_allclose(fn([b[v] for v in VARS]), ex.evaluate_many(exprs, b), rtol=1e-12)


def test_compiled_raises_domain_error():
    fn = ex.compile_exprs([ex.parse("sqrt(x)")], ["x"])
    with pytest.raises(ex.DomainError):
        fn([-1.0])


def test_interning_gives_structural_identity():
    assert ex.parse("x*y + 2") is ex.parse("x * y+2")
    assert ex.const(-0.0) is ex.const(0.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_render_round_trip(seed):
    e = random_expr(np.random.default_rng(seed))
    assert ex.parse(ex.render(e)) is e


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_smart_constructors_preserve_value(a, b):
    x, y = ex.var("x"), ex.var("y")
    e = ex.add(ex.mul(2, x, y), ex.neg(ex.power(x, 2)), ex.div(y, ex.add(2, ex.func("sin", x))))
    bind = {"x": a, "y": b}
    want = 2 * a * b - a * a + b / (2 + math.sin(a))
    assert ex.evaluate(e, bind) == pytest.approx(want, rel=1e-12, abs=1e-12)
