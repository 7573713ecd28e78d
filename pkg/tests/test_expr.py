import cmath

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sklab.expr import (
    Binary,
    Const,
    ExprDomainError,
    ExprSyntaxError,
    Unary,
    UnknownIdentifierError,
    Var,
    differentiate,
    evaluate,
    is_zero,
    parse,
    to_string,
)


def test_identity_expression():
    e = parse("lambda")
    assert isinstance(e, Var)
    assert evaluate(e, 2 + 1j) == 2 + 1j


def test_exp_tree_shape():
    e = parse("exp(0.5*lambda)")
    assert e == Unary("exp", Binary("*", Const(0.5), Var()))


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("lambda +")
    assert info.value.position == 8
    assert "offset 8" in str(info.value)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse("tan(lambda)")
    with pytest.raises(UnknownIdentifierError):
        parse("mu + 1")


@pytest.mark.parametrize("text", ["(lambda", "lambda)", "exp((lambda)", "((1+2)", "sin(lambda))"])
def test_unbalanced_parentheses_rejected(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_integer_exponent_only():
    with pytest.raises(ExprSyntaxError):
        parse("lambda^0.5")
    assert evaluate(parse("lambda^2"), 1 + 1j) == pytest.approx(2j)


def test_basic_evaluation():
    assert evaluate(parse("exp(lambda)"), 0) == 1
    assert evaluate(parse("i*lambda"), 2) == 2j
    assert evaluate(parse("2.5e-1*lambda"), 4) == 1
    assert evaluate(parse("neg(lambda)"), 3) == -3


def test_division_by_zero():
    with pytest.raises(ExprDomainError):
        evaluate(parse("1/lambda"), 0)


def test_log_branch_cut():
    with pytest.raises(ExprDomainError):
        evaluate(parse("log(lambda)"), 0)
    with pytest.raises(ExprDomainError):
        evaluate(parse("log(lambda)"), -2.0)
    assert evaluate(parse("log(lambda)"), -2 + 1e-9j) == pytest.approx(cmath.log(-2 + 1e-9j))


def test_vectorised_evaluation():
    z = np.linspace(-1, 1, 7) + 0.2j
    np.testing.assert_allclose(evaluate(parse("sin(lambda)^2 + 1"), z), np.sin(z) ** 2 + 1)
    out = evaluate(parse("3"), z)
    assert out.shape == z.shape


def test_simple_derivatives():
    assert to_string(differentiate(parse("sin(lambda)"))) == "cos(lambda)"
    assert evaluate(differentiate(parse("lambda")), 0.7) == 1
    assert is_zero(differentiate(parse("3 + 2*i")))


def test_operator_construction():
    e = parse("lambda") * 2 + 1
    assert evaluate(e, 3) == 7
    assert evaluate(-e, 1) == -3
    assert evaluate(e ** 2, 0) == 1


# -------------------------------------------------------------- properties

_leaves = st.one_of(
    st.just("lambda"),
    st.floats(-2, 2, allow_nan=False).map(lambda v: f"{v:.3f}"),
    st.just("i"),
)


def _combine(children):
    unary = st.sampled_from(["exp", "sin", "cos", "neg"])
    return st.one_of(
        st.tuples(unary, children).map(lambda t: f"{t[0]}({t[1]})"),
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
            lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(children, st.integers(1, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        st.tuples(children, children).map(lambda t: f"({t[0]}) / (2.5 + ({t[1]})^2)"),
        children.map(lambda c: f"log(3 + ({c})^2)"),
        children.map(lambda c: f"sqrt(3 + ({c})^2)"),
    )


expressions = st.recursive(_leaves, _combine, max_leaves=6)
points = st.tuples(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7)).map(lambda t: complex(*t))


@settings(max_examples=100, deadline=None)
@given(expressions, points)
def test_derivative_matches_central_difference(text, z):
    e = parse(text)
    h = 1e-5
    try:
        d = evaluate(differentiate(e), z)
        fd = (evaluate(e, z + h) - evaluate(e, z - h)) / (2 * h)
    except ExprDomainError:
        assume(False)
    assume(np.isfinite(d) and abs(d) < 1e6)
    assert abs(d - fd) <= 1e-6 * (1 + abs(d))


@settings(max_examples=100, deadline=None)
@given(expressions, points)
def test_print_parse_round_trip(text, z):
    e = parse(text)
    try:
        v = evaluate(e, z)
    except ExprDomainError:
        assume(False)
    assume(np.isfinite(v))
    assert evaluate(parse(to_string(e)), z) == pytest.approx(v, rel=1e-12, abs=1e-12)
