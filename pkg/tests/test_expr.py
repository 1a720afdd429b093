from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netbrackets.dynamics import PhaseState
from netbrackets.expr import (
    BinOp, Const, DomainError, Func, ParseError, Pow, Var, VarId, differentiate, evaluate,
    gradient_hessian, parse, to_string,
)


def x(i=1):
    return Var("x", i)


def p(i=1):
    return Var("p", i)


# -- parse -------------------------------------------------------------------

def test_parse_oscillator_hamiltonian():
    e = parse("p^2/2 + x^2/2", 1)
    half = Const(Fraction(2))
    assert e == BinOp("+", BinOp("/", Pow(p(), Fraction(2)), half), BinOp("/", Pow(x(), Fraction(2)), half))


def test_parse_indexed_atom():
    assert parse("x1", 2) == Var("x", 1)


def test_parse_pendulum():
    e = parse("p^2/2 + (1 - cos(x))", 1)
    assert e.right == BinOp("-", Const(Fraction(1)), Func("cos", x()))


def test_alias_only_for_single_dof():
    assert parse("x", 1) == parse("x1", 1)
    with pytest.raises(ParseError):
        parse("x", 2)


@pytest.mark.parametrize("text, offset", [
    ("x1 + * p1", 5),
    ("x1 + y", 5),
    ("sin(x1", 6),
    ("x3", 0),
    ("x1^p1", 3),
    ("2 + τ", 4),
    ("x1 + τ", 5),
])
def test_parse_errors_carry_byte_offset(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text, 2)
    assert info.value.offset == offset


def test_offset_counts_bytes_not_characters():
    with pytest.raises(ParseError) as info:
        parse("x1(τ) + y", 2, tagged=True)
    assert info.value.offset == 9


def test_explicit_time_rejected():
    with pytest.raises(ParseError, match="time dependence"):
        parse("x*t", 1)


def test_exponent_forms():
    assert parse("x^(1/2)").exponent == Fraction(1, 2)
    assert parse("x^(-3)").exponent == -3
    assert parse("x^-1").exponent == -1
    assert parse("x^0.5").exponent == Fraction(1, 2)


def test_whitespace_insignificant():
    assert parse(" p ^ 2 /2+x^2/ 2 ") == parse("p^2/2 + x^2/2")


# -- printing round trip ------------------------------------------------------

def raw_exprs():
    atoms = st.one_of(
        st.integers(0, 50).map(lambda n: Const(Fraction(n))),
        st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Const),
        st.sampled_from([x(1), x(2), p(1), p(2)]),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
            st.tuples(st.sampled_from(["sin", "cos", "exp", "log", "sqrt", "neg"]), children)
            .map(lambda t: Func(*t)),
            st.tuples(children, st.fractions(-5, 5, max_denominator=4)).map(lambda t: Pow(*t)),
        )

    return st.recursive(atoms, extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(raw_exprs())
def test_print_parse_round_trip(e):
    assert parse(to_string(e), 2) == e


@pytest.mark.parametrize("text", [
    "-x^2", "x - (p - x)", "x/(p*x)", "-(x*p)", "sqrt(x)*-p", "x*-p^3", "exp(-x)/(1 + p^2)",
])
def test_round_trip_examples(text):
    e = parse(text)
    assert parse(to_string(e)) == e


# -- differentiate -------------------------------------------------------------

def test_derivative_of_oscillator():
    assert differentiate(parse("p^2/2 + x^2/2"), VarId("x", 1)) == x()


def test_derivative_independent_variable():
    assert differentiate(parse("x"), VarId("p", 1)) == Const(Fraction(0))


def test_derivative_product():
    d = differentiate(parse("sin(x)*p"), "x")
    assert d == BinOp("*", Func("cos", x()), p())


EXPRESSIONS = [
    "p^2/2 + (1 - cos(x))",
    "p^2/2 + x^4/4",
    "sin(x)*p + exp(p/3)",
    "sqrt(1 + x^2)*p^3 - log(2 + p^2)",
    "x^3*p - x/(2 + p^2)",
    "(x + p)^(1/2)*exp(-x^2)",
]


@pytest.mark.parametrize("text", EXPRESSIONS)
def test_derivative_matches_finite_differences(text):
    e = parse(text)
    rng = np.random.default_rng(7)
    h = 1e-5
    for v in ("x", "p"):
        d = differentiate(e, v)
        for _ in range(100):
            z = rng.uniform(0.1, 2.0, size=2)
            step = np.array([h, 0.0]) if v == "x" else np.array([0.0, h])
            fd = (evaluate(e, z + step) - evaluate(e, z - step)) / (2 * h)
            sym = evaluate(d, z)
            assert abs(sym - fd) <= 1e-6 * (1 + abs(sym))


# -- evaluate ------------------------------------------------------------------

def test_evaluate_oscillator_energy():
    assert evaluate(parse("p^2/2 + x^2/2"), PhaseState([1.0], [0.0])) == 0.5


def test_evaluate_atom():
    assert evaluate(parse("x"), PhaseState([3.0], [-1.0])) == 3.0


def test_evaluate_product():
    assert evaluate(parse("x^2*p"), PhaseState([2.0], [5.0])) == 20.0


def test_evaluate_mapping_binding():
    assert evaluate(parse("x1*p2", 2), {"x1": 3, "p2": 4}) == 12.0


@pytest.mark.parametrize("text, z", [
    ("log(x)", [0.0, 1.0]),
    ("log(x)", [-1.0, 1.0]),
    ("1/x", [0.0, 1.0]),
    ("sqrt(x)", [-2.0, 0.0]),
    ("x^(1/2)", [-2.0, 0.0]),
    ("x^(-2)", [0.0, 0.0]),
    ("exp(x)", [1000.0, 0.0]),
])
def test_domain_errors_are_reported(text, z):
    with pytest.raises(DomainError):
        evaluate(parse(text), z)


def test_missing_binding():
    with pytest.raises(ValueError):
        evaluate(parse("x1 + p2", 2), {"x1": 1.0})


# -- gradient / Hessian --------------------------------------------------------

def test_gradient_hessian_oscillator():
    g, H = gradient_hessian(parse("p^2/2 + x^2/2"), PhaseState([1.0], [2.0]))
    np.testing.assert_array_equal(g, [1.0, 2.0])
    np.testing.assert_array_equal(H, np.eye(2))


def test_gradient_hessian_constant():
    g, H = gradient_hessian(parse("3"), PhaseState([0.4], [0.1]))
    np.testing.assert_array_equal(g, np.zeros(2))
    np.testing.assert_array_equal(H, np.zeros((2, 2)))


def test_gradient_hessian_quartic():
    g, H = gradient_hessian(parse("p^2/2 + x^4/4"), PhaseState([2.0], [0.0]))
    np.testing.assert_array_equal(g, [8.0, 0.0])
    np.testing.assert_array_equal(H, np.diag([12.0, 1.0]))


def test_gradient_ordering_multi_dof():
    g, _ = gradient_hessian(parse("x1 + 2*x2 + 3*p1 + 4*p2", 2), PhaseState([0, 0], [0, 0]))
    np.testing.assert_array_equal(g, [1, 2, 3, 4])


def test_hessian_symmetry_polynomials():
    rng = np.random.default_rng(3)
    for text in ["x1^3*p2 + x2*p1^2 - 4*x1*x2*p1*p2", "(x1 + p1)^4 - x2^2*p2^3"]:
        e = parse(text, 2)
        for _ in range(20):
            _, H = gradient_hessian(e, PhaseState(rng.normal(size=2), rng.normal(size=2)))
            assert np.max(np.abs(H - H.T)) <= 1e-12
