from fractions import Fraction

import pytest

from netbrackets.expr import Const, TimeTag, Var, parse
from netbrackets.symbolic import (
    DeltaExpr, delta, parse_tag, parse_tagged, symbolic_bracket, symbolic_partial,
)


# -- tags ----------------------------------------------------------------------

def test_parse_tag_forms():
    assert parse_tag("3") == TimeTag(Fraction(3))
    assert parse_tag("-1/2") == TimeTag(Fraction(-1, 2))
    assert parse_tag("0.25") == TimeTag(Fraction(1, 4))
    assert parse_tag("t'") == parse_tag("t′")
    with pytest.raises(ValueError):
        parse_tag("")


def test_rationals_sort_before_names():
    assert parse_tag("5") < parse_tag("a")
    assert parse_tag("t") < parse_tag("t'") < parse_tag("tau")


# -- deltas --------------------------------------------------------------------

def test_delta_same_tag_is_one():
    assert delta("t", "t") == DeltaExpr.scalar(1)


def test_delta_distinct_rationals_vanish():
    assert delta("1/2", "0.5") == DeltaExpr.scalar(1)
    assert delta("1", "2").is_zero


def test_delta_is_symmetric():
    assert delta("tau", "t") == delta("t", "tau")


def test_transitive_rational_conflict():
    assert (delta("t", "1") * delta("t", "2")).is_zero


def test_chain_is_canonical():
    a = delta("t'", "tau") * delta("t", "t'")
    b = delta("t", "tau") * delta("tau", "t'")
    assert a == b
    assert str(a) == "delta(t,t')*delta(t,tau)"


def test_coefficient_tags_follow_class_anchor():
    e = DeltaExpr.build([(parse_tagged("x(tau)"), [("t", "tau")])])
    assert e.terms[0].coefficient == Var("x", 1, TimeTag("t"))


def test_like_terms_cancel():
    assert (delta("t", "tau") - delta("tau", "t")).is_zero


# -- partial derivatives -------------------------------------------------------

def test_partial_identity():
    assert symbolic_partial("x(t)", "x(t')") == delta("t", "t'")


def test_partial_square_same_tag():
    d = symbolic_partial("x(t)^2", "x(t)")
    assert d == DeltaExpr.scalar(parse_tagged("2*x(t)"))


def test_partial_independent_symbol():
    assert symbolic_partial("sin(x(t))", "p(t)").is_zero


def test_partial_sums_over_tags():
    d = symbolic_partial("x(t)*x(t')", "x(tau)")
    assert d == (DeltaExpr.build([(parse_tagged("x(t')"), [("t", "tau")])])
                 + DeltaExpr.build([(parse_tagged("x(t)"), [("t'", "tau")])]))


def test_partial_requires_tag():
    with pytest.raises(ValueError):
        symbolic_partial("x(t)", Var("x", 1))


# -- brackets ------------------------------------------------------------------

def test_table_x_p():
    assert symbolic_bracket("x(t)", "p(t')", "tau") == delta("t", "t'") * delta("t", "tau")


@pytest.mark.parametrize("a, b", [("x(t)", "x(t')"), ("p(t)", "p(t')")])
def test_table_same_kind_vanishes(a, b):
    r = symbolic_bracket(a, b, "tau")
    assert r.is_zero and r == DeltaExpr()
    assert str(r) == "0"


def test_reduction_at_reference_time():
    assert symbolic_bracket("x(tau)", "p(tau)", "tau") == DeltaExpr.scalar(1)


def test_p_x_is_negative():
    assert symbolic_bracket("p(t)", "x(t')", "tau") == -(delta("t", "t'") * delta("t", "tau"))


def test_exact_rational_times():
    assert symbolic_bracket("x(1)", "p(1)", "1") == DeltaExpr.scalar(1)
    assert symbolic_bracket("x(1)", "p(2)", "1").is_zero
    assert symbolic_bracket("x(1/2)", "p(0.5)", "tau") == delta("1/2", "tau")


def test_multi_dof_bracket():
    assert symbolic_bracket("x1(t)", "p2(t)", "tau").is_zero
    assert symbolic_bracket("x2(t)", "p2(t)", "tau") == delta("t", "tau")


def test_nonlinear_bracket_at_equal_tags():
    r = symbolic_bracket("x(tau)^2", "p(tau)", "tau")
    assert r == DeltaExpr.scalar(parse_tagged("2*x(tau)"))


def test_bare_symbols_rejected():
    with pytest.raises(ValueError):
        symbolic_bracket(parse("x"), parse("p"), "tau")


def test_scalar_constant():
    assert DeltaExpr.scalar(0).is_zero
    assert DeltaExpr.scalar(3).terms[0].coefficient == Const(Fraction(3))
