from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from upmdp.polynomial import (ExprSyntaxError, MissingParameterError, Polynomial,
                              UnknownIdentifierError, parse_expr, to_text)

V = ("v",)
PQ = ("p", "q")


def test_boundary_cancellation():
    assert parse_expr("1-v", V).eval({"v": 1.0}) == 0.0


def test_forced_arithmetic():
    assert parse_expr("0.5*v^2", V).eval({"v": 0.4}) == pytest.approx(0.08, abs=1e-15)


def test_hand_expansion():
    p = parse_expr("v+0.9*(1-v)", V)
    expected = Polynomial.constant(Fraction(9, 10), V) + Fraction(1, 10) * Polynomial.variable("v", V)
    assert p == expected
    assert p.eval({"v": 0.3}) == pytest.approx(0.93, abs=1e-15)


def test_expanded_matches_unexpanded_ast():
    import random
    rnd = random.Random(3)
    p = parse_expr("v+0.9*(1-v)", V)
    for _ in range(20):
        v = rnd.uniform(-2, 2)
        assert p.eval({"v": v}) == pytest.approx(v + 0.9 * (1 - v), rel=1e-12, abs=1e-15)


def test_eval_examples():
    assert Polynomial.constant(1, V).eval({"v": 0.123}) == 1.0
    assert parse_expr("v", V).eval({"v": 0.37}) == 0.37
    p = parse_expr("0.1*v*(1-v)^3 + 0.1*(1-v)^2", V)
    assert p.eval({"v": 0.5}) == pytest.approx(0.03125, abs=1e-15)


def test_to_text_examples():
    assert to_text(Polynomial({}, V)) == "0"
    assert to_text(parse_expr("v - v", V)) == "0"
    assert to_text(parse_expr("v^2*3", V)) == "3*v^2"
    assert to_text(parse_expr("1 - v + v^2", V)) == "v^2 - v + 1"


def test_decimal_exactness():
    p = parse_expr("0.1", V)
    assert p.constant_value() == Fraction(1, 10)
    assert parse_expr("0.25", V).constant_value() == Fraction(1, 4)
    assert parse_expr("3/4", V).constant_value() == Fraction(3, 4)


def test_unary_minus_binds_tight():
    assert parse_expr("-v*2", V) == parse_expr("(-v)*2", V)
    # '-' takes a whole factor, so the exponent is applied first
    assert parse_expr("-v^2", V).eval({"v": 3.0}) == -9.0


def test_errors():
    with pytest.raises(UnknownIdentifierError) as e:
        parse_expr("1 - w", V)
    assert e.value.offset == 4
    with pytest.raises(ExprSyntaxError) as e:
        parse_expr("1 + * v", V)
    assert e.value.offset == 4
    with pytest.raises(ExprSyntaxError):
        parse_expr("(1 - v", V)
    with pytest.raises(ExprSyntaxError):
        parse_expr("v^v", V)
    with pytest.raises(ExprSyntaxError, match="zero denominator"):
        parse_expr("1/0", V)
    with pytest.raises(ExprSyntaxError):
        parse_expr("v $ 2", V)
    with pytest.raises(MissingParameterError):
        parse_expr("p*q", PQ).eval({"p": 0.5})


def test_no_zero_terms_after_arithmetic():
    p = parse_expr("p + q", PQ)
    r = (p - parse_expr("q", PQ)) * parse_expr("1 - p", PQ) + parse_expr("p^2", PQ)
    assert r == parse_expr("p", PQ)
    assert all(c != 0 for c in r.terms.values())
    assert (p - p).is_zero()


# -- properties ------------------------------------------------------------------

coef = st.fractions(min_value=-50, max_value=50, max_denominator=20)
mono = st.tuples(st.integers(0, 3), st.integers(0, 3))


@st.composite
def polys(draw):
    terms = draw(st.dictionaries(mono, coef, max_size=6))
    p = Polynomial({}, PQ)
    for (a, b), c in terms.items():
        p = p + c * Polynomial.variable("p", PQ) ** a * Polynomial.variable("q", PQ) ** b
    return p


@settings(max_examples=200, deadline=None)
@given(polys())
def test_round_trip(p):
    assert parse_expr(to_text(p), PQ) == p


vals = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(polys(), polys(), vals, vals)
def test_eval_homomorphism(f, g, x, y):
    u = {"p": x, "q": y}
    scale = 1.0 + abs(f.eval(u)) + abs(g.eval(u))
    assert (f + g).eval(u) == pytest.approx(f.eval(u) + g.eval(u), rel=1e-12, abs=1e-12 * scale * 1e4)
    prod, ref = (f * g).eval(u), f.eval(u) * g.eval(u)
    assert prod == pytest.approx(ref, rel=1e-12, abs=1e-12 * scale ** 2 * 1e4)
