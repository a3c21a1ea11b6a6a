import re

import pytest
from hypothesis import given, settings, strategies as st

from cases import IDENTITIES, SUMS
from resproof import dsl
from resproof.dsl import BinOp, Call, Neg, Num, Sum, Sym


def test_parse_sum_with_range():
    node = dsl.parse_expr("sum(k=-m..n, (-1)^k*binom(2*n,n+k))")
    assert isinstance(node, Sum) and node.var == "k"
    assert node.lo == Neg(Sym("m")) and node.hi == Sym("n")
    assert node.body == BinOp("*", BinOp("^", Neg(Num(1)), Sym("k")), Call("binom", (BinOp("*", Num(2), Sym("n")), BinOp("+", Sym("n"), Sym("k")))))


def test_parse_identity_with_cases():
    ident = dsl.parse_identity(IDENTITIES["double_factorial"])
    assert isinstance(ident.rhs, dsl.Cases)
    assert ident.rhs.cond_lhs == Sym("m") and ident.rhs.cond_rhs == Num(0) and ident.rhs.other == Num(0)


def test_power_is_right_associative_and_double_star_is_power():
    assert dsl.parse_expr("a^b^c") == BinOp("^", Sym("a"), BinOp("^", Sym("b"), Sym("c")))
    assert dsl.parse_expr("a**2") == dsl.parse_expr("a^2")


@pytest.mark.parametrize(
    "text, line, col, msg",
    [
        ("sum(k, binom(n,k)", 1, 18, "expected ')'"),
        ("sum(k, binom(n,k)*@)", 1, 19, "unexpected character"),
        ("sum(k, foo(n,k))", 1, 8, "unknown function 'foo'"),
        ("sum(k, binom(n))", 1, 8, "binom takes 2 argument"),
        ("sum(k,\n  S2(k))", 2, 3, "S2 takes 2 argument"),
        ("1 +", 1, 4, "unexpected 'end of input'"),
    ],
)
def test_errors_carry_position(text, line, col, msg):
    with pytest.raises(dsl.DSLError, match=re.escape(msg)) as e:
        dsl.parse_expr(text)
    assert (e.value.line, e.value.col) == (line, col)


def test_identity_needs_a_sum():
    with pytest.raises(dsl.DSLError):
        dsl.parse_identity("binom(n,k) == 1")


def test_to_linexpr():
    assert str(dsl.to_linexpr(dsl.parse_expr("2*(n-k)+3"))) == "-2*k+2*n+3"
    with pytest.raises(dsl.DSLError, match="integer-linear"):
        dsl.to_linexpr(dsl.parse_expr("n*k"))
    with pytest.raises(dsl.DSLError, match="cannot appear"):
        dsl.to_linexpr(dsl.parse_expr("n+x"), {"n"})


def test_free_symbols_in_order():
    assert dsl.free_symbols(dsl.parse_expr("sum(k, binom(n,k)*x^m)")) == ["n", "x", "m"]


def test_corpus_round_trip():
    for text in list(SUMS.values()):
        node = dsl.parse_expr(text)
        assert dsl.parse_expr(dsl.render(node)) == node
    for text in IDENTITIES.values():
        ident = dsl.parse_identity(text)
        assert dsl.parse_identity(dsl.render(ident)) == ident


names = st.sampled_from(["n", "m", "k", "x", "q"])
leaves = st.one_of(st.integers(0, 20).map(Num), names.map(Sym))


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        children.map(Neg),
        st.tuples(children, children).map(lambda t: Call("binom", t)),
        st.tuples(children, children).map(lambda t: Call("S2", t)),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_render_parse_round_trip(node):
    text = dsl.render(node)
    assert dsl.parse_expr(text) == node


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_round_trip_inside_a_sum(body):
    node = Sum("j", Num(0), Sym("n"), body)
    assert dsl.parse_expr(dsl.render(node)) == node
