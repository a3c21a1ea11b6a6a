import random
from fractions import Fraction

import pytest

from cases import derivation, rsum
from resproof import dsl
from resproof.algebra import laurent_coeff
from resproof.hyperterm import LinExpr, Universe
from resproof.prover import eval_sum, load_sum
from resproof.residue import (
    SequenceKind,
    boundary_vanishes,
    eval_sequence,
    kernel_series,
    residue_rep,
    residue_value,
)
from resproof.telescope import Member, telescope


def test_oracle_values():
    assert eval_sequence("S2", (4, 2)) == 7
    assert eval_sequence("S1", (4, 2)) == 11
    assert eval_sequence("S1", (4, 1)) == -6
    assert eval_sequence("S2", (0, 0)) == 1 and eval_sequence("S2", (3, 0)) == 0
    assert eval_sequence("S2", (2, 3)) == 0 and eval_sequence("S1", (-1, 0)) == 0
    qq = eval_sequence("qS2", (3, 2))
    (q,) = qq.field.gens
    assert qq == q + 2
    assert eval_sequence("qS1", (3, 1)) == q + 1
    assert [eval_sequence("bernoulli", (j,)) for j in range(5)] == [1, Fraction(-1, 2), Fraction(1, 6), 0, Fraction(-1, 30)]
    assert eval_sequence("pow", (3, 2)) == 9 and eval_sequence("pow", (3, -1)) == 0


def test_bernoulli_polynomial_oracle():
    assert eval_sequence("bernpoly", (2,), x=Fraction(1, 2)) == Fraction(-1, 12)
    with pytest.raises(ValueError):
        eval_sequence("bernpoly", (2,))


def _rep(kind, args, U=Universe(params=("a", "b"), aux=("z",))):
    return residue_rep(kind, [LinExpr.of({"a": 1}, 0), LinExpr.of({"b": 1}, 0)][: len(args)], "z", U)


def test_residue_rep_matches_oracle_on_small_indices():
    for kind in ("S1", "S2"):
        t = _rep(kind, "ab")
        for a in range(7):
            for b in range(7):
                assert residue_value(t, {"a": a, "b": b, "k": 0}) == eval_sequence(kind, (a, b))
    t = _rep("bernoulli", "a")
    for a in range(9):
        assert Fraction(str(residue_value(t, {"a": a, "b": 0, "k": 0}))) == eval_sequence("bernoulli", (a,))


def test_residue_rep_rejects_bad_input():
    U = Universe(params=("a",), aux=("z",))
    with pytest.raises(ValueError, match="auxiliary"):
        residue_rep("S2", [LinExpr.var("a"), LinExpr.var("a")], "w", U)
    with pytest.raises(ValueError, match="index argument"):
        residue_rep("S2", [LinExpr.var("a")], "z", U)


def test_kernel_series_of_stirling_second_kernel():
    t = _rep("S2", "ab")
    # z^(b-a-1)/((1-z)(1-2z)) at a=5, b=2 has coefficient S2(5,2)=15 at z^-1
    s = kernel_series(t, {"a": 5, "b": 2, "k": 0}, "z", 2)
    assert laurent_coeff(s, -1) == 15
    assert laurent_coeff(s, 0) == 31


def test_rewrite_sum_shapes():
    r = rsum("binom_stirling2")
    assert r.U.aux == ("z",) and r.U.params == ("n", "m")
    assert [s.kind for s in r.sequences] == [SequenceKind.STIRLING_SECOND]
    r = rsum("stirling2_convolution")
    assert r.U.aux == ("x", "y") and r.U.params == ("n", "m", "l")
    # power kernels take x, other single kernels z
    assert rsum("power_differences").U.aux == ("x",)
    # rational kernels are named first
    r = load_sum("sum(k, S1(n,k)*S2(k,m))")
    assert [(s.kind.value, s.aux) for s in r.sequences] == [("S1", "y"), ("S2", "x")]


def test_rewrite_sum_errors():
    with pytest.raises(dsl.DSLError):
        load_sum("sum(k, S2(k,m)^2)")
    with pytest.raises(dsl.DSLError):
        load_sum("sum(k, sin(k))")


def test_eval_sum_examples():
    assert eval_sum(rsum("binom_stirling2"), {"n": 3, "m": 2}) == 6
    assert eval_sum(rsum("double_factorial"), {"n": 2, "m": 0}) == 3
    assert eval_sum(rsum("signed_factorial_companion"), {"n": 2, "m": 1}) == -1


@pytest.mark.parametrize("name", ["binom_stirling2", "stirling2_convolution", "power_differences", "double_factorial", "signed_factorial", "q_stirling2", "bernoulli_binomial"])
def test_residue_value_matches_oracle_sum(name):
    r = rsum(name)
    rng = random.Random(7)
    for _ in range(25):
        P = {p: rng.randint(0, 5) for p in r.U.params}
        assert r.value(P) == eval_sum(r, P), P


def test_boundary_evidence_symbolic():
    ev = derivation("binom_stirling2").boundary
    assert ev.verdict == "vanishes-symbolically"
    assert "0 <= k <= n+1" in ev.witness
    assert all("fact(" not in d for d in derivation("bernoulli_addition").boundary.details)
    for name in ("q_stirling1", "q_stirling2", "signed_factorial", "power_differences"):
        assert derivation(name).boundary.verdict == "vanishes-symbolically", name


def test_boundary_unknown_without_finite_support():
    # sum_k 1 over k >= 0 telescopes with R = k, whose boundary never vanishes
    r = load_sum("sum(k=0..n, 1)")
    res = telescope(r.base, (), [Member(())])
    assert res.certificate == r.U.gen("k")
    assert boundary_vanishes(res, r).verdict == "unknown"
