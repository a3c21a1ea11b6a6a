import sympy

from cases import rsum
from resproof.applicability import (
    FORCED_ZERO,
    K_DEPENDENT,
    K_FREE,
    POSSIBLE,
    analyze_sum,
    cfinite_witness,
    residue_form,
    skeleton_ratio,
    split_kernel,
)
from resproof.hyperterm import Universe
from resproof.prover import eval_sum, load_sum
from resproof.residue import residue_value
from resproof.telescope import TelescopeFailure, extended_zeilberger, sister_celine

BOX2 = [(1, 1), (1, 0), (0, 1), (0, 0)]


def _forced_zero_agrees(base, op_vars, shifts):
    """A direct telescoping search on the same family finds no nonzero certificate."""
    try:
        res = extended_zeilberger(base, op_vars, shifts)
    except TelescopeFailure:
        return True
    return res.certificate == base.U.field.zero


def test_bernoulli_binomial_sum_is_forced_zero():
    r = rsum("bernoulli_binomial")
    rep = analyze_sum(r.base, ("n", "m"), BOX2)
    assert (rep.kernel_class, rep.verdict, rep.route) == (K_FREE, FORCED_ZERO, "sister-celine")
    U = r.U
    n, m, k = (U.gen(v) for v in "nmk")
    assert rep.gp.A == m + n + 2 - k and rep.gp.B == k + 1 - m
    assert rep.skeleton == -(k - m - n - 2) / (k + 1 - m)
    assert _forced_zero_agrees(r.base, ("n", "m"), BOX2)


def test_geometric_sum_is_forced_zero_in_residue_form():
    r = load_sum("sum(k, binom(n,k)*c^k)")
    rep = analyze_sum(r.base, ("n",), [(1,), (0,)])
    assert (rep.kernel_class, rep.verdict) == (K_FREE, FORCED_ZERO)
    t = residue_form(r.base)
    assert t.U.aux == ("x",)
    for N in range(5):
        total = sum((residue_value(t, {"n": N, "k": kk}) for kk in range(N + 1)), t.U.field.zero)
        assert total.as_expr() == eval_sum(r, {"n": N}).as_expr()
    assert _forced_zero_agrees(t, ("n",), [(1,), (0,)])
    assert _forced_zero_agrees(t, ("n",), [(2,), (1,), (0,)])
    # the plain geometric form still has the classical telescoper
    assert extended_zeilberger(r.base, ("n",), [(1,), (0,)]).certificate != r.U.field.zero


def test_geometric_sum_pascal_lift():
    r = load_sum("sum(k, binom(n,k)*c^k)")
    res = sister_celine(r.base, ("n", "k"), [(1, 1), (0, 1), (0, 0)])
    c = r.U.gen("c")
    assert [m.shift for m in res.members] == [(1, 1), (0, 1), (0, 0)]
    assert res.coefficients == (r.U.one, -r.U.one, -c)


def test_residue_form_leaves_other_terms_alone():
    r = rsum("binom_stirling2")
    assert residue_form(r.base) is r.base
    r = load_sum("sum(k, binom(n,k)*2^(2*k))")
    assert residue_form(r.base) is r.base


def test_stirling_kernel_is_k_dependent():
    r = rsum("binom_stirling2")
    rep = analyze_sum(r.base, ("n", "m"), [(1, 1), (0, 1), (0, 0)])
    assert (rep.kernel_class, rep.verdict, rep.route) == (K_DEPENDENT, POSSIBLE, "extended-zeilberger")
    assert "changes under shifts of m" in rep.reason


def test_q_sums_are_outside_the_class():
    rep = analyze_sum(rsum("q_stirling2").base, ("n", "m"), BOX2)
    assert rep.verdict == POSSIBLE and "q-analogues" in rep.reason


def test_split_kernel_recomposes():
    base = rsum("bernoulli_binomial").base
    F, K = split_kernel(base)
    assert not any(F.involves(a) for a in base.U.aux)
    assert (F * K).prefactor == base.prefactor and sorted(map(str, (F * K).factors)) == sorted(map(str, base.factors))


def test_skeleton_clears_member_denominators():
    base = rsum("bernoulli_binomial").base
    U = base.U
    n, m, k = (U.gen(v) for v in "nmk")
    F, _ = split_kernel(base)
    # binom(n, k-m) shifted in n brings in 1/(n+1-k+m); it is cleared before the quotient
    assert skeleton_ratio(F, ("n",), [(1,), (0,)]) == (n + m + 1 - k) / (k + 1 - m)


def test_cfinite_witness():
    U = Universe(params=("n",))
    k, n = U.gen("k"), U.gen("n")
    assert cfinite_witness((n - k) / (k + 1), U) == "not C-finite"
    assert cfinite_witness(U.const(3), U) == "possibly C-finite"
    # (k+2)/(k+1) is the quotient of the polynomial k+1
    assert cfinite_witness((k + 2) / (k + 1), U) == "possibly C-finite"
    assert cfinite_witness((k + 1) / (k + 3), U) == "not C-finite"
    f = sympy.Symbol("k")
    assert cfinite_witness(Universe(params=()).field.from_expr(2 * f / f)) == "possibly C-finite"
