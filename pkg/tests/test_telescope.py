import pytest
import sympy

from cases import derivation, rsum, same_operator
from resproof.hyperterm import Binomial, Factorial, HyperTerm, LinExpr, Power, Universe, shift_quotient, shift_ratfunc
from resproof.telescope import (
    Member,
    TelescopeFailure,
    extended_zeilberger,
    gosper,
    sister_celine,
    sister_celine_basis,
    telescope,
    verify_core,
    zeilberger,
)

n, m, l, k, z, q = sympy.symbols("n m l k z q")
U1 = Universe(params=("n",))
K1 = U1.gen("k")
N, K = LinExpr.var("n"), LinExpr.var("k")


def binom_nk(U=U1):
    return HyperTerm.make(U, 1, [(Binomial(N, K), 1)])


def test_gosper_examples():
    assert gosper((K1 + 1) ** 2 / K1, U1) == 1 / K1
    assert gosper(K1 / (K1 + 2), U1) == -(K1 + 1)
    assert gosper((U1.gen("n") - K1) / (K1 + 1), U1) is None


def test_verify_core_singleton():
    # k*k! has shift quotient (k+1)^2/k, summed by R = 1/k
    f = HyperTerm.make(U1, K1, [(Factorial(K), 1)])
    assert verify_core(f, (), [Member(())], [U1.one], 1 / K1)
    assert not verify_core(f, (), [Member(())], [U1.one], 2 / K1)
    assert gosper(f) == 1 / K1


def test_stirling_binomial_family_and_certificate():
    res = derivation("binom_stirling2").result
    assert same_operator(res, {(1, 1): 1, (0, 1): -(m + 2), (0, 0): -1})
    U = res.U
    want = U.field.from_expr(-k * z / ((n + 1 - k) * (1 - (m + 1) * z)))
    assert res.certificate == want
    assert verify_core(res.term, res.op_vars, res.members, res.coefficients, res.certificate, res.aux)
    assert not verify_core(res.term, res.op_vars, res.members, res.coefficients, res.certificate * U.gen("k"), res.aux)


def test_three_parameter_family():
    res = derivation("stirling2_convolution").result
    assert same_operator(res, {(0, 1, 0): -1, (0, 0, 1): -1, (0, 1, 1): -(m + 2 + l), (1, 1, 1): 1})


def test_singleton_family_is_gosper():
    base = rsum("stirling_inverse").base
    R = gosper(base)
    assert R is not None
    assert telescope(base, (), [Member(())]).certificate == R
    U = base.U
    rho = shift_quotient(base, "k")
    assert shift_ratfunc(R, U, "k", 1) * rho - R == U.one
    assert gosper(rsum("binom_stirling2").base) is None


def test_binomial_zeilberger_order_one():
    res = zeilberger(binom_nk(), "n", 1)
    assert same_operator(res, {(1,): 1, (0,): -2})
    assert res.check()


def test_aux_coefficients_and_certificate():
    res = derivation("signed_factorial").result
    assert same_operator(res, {((2,), 1, None): 1, ((1,), 1, None): m + 1, ((0,), 0, None): -(n + m + 1)})
    U = res.U
    expected = U.field.from_expr(-(n + m + 1) * k / ((n + m + 1 - k) * (n + m + 2 - k) * z))
    assert res.certificate == expected


def test_q_stirling_first_kind_relation_checks():
    res = derivation("q_stirling1").result
    assert res.check() and res.qmode
    assert len(res.nonzero()) == 3


def test_geometric_term_first_order():
    U = Universe(params=("n",))
    t = HyperTerm.make(U, 1, [(Power(U.const(2), LinExpr.of({"k": 1, "n": 1})), 1), (Binomial(N, K), 1)])
    res = extended_zeilberger(t, ("n",), [(1,), (0,)])
    assert same_operator(res, {(1,): 1, (0,): -6})


def test_no_relation_raises():
    # binom(n,k) alone is not annihilated by any k-free first order operator in n
    with pytest.raises(TelescopeFailure):
        telescope(binom_nk(), ("n",), [Member((1,)), Member((0,))], telescoping=False)


def test_sister_celine_pascal_basis():
    t = binom_nk()
    members, basis = sister_celine_basis(t, ("n", "k"), [(1, 1), (0, 1), (0, 0)])
    assert [mm.shift for mm in members] == [(1, 1), (0, 1), (0, 0)]
    assert basis == ((U1.one, -U1.one, -U1.one),)
    assert sister_celine_basis(t, ("n", "k"), [(0, 0)])[1] == ()


def test_sister_celine_chosen_vector():
    U = Universe(params=("n", "c"))
    c = U.gen("c")
    t = HyperTerm.make(U, 1, [(Binomial(N, K), 1), (Power(c, K), 1)])
    res = sister_celine(t, ("n", "k"), [(1, 1), (0, 1), (0, 0)])
    assert res.coefficients == (U.one, -U.one, -c)
    assert res.certificate == U.field.zero
