import pytest
from hypothesis import given, settings, strategies as st

from resproof.algebra import is_zero
from resproof.hyperterm import (
    Binomial,
    BracketProduct,
    EvaluationPole,
    Factorial,
    FallingProduct,
    HyperTerm,
    LinExpr,
    Power,
    QBinomial,
    Universe,
    dispersion_set,
    gosper_normal_form,
    shift_quotient,
    similar_ratio,
)

U = Universe(params=("n", "m"), aux=("z",))
n, m, k, z = (U.gen(v) for v in ("n", "m", "k", "z"))
N, M, K = (LinExpr.of({v: 1}, 0) for v in ("n", "m", "k"))


def binom(a, b, pre=1):
    return HyperTerm.make(U, pre, [(Binomial(a, b), 1)])


def test_binomial_shift_quotient():
    assert shift_quotient(binom(N, K), "k") == (n - k) / (k + 1)


def test_stirling_kernels_shift_quotients():
    F2 = HyperTerm.make(U, 1, [(Power(z, K - N - 1), 1), (BracketProduct("z", K), -1)])
    assert shift_quotient(F2, "k") == z / (1 - (k + 1) * z)
    F1 = HyperTerm.make(U, 1, [(FallingProduct(z, N), 1), (Power(z, -K - 1), 1)])
    assert shift_quotient(F1, "n") == z - n


def test_similar_ratio():
    assert similar_ratio(binom(N + 1, K), binom(N, K)) == (n + 1) / (n + 1 - k)
    t = binom(N, K)
    assert similar_ratio(t, t) == U.one
    sign = HyperTerm.make(U, 1, [(Power(U.const(-1), K), 1)])
    assert similar_ratio(t, sign) is None


def test_dispersion_examples():
    assert dispersion_set(k + 3, k + 1, U, "k") == {2}
    assert dispersion_set(k, k, U, "k") == {0}
    assert dispersion_set(k, k**2 + 1, U, "k") == set()


def test_gp_form_examples():
    g = gosper_normal_form(U.const(2), U, "k")
    assert (g.u, g.A, g.B, g.C) == (U.const(2), U.one, U.one, U.one)
    r = k * (k + 3) / ((k + 1) * (k + 5))
    g = gosper_normal_form(r, U, "k")
    assert (g.A, g.B, g.C) == (k, k + 5, (k + 1) * (k + 2)) and g.u == U.one
    assert g.recompose(U) == r
    g = gosper_normal_form(-(k - m - n - 2) / (k + 1 - m), U, "k")
    assert (g.u, g.A, g.B, g.C) == (U.one, m + n + 2 - k, k + 1 - m, U.one)
    with pytest.raises(ValueError):
        gosper_normal_form(U.field.zero, U, "k")


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.integers(-4, 4), st.integers(0, 1)), min_size=0, max_size=3),
    st.lists(st.tuples(st.integers(-4, 4), st.integers(0, 1)), min_size=0, max_size=3),
    st.integers(-3, 3).filter(bool),
)
def test_gp_form_recomposes_and_is_shift_coprime(nums, dens, unit):
    r = U.const(unit)
    for a, p in nums:
        r = r * (k + a + p * n)
    for a, p in dens:
        r = r / (k + a + p * m)
    g = gosper_normal_form(r, U, "k")
    assert is_zero(g.recompose(U) - r)
    # A(k) and B(k+h) share no factor for h >= 0
    assert dispersion_set(g.A, g.B, U, "k") == set()


def test_evaluate_and_poles():
    t = binom(N, K)
    assert t.evaluate({"n": 4, "k": 2}).value == 6
    assert t.evaluate({"n": 4, "k": 5}).value == 0
    f = HyperTerm.make(U, 1, [(Factorial(K), 1)])
    with pytest.raises(EvaluationPole):
        f.evaluate({"n": 0, "m": 0, "k": -1})


def test_removable_rewrite_binomial():
    t = binom(N, K, 1 / (n + 1 - k))
    r = t.rewrite_removable()
    assert r.factors == ((Binomial(N + 1, K), 1),)
    assert r.prefactor == 1 / (n + 1)
    # the 0/0 point k = n+1 gets its limiting value
    assert r.evaluate({"n": 3, "k": 4}).value == U.const(1) / 4
    for kv in range(4):
        assert r.evaluate({"n": 3, "k": kv}).value == t.evaluate({"n": 3, "k": kv}).value


def test_removable_rewrite_q_binomial():
    V = Universe(params=("n",), q=True)
    q, qn, qk = V.gen("q"), V.gen("q_n"), V.gen("q_k")
    Nq, Kq = LinExpr.of({"n": 1}, 0), LinExpr.of({"k": 1}, 0)
    t = HyperTerm.make(V, 1 / (q * qn - qk), [(QBinomial(Nq, Kq), 1)])
    r = t.rewrite_removable()
    assert r.factors == ((QBinomial(Nq + 1, Kq), 1),)
    assert not is_zero(r.evaluate({"n": 2, "k": 3}).value)
    for kv in range(3):
        assert t.evaluate({"n": 2, "k": kv}).value == r.evaluate({"n": 2, "k": kv}).value
