import json

import pytest

from cases import derivation, proof, rsum, same_operator
from resproof import dsl
from resproof.prover import (
    Strategy,
    check_certificate,
    check_operator,
    derive_recurrence,
    eval_sum,
    grid_max,
    load_sum,
    operator_text,
    prove_identity,
    reinterpret_aux_members,
    result_dict,
    result_from_dict,
)
from resproof.residue import eval_sequence
from resproof.telescope import TelescopeResult


def test_stirling_binomial_identity_is_proved():
    p = proof("binom_stirling2", 4)
    assert p.verdict == "proved" and p.route == "extended-zeilberger"
    assert p.boundary.verdict == "vanishes-symbolically"
    assert p.rhs_check["mode"] == "symbolic" and p.rhs_check["passed"]
    assert operator_text(p.result) == "(1)*L(n+1, m+1) + (-m - 2)*L(n, m+1) + (-1)*L(n, m) = 0"
    # initial faces: n = 0 or m = 0 with parameters up to 4
    pts = [tuple(iv["point"].values()) for iv in p.initial_values]
    assert sorted(pts) == sorted({(a, b) for a in range(5) for b in range(5) if a == 0 or b == 0})
    assert all(iv["lhs"] == iv["rhs"] for iv in p.initial_values)


def test_more_identities_are_proved():
    for name in ("power_differences", "double_factorial"):
        assert proof(name, 4).verdict == "proved", name


def test_false_identity_is_refuted_at_first_point():
    p = proof("false", 4)
    assert p.verdict == "refuted"
    assert p.counterexample == {"point": {"n": 2, "m": 1}, "lhs": "3", "rhs": "1"}
    assert eval_sum(rsum("binom_stirling2"), {"n": 2, "m": 1}) == 3 and eval_sequence("S2", (3, 1)) == 1


def test_search_failure_is_reported():
    d = derivation("stirling_inverse")
    assert not d.ok and d.result is None
    assert "no relation" in d.failure
    assert d.searched[0] == ["F(n+1, m+1)", "F(n+1, m)", "F(n, m+1)", "F(n, m)"]
    p = prove_identity("sum(k, S1(k,m)*S2(n+1,k+1)) == binom(n,m)", side=4)
    assert p.verdict == "inconclusive" and p.searched


def test_derivative_members_leave_the_proof_open():
    text = "sum(k, binom(n,k)*y^(n-k)*bernpoly(k,x)) == bernpoly(n,x+y)"
    p = prove_identity(text, strategy=Strategy(op_vars=("n",), shifts=((1,), (0,)), derivative=(((1,), "x"),)), side=4)
    assert p.verdict == "inconclusive"
    assert "derivative" in p.reason
    assert p.rhs_check["passed"]


def test_proof_json_is_deterministic():
    a = json.dumps(prove_identity(dsl.render(dsl.parse_identity("sum(k, binom(n,k)) == 2^n")), side=4).as_dict(), sort_keys=True)
    b = json.dumps(prove_identity("sum(k, binom(n,k)) == 2^n", side=4).as_dict(), sort_keys=True)
    assert a == b
    assert json.loads(a)["verdict"] == "proved"


def test_result_json_round_trip():
    res = derivation("stirling2_convolution").result
    back = result_from_dict(json.loads(json.dumps(result_dict(res))), rsum("stirling2_convolution"))
    assert isinstance(back, TelescopeResult)
    assert back.coefficients == res.coefficients and back.certificate == res.certificate
    assert check_certificate(back)
    bad = TelescopeResult(back.term, back.op_vars, back.members, back.coefficients, back.certificate * 2, back.qmode, back.aux)
    assert not check_certificate(bad)
    with pytest.raises(ValueError, match="variables"):
        result_from_dict(result_dict(res), rsum("binom_stirling2"))


def test_operator_annihilates_the_sum_on_a_grid():
    res = derivation("stirling2_convolution").result
    r = rsum("stirling2_convolution")
    grid = [{"n": a, "m": b, "l": c} for a in range(4) for b in range(3) for c in range(3)]
    assert check_operator(res, lambda P: eval_sum(r, P), grid) == []
    assert check_operator(res, lambda P: r.U.const(P["n"]), grid)


def test_aux_members_are_read_back_as_a_companion_sum():
    res = derivation("signed_factorial").result
    assert same_operator(res, {((2,), 1, None): 1, ((1,), 1, None): "m+1", ((0,), 0, None): "-(n+m+1)"})
    got = reinterpret_aux_members(res, rsum("signed_factorial_companion"))
    assert [(m.shift, b) for m, _, b in got] == [((2,), (1,)), ((1,), (0,))]
    with pytest.raises(ValueError, match="universe"):
        reinterpret_aux_members(res, rsum("stirling2_convolution"))
    # (m+1) S(n,m) + S(n,m+1) = (n+m+1) L(n,m), with L(n,m) = 0 once n > m
    L, S = rsum("signed_factorial"), rsum("signed_factorial_companion")
    for n in range(5):
        for m in range(5):
            lhs = (m + 1) * eval_sum(S, {"n": n, "m": m}) + eval_sum(S, {"n": n, "m": m + 1})
            assert lhs == (n + m + 1) * eval_sum(L, {"n": n, "m": m})
            if n > m:
                assert eval_sum(L, {"n": n, "m": m}) == 0


def test_route_can_be_forced():
    d = derive_recurrence(rsum("bernoulli_binomial"), Strategy(route="celine"))
    assert d.route == "sister-celine" and d.result.certificate == rsum("bernoulli_binomial").U.field.zero
    d = derive_recurrence(rsum("bernoulli_binomial"))
    assert d.analysis is not None and d.analysis.verdict == "certificate-forced-zero"


def test_load_sum_errors():
    with pytest.raises(dsl.DSLError):
        load_sum("binom(n,k)")
    with pytest.raises(dsl.DSLError):
        load_sum("sum(k, binom(n,k)*S2(k,m)) == S2(n+1,m+1)", params=("n",))


def test_grid_max_reads_environment(monkeypatch):
    assert grid_max() == 10
    monkeypatch.setenv("RT_GRID_MAX", "3")
    assert grid_max() == 3
    monkeypatch.setenv("RT_GRID_MAX", "zero")
    with pytest.raises(ValueError):
        grid_max()


@pytest.mark.parametrize(
    "text, op",
    [
        ("sum(k, binom(n,k)) == 2^n", "(1)*L(n+1) + (-2)*L(n) = 0"),
        ("sum(k, binom(n,k)*c^k) == (1+c)^n", "(1)*L(n+1) + (-c - 1)*L(n) = 0"),
        ("sum(k, binom(n,k)^2) == binom(2*n,n)", "(n + 1)*L(n+1) + (-4*n - 2)*L(n) = 0"),
    ],
)
def test_plain_hypergeometric_sums(text, op):
    p = prove_identity(text, side=4)
    assert p.verdict == "proved" and p.operator_text() == op
