"""Shared sums, cached derivations and comparison helpers for the tests."""

from __future__ import annotations

from functools import lru_cache

import sympy

from resproof.algebra import is_zero, normalize_vector
from resproof.prover import Strategy, derive_recurrence, load_sum, prove_identity

SUMS = {
    "binom_stirling2": "sum(k, binom(n,k)*S2(k,m))",
    "stirling2_convolution": "sum(k, binom(n,k)*S2(k,l)*S2(n-k,m))",
    "stirling_inverse": "sum(k, S1(k,m)*S2(n+1,k+1))",
    "power_differences": "sum(k, binom(m,k)*k^n*(-1)^(m-k))",
    "double_factorial": "sum(k=-m..n, (-1)^k * binom(2*n,n+k) * S1(n+k,k+m))",
    "signed_factorial": "sum(k, binom(n+m,k)*(-1)^k*S2(n+m-k,n-k))",
    "signed_factorial_companion": "sum(k, binom(n+m+1,k)*(-1)^k*S2(n+m-k,n-k))",
    "q_stirling1": "sum(k, qbinom(k,m)*qS1(n,k)*(-1)^(n-k)*q^(-k))",
    "q_stirling2": "sum(k, (-1)^(n-k)*qbinom(n,k)*qS2(k,m)*q^(-k))",
    "bernoulli_addition": "sum(k, binom(n,k)*y^(n-k)*bernpoly(k,x))",
    "bernoulli_binomial": "sum(k, binom(n,k-m)*bernoulli(k))",
}

PARAMS = {"stirling2_convolution": ("n", "m", "l")}

STRATEGIES = {
    "signed_factorial": Strategy(op_vars=("m",), shifts=((2,), (1,), (0,)), aux_degree=1),
    "bernoulli_addition": Strategy(op_vars=("n",), shifts=((1,), (0,)), derivative=(((1,), "x"),)),
}

IDENTITIES = {
    "binom_stirling2": "sum(k, binom(n,k)*S2(k,m)) == S2(n+1,m+1)",
    "power_differences": "sum(k, binom(m,k)*k^n*(-1)^(m-k)) == fact(m)*S2(n,m)",
    "double_factorial": "sum(k=-m..n, (-1)^k * binom(2*n,n+k) * S1(n+k,k+m)) == dfact(2*n-1) when m==0 else 0",
    "false": "sum(k, binom(n,k)*S2(k,m)) == S2(n+1,m)",
}


@lru_cache(maxsize=None)
def rsum(name: str):
    return load_sum(SUMS[name], PARAMS.get(name))


@lru_cache(maxsize=None)
def derivation(name: str):
    return derive_recurrence(rsum(name), STRATEGIES.get(name))


@lru_cache(maxsize=None)
def proof(name: str, side: int = 10):
    return prove_identity(IDENTITIES[name], side=side)


def operator_map(result) -> dict:
    """``{(shift, aux_power, derivative): coefficient}`` after normalization."""
    vec, _ = normalize_vector(result.coefficients)
    return {(m.shift, m.aux_power, m.derivative): c for m, c in zip(result.members, vec) if not is_zero(c)}


def same_operator(result, expected: dict) -> bool:
    """Compare with ``{shift: sympy expression}`` up to normalization.

    Keys may be plain shifts or ``(shift, aux_power, derivative)`` triples.
    """
    U = result.U
    keyed = {}
    for key, expr in expected.items():
        if not isinstance(key[0], tuple):
            key = (tuple(key), 0, None)
        keyed[key] = U.field.from_expr(sympy.sympify(expr, locals=_LOCALS))
    order = [(m.shift, m.aux_power, m.derivative) for m in result.members]
    keys = [k for k in order if k in keyed] + [k for k in keyed if k not in order]
    vec, _ = normalize_vector([keyed[k] for k in keys])
    want = {k: c for k, c in zip(keys, vec) if not is_zero(c)}
    return want == operator_map(result)


_LOCALS = {name: sympy.Symbol(name) for name in ("n", "m", "l", "k", "q", "x", "y", "z", "q_n", "q_m", "q_l")}
