"""Recurrences for q-Stirling sums over Q(q), then a numeric spot check."""

from fractions import Fraction

from resproof.prover import check_operator, derive_recurrence, eval_sum, load_sum, operator_text

SUMS = {
    "first kind": "sum(k, qbinom(k,m)*qS1(n,k)*(-1)^(n-k)*q^(-k))",
    "second kind": "sum(k, (-1)^(n-k)*qbinom(n,k)*qS2(k,m)*q^(-k))",
}

for label, text in SUMS.items():
    rsum = load_sum(text)
    der = derive_recurrence(rsum)
    print(f"{label}: {text}")
    print("  ", operator_text(der.result))
    print("   boundary:", der.boundary.verdict)
    # q^n and q^m appear as their own symbols; check the relation at q = 1/2
    pts = [{"n": a, "m": b} for a in range(5) for b in range(5)]
    bad = check_operator(der.result, lambda P: eval_sum(rsum, P, q=Fraction(1, 2)), pts, q=Fraction(1, 2))
    print("   failures at q = 1/2:", bad or "none", "\n")
