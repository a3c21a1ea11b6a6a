"""Prove sum_k binom(n,k) S2(k,m) = S2(n+1,m+1) and look inside the proof."""

from resproof.prover import eval_sum, load_sum, operator_text, prove_identity

IDENTITY = "sum(k, binom(n,k)*S2(k,m)) == S2(n+1,m+1)"

cert = prove_identity(IDENTITY, side=6)
print(f"{cert.identity}\n  verdict: {cert.verdict}\n")

# S2(k,m) is the residue in z of z^(m-k-1)/((1-z)...(1-mz)), so the summand
# becomes a hypergeometric term in n, m, k and z
res = cert.result
print("residue form of the summand:", res.term.text())
print("recurrence:", operator_text(res))
print("certificate R:", res.certificate.as_expr())
print("boundary:", cert.boundary.witness, "\n")

rsum = load_sum(IDENTITY)
print("n\\m " + " ".join(f"{m:>5}" for m in range(5)))
for n in range(6):
    print(f"{n:3} " + " ".join(f"{str(eval_sum(rsum, {'n': n, 'm': m})):>5}" for m in range(5)))
