"""When the kernel of a_k is free of k and n, the certificate is forced to zero."""

from resproof.applicability import analyze_sum, residue_form
from resproof.prover import derive_recurrence, load_sum, operator_text
from resproof.telescope import TelescopeFailure, extended_zeilberger

# Bernoulli numbers: a_k = res_z B(z) z^(-k-1) with a k-free generating function
rsum = load_sum("sum(k, binom(n,k-m)*bernoulli(k))")
box = [(1, 1), (1, 0), (0, 1), (0, 0)]
rep = analyze_sum(rsum.base, ("n", "m"), box)
print("Bernoulli sum:", rep.verdict, "via", rep.route)
print("   skeleton GP form: A =", rep.gp.A.as_expr(), " B =", rep.gp.B.as_expr())
der = derive_recurrence(rsum)
print("  ", operator_text(der.result), "\n")

# a plain geometric factor: the analysis speaks about its residue form
plain = load_sum("sum(k, binom(n,k)*c^k)")
print("geometric sum:", analyze_sum(plain.base, ("n",), [(1,), (0,)]).verdict)
print("   plain term telescopes:", operator_text(extended_zeilberger(plain.base, ("n",), [(1,), (0,)])))
t = residue_form(plain.base)
print("   residue form:", t.text())
try:
    extended_zeilberger(t, ("n",), [(1,), (0,)])
except TelescopeFailure:
    print("   residue form: no telescoper in the same family, as predicted")
