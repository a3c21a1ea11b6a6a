"""When does telescoping in the residue method degenerate?

For a summand ``F(n, k) * a_k`` where ``a_k = res_z K(z) z**(-k-1)`` and the
kernel ``K`` involves neither ``k`` nor the shifted parameters, a telescoping
relation over a family of shifts of ``F`` can only have a nonzero
certificate if the combination ``g(k) = sum p_a F(n+a, k)`` has a
GP representation with ``A = B = 1``.  When that fails the certificate is
forced to vanish and the search reduces to Sister Celine's method.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from sympy.polys.fields import FracElement

from .algebra import is_zero
from .hyperterm import (
    GPForm,
    HyperTerm,
    OpaqueKernel,
    Power,
    Universe,
    _split_content,
    gosper_normal_form,
    shift_quotient,
    sigma,
    similar_ratio,
)

__all__ = [
    "ApplicabilityReport",
    "split_kernel",
    "residue_form",
    "skeleton_ratio",
    "analyze_sum",
    "cfinite_witness",
]

K_FREE = "k-free generating function"
K_DEPENDENT = "k-dependent kernel"
POSSIBLE = "telescoping-possible"
FORCED_ZERO = "certificate-forced-zero"


@dataclass(frozen=True)
class ApplicabilityReport:
    kernel_class: str
    verdict: str
    route: str
    skeleton: FracElement | None = None
    gp: GPForm | None = None
    reason: str = ""
    U: Universe | None = None

    def as_dict(self) -> dict:
        out = {"class": self.kernel_class, "verdict": self.verdict, "route": self.route, "reason": self.reason}
        if self.gp is not None:
            t = lambda f: str(f.as_expr())  # noqa: E731
            out["skeleton_ratio"] = t(self.skeleton)
            out["gp"] = {"u": t(self.gp.u), "A": t(self.gp.A), "B": t(self.gp.B), "C": t(self.gp.C)}
        return out


def _involves_any(f: FracElement, U: Universe, names) -> bool:
    idx = [U.index(v) for v in names if v in U.names]
    return any(f.numer.degree(i) > 0 or f.denom.degree(i) > 0 for i in idx)


def split_kernel(base: HyperTerm) -> tuple[HyperTerm, HyperTerm]:
    """``base = F * K`` with ``K`` collecting everything that involves an aux variable.

    Without aux variables, ``K`` collects the powers whose exponent involves
    ``k`` (a geometric ``a_k``).
    """
    U = base.U
    aux = U.aux

    def is_kernel(a) -> bool:
        if aux:
            if isinstance(a, OpaqueKernel):
                return True
            if isinstance(a, Power):
                return _involves_any(a.base, U, aux)
            return getattr(a, "aux", None) in aux or _involves_any(getattr(a, "base", U.one), U, aux)
        return isinstance(a, Power) and a.exponent.coeff(U.k) != 0

    fk = [(a, m) for a, m in base.factors if not is_kernel(a)]
    kk = [(a, m) for a, m in base.factors if is_kernel(a)]
    F = U.field
    pf, pk = F.one, F.one
    for poly, sgn in ((base.prefactor.numer, 1), (base.prefactor.denom, -1)):
        c, facs = poly.factor_list()
        pf = pf * F(c) ** sgn
        for f, e in facs:
            fe = F.new(f, F.ring.one) ** (e * sgn)
            if aux and _involves_any(fe, U, aux):
                pk = pk * fe
            else:
                pf = pf * fe
    return HyperTerm.make(U, pf, fk), HyperTerm.make(U, pk, kk)


def residue_form(base: HyperTerm, aux: str = "x") -> HyperTerm:
    """``base`` with its geometric factor ``c**(k+s)`` as ``res_x x**(-k-s-1) / (1 - c*x)``.

    The analysis of a plain geometric ``a_k`` is a statement about this form,
    which agrees with ``base`` wherever ``k + s >= 0``.  Terms that already
    carry auxiliary variables, or whose geometric factors do not combine to
    a single ``c**(k+s)``, are returned unchanged.
    """
    U = base.U
    if U.aux or U.q:
        return base
    F, K = split_kernel(base)
    exps = {a.exponent.scale(m) for a, m in K.factors}
    if len(exps) != 1 or not is_zero(K.prefactor - 1):
        return base
    (e,) = exps
    if e.coeff(U.k) != 1:
        return base
    while aux in U.names:
        aux += "'"
    V = Universe(U.params, U.k, (aux,), U.cont, U.q)
    conv = lambda f: V.field.from_expr(f.as_expr())  # noqa: E731
    c = V.one
    for a, m in K.factors:
        c = c * conv(a.base) ** m
    x = V.gen(aux)
    facs = [(replace(a, base=conv(a.base)) if isinstance(a, Power) else a, m) for a, m in F.factors]
    facs.append((Power(x, -e - 1), 1))
    return HyperTerm.make(V, conv(F.prefactor) / (1 - c * x), facs)


def _kernel_class(K: HyperTerm, op_vars: Sequence[str]) -> tuple[str, str]:
    U = K.U
    if len(U.aux) > 1:
        return K_DEPENDENT, "more than one auxiliary variable"
    if U.aux:
        z = U.gen(U.aux[0])
        if not is_zero(shift_quotient(K, U.k) - 1 / z):
            return K_DEPENDENT, f"kernel {K.text()} depends on {U.k} beyond {U.aux[0]}^(-{U.k})"
    for v in op_vars:
        if not is_zero(shift_quotient(K, v) - 1):
            return K_DEPENDENT, f"kernel {K.text()} changes under shifts of {v}"
    return K_FREE, "kernel is free of the summation index and the shifted parameters"


def skeleton_ratio(F: HyperTerm, op_vars: Sequence[str], shifts: Sequence[Sequence[int]]) -> FracElement:
    """Coefficient-free part of ``g(k+1)/g(k)`` for ``g = sum p_a F(n+a, k)``.

    Every member is ``F * r_a`` with ``r_a`` rational; over the common
    denominator ``d`` of the ``r_a`` we get ``g = (F/d) * P`` with ``P``
    polynomial in ``k``, and the skeleton is the shift quotient of ``F/d``.
    """
    U = F.U
    idx = U.index(U.k)
    d = U.field.ring.one
    for s in shifts:
        r = similar_ratio(F.shift_many(dict(zip(op_vars, s))), F)
        if r is None:
            raise ValueError(f"shift {tuple(s)} is not similar to the base term")
        _, prim = _split_content(r.denom, idx)
        d = d * prim.exquo(d.gcd(prim))
    dd = U.field.new(d, U.field.ring.one)
    return shift_quotient(F, U.k) * dd / sigma(dd, U, U.k, 1, False)


def analyze_sum(base: HyperTerm, op_vars: Sequence[str], shifts: Sequence[Sequence[int]]) -> ApplicabilityReport:
    """Decide whether the certificate over ``shifts`` is forced to zero."""
    U = base.U
    if U.q:
        return ApplicabilityReport(K_DEPENDENT, POSSIBLE, "extended-zeilberger", reason="q-analogues are outside the analysed class", U=U)
    F, K = split_kernel(base)
    cls, why = _kernel_class(K, op_vars)
    if cls == K_DEPENDENT:
        return ApplicabilityReport(cls, POSSIBLE, "extended-zeilberger", reason=f"analysis not applicable: {why}", U=U)
    sk = skeleton_ratio(F, op_vars, shifts)
    gp = gosper_normal_form(sk, U, U.k)
    trivial = gp.A.numer.is_ground and gp.B.numer.is_ground
    if trivial:
        return ApplicabilityReport(cls, POSSIBLE, "extended-zeilberger", sk, gp, "A = B = 1 in the skeleton GP form", U)
    return ApplicabilityReport(
        cls, FORCED_ZERO, "sister-celine", sk, gp, f"skeleton GP form has A = {gp.A.as_expr()}, B = {gp.B.as_expr()}", U
    )


def cfinite_witness(rho: FracElement, U: Universe | None = None) -> str:
    """``"not C-finite"`` when the GP form of ``rho`` has ``A != 1`` or ``B != 1``."""
    if U is None:
        names = tuple(str(s) for s in rho.field.symbols)
        U = Universe(params=tuple(n for n in names if n != "k"))
    if rho.field is not U.field:
        rho = U.field.from_expr(rho.as_expr())
    gp = gosper_normal_form(rho, U, U.k)
    if gp.A.numer.is_ground and gp.B.numer.is_ground:
        return "possibly C-finite"
    return "not C-finite"
