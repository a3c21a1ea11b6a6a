"""Creative telescoping over families of similar hypergeometric terms.

Given a term ``F`` and members ``T_a`` (shifted copies of ``F``, optionally
multiplied by a power of an auxiliary variable or differentiated in a
continuous variable), find coefficients ``p_a`` free of the summation and
auxiliary variables together with a rational certificate ``R`` such that

    sum_a p_a T_a = R(k+1) F(k+1) - R(k) F(k).

Gosper's algorithm, Zeilberger's algorithm and Sister Celine's method are
special cases of the same linear-algebra core.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from sympy.polys.domains import QQ
from sympy.polys.fields import FracElement

from .algebra import as_poly, coeffs_in, is_zero, normalize_vector, row_reduce, solve_linear
from .hyperterm import (
    FallingProduct,
    HyperTerm,
    OpaqueKernel,
    Power,
    Universe,
    _q_exponent,
    _rational_constant,
    gosper_normal_form,
    shift_quotient,
    shift_ratfunc,
    sigma,
    similar_ratio,
)

__all__ = [
    "Member",
    "TelescopeResult",
    "TelescopeFailure",
    "member_ratio",
    "log_derivative",
    "telescope",
    "gosper",
    "zeilberger",
    "extended_zeilberger",
    "sister_celine",
    "sister_celine_basis",
    "box_shifts",
    "verify_core",
]


class TelescopeFailure(Exception):
    """No telescoping relation exists within the searched ansatz."""


@dataclass(frozen=True, order=True)
class Member:
    """``aux**aux_power * d/d(derivative) F(vars + shift)``."""

    shift: tuple[int, ...]
    aux_power: int = 0
    derivative: str | None = None

    def sort_key(self):
        return (self.shift, self.aux_power, self.derivative or "")

    def label(self, op_vars: Sequence[str], aux: str | None = None) -> str:
        parts = []
        for v, s in zip(op_vars, self.shift):
            parts.append(v if s == 0 else f"{v}{s:+d}")
        t = f"F({', '.join(parts)})"
        if self.derivative:
            t = f"d/d{self.derivative} {t}"
        if self.aux_power and aux:
            t = f"{aux}^{self.aux_power} {t}" if self.aux_power != 1 else f"{aux} {t}"
        return t


@dataclass(frozen=True)
class TelescopeResult:
    term: HyperTerm
    op_vars: tuple[str, ...]
    members: tuple[Member, ...]
    coefficients: tuple[FracElement, ...]
    certificate: FracElement
    qmode: bool = False
    aux: str | None = None

    @property
    def U(self) -> Universe:
        return self.term.U

    def nonzero(self) -> list[tuple[Member, FracElement]]:
        return [(m, c) for m, c in zip(self.members, self.coefficients) if not is_zero(c)]

    def check(self) -> bool:
        return verify_core(self.term, self.op_vars, self.members, self.coefficients, self.certificate, self.aux)


def box_shifts(bounds: Sequence[int]) -> list[tuple[int, ...]]:
    """All shift vectors with ``0 <= s_i <= bounds[i]``, in descending order."""
    pts = itertools.product(*(range(b + 1) for b in bounds))
    return sorted(pts, reverse=True)


def log_derivative(t: HyperTerm, var: str) -> FracElement:
    """``(d t/d var) / t`` for a continuous variable ``var``."""
    U = t.U
    x = U.gen(var)
    out = t.prefactor.diff(x) / t.prefactor
    for a, m in t.factors:
        if isinstance(a, Power):
            out = out + m * a.exponent.to_field(U) * a.base.diff(x) / a.base
        elif isinstance(a, OpaqueKernel):
            out = out + m * a.derivative(var, U)
        elif isinstance(a, FallingProduct) and not is_zero(a.base.diff(x)):
            raise ValueError(f"derivative of {a.text(U)} is not a similar term")
    return out


def member_ratio(F: HyperTerm, op_vars: Sequence[str], m: Member, aux: str | None) -> FracElement:
    """``T_m / F`` as a rational function."""
    U = F.U
    shifted = F.shift_many(dict(zip(op_vars, m.shift)))
    r = similar_ratio(shifted, F)
    if r is None:
        raise ValueError(f"{m} is not similar to the base term")
    if m.derivative:
        r = r * log_derivative(shifted, m.derivative)
    if m.aux_power:
        if aux is None:
            raise ValueError("aux power without an auxiliary variable")
        r = r * U.gen(aux) ** m.aux_power
    return r


def verify_core(F, op_vars, members, coefficients, R, aux=None) -> bool:
    """Exact check of ``sum p_a T_a/F == R(k+1) rho - R``."""
    U = F.U
    lhs = U.field.zero
    for m, p in zip(members, coefficients):
        if not is_zero(p):
            lhs = lhs + p * member_ratio(F, op_vars, m, aux)
    rho = shift_quotient(F, U.k)
    return is_zero(lhs - (shift_ratfunc(R, U, U.k, 1) * rho - R))


# --- core -----------------------------------------------------------------------


def _kname(U: Universe, qmode: bool) -> str:
    return U.qname(U.k) if qmode else U.k


def _split_k(f: FracElement, idx: int):
    """``f = cont * prim`` where ``prim`` is the k-dependent polynomial part of the denominator."""
    from .hyperterm import _split_content

    _, prim = _split_content(f.denom, idx)
    return prim


def _degree(f: FracElement, name: str) -> int:
    cs = coeffs_in(f, name)
    return max(cs) if cs else -1


def _order(f: FracElement, name: str) -> int:
    cs = coeffs_in(f, name)
    return min(cs) if cs else 0


def _degree_window(A, B1, polys, U: Universe, qmode: bool) -> tuple[int, int] | None:
    """Exponent window ``[lo, hi]`` for the unknown polynomial ``x``."""
    name = _kname(U, qmode)
    ca, cb = coeffs_in(A, name), coeffs_in(B1, name)
    a, b = max(ca), max(cb)
    c = max(_degree(p, name) for p in polys)
    same_lead = a == b and (qmode or is_zero(ca[a] - cb[b]))
    hi = c - a + (0 if qmode else 1) if same_lead else c - max(a, b)
    if a == b:
        if qmode:
            e = _q_exponent(cb[b] / ca[a], U)
            if e is not None:
                hi = max(hi, e)
        elif is_zero(ca[a] - cb[b]):
            cand = (cb.get(b - 1, U.field.zero) - ca.get(a - 1, U.field.zero)) / ca[a]
            r = _rational_constant(cand)
            if r is not None and r.denominator == 1 and r >= 0:
                hi = max(hi, int(r))
    if not qmode:
        return (0, hi) if hi >= 0 else None
    ta, tb = min(ca), min(cb)
    tc = min(_order(p, name) for p in polys if not is_zero(p))
    lo = tc - min(ta, tb)
    if ta == tb:
        e = _q_exponent(cb[tb] / ca[ta], U)
        if e is not None:
            lo = min(lo, e)
    if hi < lo:
        return None
    return lo, hi


def _p_constraints(rows, npc: int, free_names: Sequence[str], U: Universe):
    """Split constraint rows into rows over the coefficient field of ``p``."""
    F = U.field
    R = F.ring
    idxs = [U.index(v) for v in free_names if v in U.names]
    out = []
    for row in rows:
        den = R.one
        for e in row:
            if not is_zero(e):
                den = den.lcm(e.denom)
        polys = [as_poly(e * F.new(den, R.one)) if not is_zero(e) else R.zero for e in row]
        groups: dict[tuple, list] = {}
        for j, p in enumerate(polys):
            for m, c in p.terms():
                key = tuple(m[i] for i in idxs)
                mm = list(m)
                for i in idxs:
                    mm[i] = 0
                groups.setdefault(key, [dict() for _ in range(npc)])[j][tuple(mm)] = c
        for key in sorted(groups):
            out.append([F.new(R.from_dict(d), R.one) if d else F.zero for d in groups[key]])
    return out


def _complexity(vec: Sequence[FracElement]) -> tuple:
    degs = 0
    size = 0
    for v in vec:
        if not is_zero(v):
            degs += sum(v.numer.degrees()) + sum(v.denom.degrees())
            size += len(v.numer) + len(v.denom)
    return (degs, size)


def _choose(basis: Sequence[Sequence[FracElement]]) -> tuple[FracElement, ...]:
    """Prefer a vector using the leading member, then the simplest one."""
    cands = []
    for v in basis:
        try:
            nv, _ = normalize_vector(v)
        except ValueError:
            continue
        cands.append(nv)
    lead = [v for v in cands if not is_zero(v[0])]
    pool = lead or cands
    return min(pool, key=_complexity)


def telescope(
    F: HyperTerm,
    op_vars: Sequence[str],
    members: Sequence[Member],
    *,
    aux: str | None = None,
    free_of: Iterable[str] | None = None,
    telescoping: bool = True,
    fixed: Sequence[FracElement] | None = None,
) -> TelescopeResult:
    """Find ``p`` and ``R`` for the given members.

    ``free_of`` lists variables the coefficients must not depend on (by
    default the auxiliary variables and the continuous variables inside
    opaque kernels).  With
    ``telescoping=False`` the certificate is forced to zero (Sister Celine).
    ``fixed`` prescribes the coefficients, which turns the search into
    Gosper's decision procedure for the fixed combination.
    """
    U = F.U
    members = tuple(members)
    free = tuple(free_of) if free_of is not None else U.aux + _kernel_symbols(F)
    ratios = [member_ratio(F, op_vars, m, aux) for m in members]
    rho = shift_quotient(F, U.k) if telescoping else None
    p, Rc = _solve(U, rho, ratios, free, fixed)
    res = TelescopeResult(F, tuple(op_vars), members, p, Rc, U.q, aux)
    if not res.check():  # pragma: no cover - would indicate an algebra bug
        raise AssertionError("telescoping identity failed verification")
    return res


def _kernel_symbols(F: HyperTerm) -> tuple[str, ...]:
    U = F.U
    used = set()
    for a, _ in F.kernels():
        if a.arg is not None:
            used.update(v for v in U.cont if a.arg.diff(U.gen(v)) != 0)
    return tuple(v for v in U.cont if v in used)


def _solve(U: Universe, rho, ratios, free, fixed=None):
    """Linear-algebra core shared by every telescoping variant.

    ``rho`` is the shift quotient of the base term in ``k`` (``None`` forces
    a zero certificate) and ``ratios`` the member/base ratios.
    """
    qmode = U.q
    name = _kname(U, qmode)
    idx = U.index(name)
    field = U.field
    npc = len(ratios)

    d = field.one
    for r in ratios:
        prim = _split_k(r, idx)
        dp = d.numer
        g = dp.gcd(prim)
        d = field.new(dp * prim.exquo(g), field.ring.one)
    num = [r * d for r in ratios]

    K = U.gen(name)
    if rho is not None:
        rho1 = rho * d / sigma(d, U, U.k, 1, qmode)
        gp = gosper_normal_form(rho1, U, U.k, qmode)
        A = gp.u * gp.A
        B1 = sigma(gp.B, U, U.k, -1, qmode)
        C = gp.C
        polys = [C * a for a in num]
        window = _degree_window(A, B1, polys, U, qmode)
        if window is None:
            # the degree bound is negative; small ansatz before giving up
            window = (0, 4) if not qmode else (-2, 2)
    else:
        A = B1 = C = field.one
        polys = list(num)
        window = None
    xs = list(range(window[0], window[1] + 1)) if window else []
    lift = K ** max(0, -(xs[0] if xs else 0))
    cols: list[dict[int, FracElement]] = []
    for j in xs:
        Kj = K**j
        cols.append(coeffs_in((A * sigma(Kj, U, U.k, 1, qmode) - B1 * Kj) * lift, name))
    for p in polys:
        cols.append(coeffs_in(-p * lift, name))
    nx = len(xs)
    powers = sorted({e for c in cols for e in c})
    rows = [[c.get(e, field.zero) for c in cols] for e in powers]

    def solve_x(p):
        rhs = [-sum((r[nx + j] * p[j] for j in range(npc)), field.zero) for r in rows]
        if not nx:
            return () if all(is_zero(v) for v in rhs) else None
        return solve_linear([r[:nx] for r in rows], rhs, field.one).particular

    if fixed is not None:
        p = tuple(c if isinstance(c, FracElement) else field(QQ.convert(c)) for c in fixed)
        xvals = solve_x(p)
        if xvals is None:
            raise TelescopeFailure("not Gosper-summable")
    else:
        red, piv = row_reduce(rows, nx + npc, list(range(nx)))
        cons = [r[nx:] for r, pv in zip(red, piv) if pv == -1]
        if cons:
            kill = (U.k,) + tuple(free) + ((U.qname(U.k),) if qmode else ())
            prow = _p_constraints(cons, npc, kill, U)
            basis = solve_linear(prow, [field.zero] * len(prow), field.one).nullspace
        else:
            basis = tuple(tuple(field.one if i == j else field.zero for i in range(npc)) for j in range(npc))
        if not basis:
            raise TelescopeFailure("no relation within the ansatz")
        p = _choose(basis)
        xvals = solve_x(p)
        if xvals is None:  # pragma: no cover - guaranteed by elimination
            raise TelescopeFailure("inconsistent certificate system")
    x = sum((c * K**j for c, j in zip(xvals, xs)), field.zero)
    Rc = B1 * x / (C * d) if rho is not None else field.zero
    if fixed is None:
        p, fac = normalize_vector(p)
        Rc = Rc * fac
    return tuple(p), Rc


def gosper(rho, U: Universe | None = None) -> FracElement | None:
    """Rational ``R`` with ``R(k+1) rho(k) - R(k) = 1``, or ``None``.

    ``rho`` is a shift quotient in ``k`` or a :class:`HyperTerm`.  With such
    an ``R`` the term ``G = R*f`` satisfies ``G(k+1) - G(k) = f(k)``.
    """
    if isinstance(rho, HyperTerm):
        U = rho.U
        rho = shift_quotient(rho, U.k)
    elif U is None:
        names = tuple(str(s) for s in rho.field.symbols)
        U = Universe(params=tuple(n for n in names if n not in ("k", "q", "q_k")), q="q" in names)
    if rho.field is not U.field:
        rho = U.field.from_expr(rho.as_expr())
    try:
        _, R = _solve(U, rho, [U.one], (), fixed=(U.one,))
    except TelescopeFailure:
        return None
    return R


def zeilberger(F: HyperTerm, var: str, order: int, **kw) -> TelescopeResult:
    members = [Member((j,)) for j in range(order, -1, -1)]
    return telescope(F, (var,), members, **kw)


def extended_zeilberger(
    F: HyperTerm,
    op_vars: Sequence[str],
    shifts: Sequence[Sequence[int]],
    *,
    aux_degree: int = 0,
    aux: str | None = None,
    derivative: dict[tuple[int, ...], str] | None = None,
    **kw,
) -> TelescopeResult:
    """Telescoper over an arbitrary finite shift set.

    With ``aux_degree > 0`` each shift is paired with ``aux**j`` for
    ``0 <= j <= aux_degree`` and the coefficients stay free of ``aux``.
    ``derivative`` maps a shift to the variable that member is
    differentiated by.
    """
    derivative = derivative or {}
    shifts = sorted({tuple(s) for s in shifts}, reverse=True)
    members = []
    for s in shifts:
        for j in range(aux_degree, -1, -1) if aux_degree else (0,):
            members.append(Member(s, j, derivative.get(s)))
    if aux_degree and aux is None:
        aux = F.U.aux[0]
    return telescope(F, op_vars, members, aux=aux, **kw)


def sister_celine_basis(
    F: HyperTerm, op_vars: Sequence[str], shifts: Sequence[Sequence[int]], free_of: Sequence[str] | None = None
) -> tuple[tuple[Member, ...], tuple[tuple[FracElement, ...], ...]]:
    """Every ``k``-free ``p`` with ``sum p_a F(vars + a) = 0``, as a normalized nullspace basis."""
    U = F.U
    members = tuple(Member(s) for s in sorted({tuple(s) for s in shifts}, reverse=True))
    free = tuple(free_of) if free_of is not None else U.aux + _kernel_symbols(F)
    ratios = [member_ratio(F, op_vars, m, None) for m in members]
    name = _kname(U, U.q)
    idx = U.index(name)
    field = U.field
    d = field.one
    for r in ratios:
        prim = _split_k(r, idx)
        d = field.new(d.numer * prim.exquo(d.numer.gcd(prim)), field.ring.one)
    cols = [coeffs_in(r * d, name) for r in ratios]
    powers = sorted({e for c in cols for e in c})
    rows = [[c.get(e, field.zero) for c in cols] for e in powers]
    kill = (U.k,) + tuple(free) + ((U.qname(U.k),) if U.q else ())
    prow = _p_constraints(rows, len(members), kill, U)
    basis = solve_linear(prow, [field.zero] * len(prow), field.one).nullspace if prow else ()
    return members, tuple(normalize_vector(v)[0] for v in basis)


def sister_celine(F: HyperTerm, op_vars: Sequence[str], shifts: Sequence[Sequence[int]], **kw) -> TelescopeResult:
    """Pointwise relation ``sum p_a F(vars + a) = 0`` with ``p`` free of ``k``."""
    shifts = sorted({tuple(s) for s in shifts}, reverse=True)
    return telescope(F, op_vars, [Member(s) for s in shifts], telescoping=False, **kw)
