"""Exact arithmetic foundation.

Multivariate polynomials and rational functions are sympy's sparse
``PolyElement`` / ``FracElement`` over ``QQ`` (gmpy-backed).  The formal
symbol ``q`` is an ordinary generator of the field, so ``Q(q)`` is simply a
field that contains ``q``.  This module adds the pieces the rest of the
package needs on top: canonical normalisation, exact linear solving over
fraction fields, integer roots, truncated Laurent series and a canonical
sparse text form for serialisation.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Sequence

import sympy
from sympy.polys.domains import QQ
from sympy.polys.fields import FracElement, FracField, field as _field
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyElement

__all__ = [
    "CoeffField",
    "LaurentSeries",
    "LinearSolution",
    "make_field",
    "ratfunc_normalize",
    "poly_gcd",
    "solve_linear",
    "row_reduce",
    "integer_roots",
    "laurent_invert",
    "laurent_coeff",
    "series_exp",
    "series_from_ratfunc",
    "coeffs_in",
    "is_zero",
    "poly_text",
    "ratfunc_text",
    "parse_ratfunc",
    "normalize_vector",
]


class CoeffField(str, enum.Enum):
    """The closed set of coefficient fields the engine works over."""

    Q = "Q"
    QQ_q = "Q(q)"


@lru_cache(maxsize=None)
def make_field(names: tuple[str, ...]) -> FracField:
    """Rational function field over QQ in ``names`` (grlex, order as given)."""
    if not names:
        names = ("_",)
    return _field(",".join(names), QQ, grlex)[0]


def is_zero(x: Any) -> bool:
    if isinstance(x, FracElement):
        return x.numer.is_zero
    if isinstance(x, PolyElement):
        return x.is_zero
    return x == 0


def ratfunc_normalize(num: PolyElement, den: PolyElement) -> FracElement:
    """Coprime canonical representative of ``num/den``."""
    if den.is_zero:
        raise ZeroDivisionError("division by zero polynomial")
    F = make_field(tuple(str(g) for g in num.ring.gens))
    return F.new(num.set_ring(F.ring), den.set_ring(F.ring))


def poly_gcd(a: PolyElement, b: PolyElement) -> PolyElement:
    """Monic (w.r.t. the ring's monomial order) greatest common divisor."""
    if a.is_zero and b.is_zero:
        return a
    g = a.gcd(b)
    return g.monic()


# --- linear algebra ----------------------------------------------------------


def _size(x: Any) -> int:
    if isinstance(x, FracElement):
        return len(x.numer) + len(x.denom)
    return 1


def row_reduce(
    rows: Sequence[Sequence[Any]],
    ncols: int,
    column_order: Sequence[int] | None = None,
) -> tuple[list[list[Any]], list[int]]:
    """Gauss-Jordan elimination over a field.

    Columns are eliminated in ``column_order`` (default: left to right); a
    pivot is chosen among the remaining rows with the simplest entry.  Returns
    the reduced rows (zero rows dropped) and the pivot column of each row.
    """
    work = [list(r) for r in rows if any(not is_zero(c) for c in r)]
    order = list(column_order) if column_order is not None else list(range(ncols))
    pivots: list[int] = []
    done: list[list[Any]] = []
    for col in order:
        cands = [i for i, r in enumerate(work) if not is_zero(r[col])]
        if not cands:
            continue
        i = min(cands, key=lambda j: (_size(work[j][col]), j))
        prow = work.pop(i)
        inv = 1 / prow[col]
        prow = [c * inv for c in prow]
        for r in work:
            f = r[col]
            if not is_zero(f):
                for j in range(ncols):
                    if not is_zero(prow[j]):
                        r[j] = r[j] - f * prow[j]
        for r in done:
            f = r[col]
            if not is_zero(f):
                for j in range(ncols):
                    if not is_zero(prow[j]):
                        r[j] = r[j] - f * prow[j]
        done.append(prow)
        pivots.append(col)
        work = [r for r in work if any(not is_zero(c) for c in r)]
    # rows left in `work` have nonzero entries only outside column_order
    for r in work:
        done.append(r)
        pivots.append(-1)
    return done, pivots


@dataclass(frozen=True)
class LinearSolution:
    particular: tuple | None
    nullspace: tuple[tuple, ...]


def solve_linear(matrix: Sequence[Sequence[Any]], rhs: Sequence[Any], one: Any = 1) -> LinearSolution:
    """Exact solution of ``matrix @ x = rhs`` over a field.

    ``one`` is the unit of the field, used to build solution vectors when
    the entries are plain rationals.
    """
    nrows = len(matrix)
    ncols = len(matrix[0]) if nrows else 0
    if nrows and isinstance(matrix[0][0], FracElement):
        one = matrix[0][0].field.one
    zero = one * 0
    aug = [list(matrix[i]) + [rhs[i]] for i in range(nrows)]
    red, piv = row_reduce(aug, ncols + 1, list(range(ncols)))
    consistent = all(p != -1 for p in piv)
    free = [j for j in range(ncols) if j not in piv]
    basis = []
    for f in free:
        v = [zero] * ncols
        v[f] = one
        for r, p in zip(red, piv):
            if p >= 0:
                v[p] = -r[f]
        basis.append(tuple(v))
    part = None
    if consistent:
        v = [zero] * ncols
        for r, p in zip(red, piv):
            v[p] = r[ncols]
        part = tuple(v)
    return LinearSolution(part, tuple(basis))


# --- integer roots -----------------------------------------------------------


def integer_roots(p: PolyElement) -> set[int]:
    """Integer roots of a nonzero univariate polynomial over QQ."""
    if p.is_zero:
        raise ValueError("integer_roots of the zero polynomial")
    used = [i for i, d in enumerate(p.degrees()) if d > 0]
    if len(used) > 1:
        raise ValueError("integer_roots expects a univariate polynomial")
    if not used:
        return set()
    x = used[0]
    coeffs = {m[x]: c for m, c in p.terms()}
    _, prim = p.clear_denoms()
    coeffs = {m[x]: int(c) for m, c in prim.terms()}
    roots = set()
    low = min(coeffs)
    if low > 0:
        roots.add(0)
    a0 = abs(coeffs[low])
    cands = sympy.divisors(a0)
    deg = max(coeffs)
    for d in cands:
        for r in (d, -d):
            acc = 0
            for e in range(deg, low - 1, -1):
                acc = acc * r + coeffs.get(e, 0)
            if acc == 0:
                roots.add(r)
    return roots


# --- helpers on sparse polynomials --------------------------------------------


def coeffs_in(f: FracElement | PolyElement, var: str) -> dict[int, Any]:
    """Coefficients of ``f`` as a polynomial in ``var``.

    The denominator of ``f`` must be free of ``var``; coefficients are
    returned as elements of the same field (free of ``var``).
    """
    if isinstance(f, FracElement):
        F = f.field
        num, den = f.numer, f.denom
    else:
        F = make_field(tuple(str(g) for g in f.ring.gens))
        num, den = f.set_ring(F.ring), F.ring.one
    idx = F.symbols.index(sympy.Symbol(var)) if sympy.Symbol(var) in F.symbols else None
    if idx is None:
        return {0: F.new(num, den)} if not num.is_zero else {}
    if den.degree(idx) > 0:
        raise ValueError(f"denominator depends on {var}")
    groups: dict[int, dict] = {}
    for m, c in num.terms():
        e = m[idx]
        mm = m[:idx] + (0,) + m[idx + 1 :]
        groups.setdefault(e, {})[mm] = c
    R = F.ring
    return {e: F.new(R.from_dict(d), den) for e, d in groups.items()}


# --- truncated Laurent series -------------------------------------------------


@dataclass(frozen=True)
class LaurentSeries:
    """``sum(coeffs[i] * t**(valuation+i))`` known through ``t**order``."""

    valuation: int
    coeffs: tuple
    order: int
    one: Any = 1

    def __post_init__(self):
        cs = list(self.coeffs)
        v = self.valuation
        while cs and is_zero(cs[0]):
            cs.pop(0)
            v += 1
        if not cs:
            v = self.order + 1
        cs = cs[: max(0, self.order - v + 1)]
        object.__setattr__(self, "coeffs", tuple(cs))
        object.__setattr__(self, "valuation", v)

    @property
    def zero(self):
        return self.one * 0

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, i: int):
        return laurent_coeff(self, i)

    def _dense(self, lo: int, hi: int) -> list:
        return [self._get(i) for i in range(lo, hi + 1)]

    def _get(self, i: int):
        j = i - self.valuation
        if 0 <= j < len(self.coeffs):
            return self.coeffs[j]
        return self.zero

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        order = min(self.order, other.order)
        lo = min(self.valuation, other.valuation)
        cs = [self._get(i) + other._get(i) for i in range(lo, order + 1)]
        return LaurentSeries(lo, tuple(cs), order, self.one)

    def __neg__(self) -> "LaurentSeries":
        return LaurentSeries(self.valuation, tuple(-c for c in self.coeffs), self.order, self.one)

    def __sub__(self, other: "LaurentSeries") -> "LaurentSeries":
        return self + (-other)

    def scale(self, c) -> "LaurentSeries":
        return LaurentSeries(self.valuation, tuple(c * a for a in self.coeffs), self.order, self.one)

    def shift(self, e: int) -> "LaurentSeries":
        """Multiply by ``t**e``."""
        return LaurentSeries(self.valuation + e, self.coeffs, self.order + e, self.one)

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        # a zero series carries valuation order+1, so this bound stays valid
        order = min(self.order + other.valuation, other.order + self.valuation)
        if self.is_zero() or other.is_zero():
            return LaurentSeries(order + 1, (), order, self.one)
        v = self.valuation + other.valuation
        n = order - v + 1
        a, b = self.coeffs, other.coeffs
        cs = []
        for i in range(n):
            acc = self.zero
            for j in range(max(0, i - len(b) + 1), min(i, len(a) - 1) + 1):
                acc = acc + a[j] * b[i - j]
            cs.append(acc)
        return LaurentSeries(v, tuple(cs), order, self.one)

    def inverse(self) -> "LaurentSeries":
        return laurent_invert(self)

    def truncate(self, order: int) -> "LaurentSeries":
        return LaurentSeries(self.valuation, self.coeffs, min(order, self.order), self.one)


def laurent_invert(s: LaurentSeries) -> LaurentSeries:
    if s.is_zero():
        raise ZeroDivisionError("cannot invert a series that is zero to its truncation order")
    v = s.valuation
    a = s.coeffs
    n = s.order - v + 1
    inv0 = 1 / a[0]
    b = [inv0]
    for i in range(1, n):
        acc = s.zero
        for j in range(1, min(i, len(a) - 1) + 1):
            acc = acc + a[j] * b[i - j]
        b.append(-acc * inv0)
    return LaurentSeries(-v, tuple(b), s.order - 2 * v, s.one)


def laurent_coeff(s: LaurentSeries, i: int):
    if i > s.order:
        raise ValueError("coefficient beyond truncation")
    return s._get(i)


def series_exp(c, order: int, one=1) -> LaurentSeries:
    """``exp(c*t)`` through ``t**order``."""
    cs = []
    term = one
    for j in range(order + 1):
        cs.append(term)
        term = term * c / (j + 1)
    return LaurentSeries(0, tuple(cs), order, one)


def series_from_ratfunc(f: FracElement, var: str, order: int) -> LaurentSeries:
    """Laurent expansion of ``f`` in ``var`` through ``var**order``.

    Coefficients are elements of ``f.field`` free of ``var``.
    """
    F = f.field
    one = F.one
    num = coeffs_in(F.new(f.numer, F.ring.one), var)
    den = coeffs_in(F.new(f.denom, F.ring.one), var)
    dv = min(den)
    nv = min(num) if num else 0
    if not num:
        return LaurentSeries(order + 1, (), order, one)
    # t^(nv-dv) * (N/t^nv) / (D/t^dv); both quotients are power series
    need = order - (nv - dv)
    if need < 0:
        return LaurentSeries(order + 1, (), order, one)
    ns = LaurentSeries(0, tuple(num.get(nv + i, one * 0) for i in range(need + 1)), need, one)
    ds = LaurentSeries(0, tuple(den.get(dv + i, one * 0) for i in range(need + 1)), need, one)
    return (ns * laurent_invert(ds)).shift(nv - dv)


# --- canonical text -----------------------------------------------------------


def _coef_text(c) -> str:
    c = QQ.convert(c)
    num, den = int(c.numerator), int(c.denominator)
    return str(num) if den == 1 else f"{num}/{den}"


def poly_text(p: PolyElement, rename: dict[str, str] | None = None) -> str:
    """Canonical sparse text: ``coef*var^e*...`` terms in the ring's order."""
    if p.is_zero:
        return "0"
    names = [str(g) for g in p.ring.gens]
    if rename:
        names = [rename.get(n, n) for n in names]
    parts = []
    for m, c in sorted(p.terms(), key=lambda t: p.ring.order(t[0]), reverse=True):
        fac = []
        for name, e in zip(names, m):
            if e == 1:
                fac.append(name)
            elif e > 1:
                fac.append(f"{name}^{e}")
        ct = _coef_text(c)
        neg = ct.startswith("-")
        mag = ct[1:] if neg else ct
        body = "*".join(fac)
        if body:
            t = body if mag == "1" else f"{mag}*{body}"
        else:
            t = mag
        parts.append(("-" if neg else "+", t))
    out = ("-" + parts[0][1]) if parts[0][0] == "-" else parts[0][1]
    for s, t in parts[1:]:
        out += f" {s} {t}"
    return out


def ratfunc_text(f: FracElement, rename: dict[str, str] | None = None) -> str:
    num = poly_text(f.numer, rename)
    if f.denom == f.field.ring.one:
        return num
    return f"({num})/({poly_text(f.denom, rename)})"


_POW = re.compile(r"\^")


def parse_ratfunc(text: str, F: FracField) -> FracElement:
    """Inverse of :func:`ratfunc_text` for a field with matching symbols."""
    loc = {str(s): s for s in F.symbols}
    expr = sympy.sympify(_POW.sub("**", text), locals=loc)
    return F.from_expr(expr)


def as_poly(f: FracElement) -> PolyElement:
    """The polynomial ``f``; its denominator must be a nonzero constant."""
    if not f.denom.is_ground:
        raise ValueError(f"{f} is not a polynomial")
    return f.numer.quo_ground(f.denom.LC)


def normalize_vector(vec: Sequence[FracElement]) -> tuple[tuple[FracElement, ...], FracElement]:
    """Clear denominators, remove polynomial content and fix the sign.

    Returns the normalised vector and the factor ``c`` with
    ``normalised = c * vec``.  The first nonzero entry ends up with a
    positive leading coefficient.
    """
    F = vec[0].field
    R = F.ring
    nz = [v for v in vec if not is_zero(v)]
    if not nz:
        raise ValueError("cannot normalise the zero vector")
    den = R.one
    for v in nz:
        den = den.lcm(v.denom)
    polys = [as_poly(v * F.new(den, R.one)) if not is_zero(v) else R.zero for v in vec]
    g = R.zero
    for p in polys:
        if not p.is_zero:
            g = p if g.is_zero else g.gcd(p)
    polys = [p.exquo(g) if not p.is_zero else p for p in polys]
    # integer content
    cont = QQ.zero
    for p in polys:
        for c in p.coeffs():
            cont = QQ.gcd(cont, c)
    first = next(p for p in polys if not p.is_zero)
    sign = -1 if first.LC < 0 else 1
    scale = QQ(sign) / cont
    polys = [p.mul_ground(scale) for p in polys]
    factor = F.new(den.mul_ground(scale), g)
    return tuple(F.new(p, R.one) for p in polys), factor
