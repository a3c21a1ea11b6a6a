"""Hypergeometric terms in several discrete variables.

A :class:`HyperTerm` is a rational prefactor times a multiset of atoms
(binomials, factorials, falling and bracket products, powers and opaque
shift-free kernels).  Every atom has a rational shift quotient in every
discrete variable, so ratios of shifted copies of a term are computed
exactly without evaluating anything.

In q-mode each discrete variable ``v`` has a companion generator ``q_v``
standing for ``q**v``; shifting ``v`` by ``a`` maps ``q_v`` to
``q**a * q_v``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from math import comb, factorial
from typing import Iterable, Mapping

from sympy.polys.domains import QQ
from sympy.polys.fields import FracElement

from .algebra import coeffs_in, is_zero, make_field, poly_gcd, ratfunc_text

__all__ = [
    "Universe",
    "LinExpr",
    "Atom",
    "Binomial",
    "QBinomial",
    "Factorial",
    "FallingProduct",
    "BracketProduct",
    "Power",
    "OpaqueKernel",
    "HyperTerm",
    "TermValue",
    "EvaluationPole",
    "GPForm",
    "shift_quotient",
    "similar_ratio",
    "shift_ratfunc",
    "eval_ratfunc",
    "dispersion_set",
    "gosper_normal_form",
    "sigma",
]


class EvaluationPole(ArithmeticError):
    """A term or rational function has a pole at the requested point."""


@dataclass(frozen=True)
class Universe:
    """The variables of one problem, in canonical order.

    Order: parameters (with their q-companions), the summation variable,
    auxiliary residue variables in introduction order, continuous symbols,
    then ``q``.
    """

    params: tuple[str, ...]
    k: str = "k"
    aux: tuple[str, ...] = ()
    cont: tuple[str, ...] = ()
    q: bool = False

    @staticmethod
    def qname(v: str) -> str:
        return f"q_{v}"

    @property
    def discrete(self) -> tuple[str, ...]:
        return self.params + (self.k,)

    @cached_property
    def names(self) -> tuple[str, ...]:
        out = list(self.params)
        if self.q:
            out += [self.qname(p) for p in self.params]
        out.append(self.k)
        if self.q:
            out.append(self.qname(self.k))
        out += list(self.aux) + list(self.cont)
        if self.q:
            out.append("q")
        return tuple(out)

    @cached_property
    def field(self):
        return make_field(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def gen(self, name: str) -> FracElement:
        return self.field.gens[self.index(name)]

    def const(self, c) -> FracElement:
        return self.field(QQ.convert(c)) if not isinstance(c, FracElement) else c

    @property
    def one(self) -> FracElement:
        return self.field.one

    def with_aux(self, aux: Iterable[str]) -> "Universe":
        return replace(self, aux=tuple(aux))

    def rename_map(self) -> dict[str, str]:
        """Display names (``q_n`` is shown as ``q^n``)."""
        if not self.q:
            return {}
        return {self.qname(v): f"q^{v}" for v in self.discrete}


# --- linear index expressions -------------------------------------------------


@dataclass(frozen=True, order=True)
class LinExpr:
    """Integer-linear combination of discrete variables plus a constant."""

    terms: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def of(coeffs: Mapping[str, int] | None = None, const: int = 0) -> "LinExpr":
        items = tuple(sorted((v, int(c)) for v, c in (coeffs or {}).items() if c))
        return LinExpr(items, int(const))

    @staticmethod
    def var(v: str) -> "LinExpr":
        return LinExpr(((v, 1),), 0)

    @staticmethod
    def constant(c: int) -> "LinExpr":
        return LinExpr((), int(c))

    def as_dict(self) -> dict[str, int]:
        return dict(self.terms)

    def coeff(self, v: str) -> int:
        return self.as_dict().get(v, 0)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.terms)

    def is_constant(self) -> bool:
        return not self.terms

    def __add__(self, other: "LinExpr | int") -> "LinExpr":
        if isinstance(other, int):
            return LinExpr(self.terms, self.const + other)
        d = self.as_dict()
        for v, c in other.terms:
            d[v] = d.get(v, 0) + c
        return LinExpr.of(d, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return LinExpr(tuple((v, -c) for v, c in self.terms), -self.const)

    def __sub__(self, other: "LinExpr | int") -> "LinExpr":
        return self + (-other if isinstance(other, LinExpr) else -other)

    def __rsub__(self, other: int) -> "LinExpr":
        return (-self) + other

    def scale(self, c: int) -> "LinExpr":
        return LinExpr.of({v: c * a for v, a in self.terms}, c * self.const)

    def shift(self, v: str, a: int) -> "LinExpr":
        return self + self.coeff(v) * a

    def shift_many(self, shifts: Mapping[str, int]) -> "LinExpr":
        return self + sum(self.coeff(v) * a for v, a in shifts.items())

    def homogeneous(self) -> "LinExpr":
        return LinExpr(self.terms, 0)

    def evaluate(self, point: Mapping[str, int]) -> int:
        return self.const + sum(c * point[v] for v, c in self.terms)

    def substitute(self, v: str, e: "LinExpr") -> "LinExpr":
        c = self.coeff(v)
        if not c:
            return self
        d = self.as_dict()
        del d[v]
        return LinExpr.of(d, self.const) + e.scale(c)

    def to_field(self, U: Universe) -> FracElement:
        out = U.const(self.const)
        for v, c in self.terms:
            out = out + c * U.gen(v)
        return out

    def qpow(self, U: Universe) -> FracElement:
        """``q**self`` in terms of ``q`` and the companions ``q_v``."""
        out = U.gen("q") ** self.const
        for v, c in self.terms:
            out = out * U.gen(U.qname(v)) ** c
        return out

    def bracket(self, U: Universe, qmode: bool) -> FracElement:
        """``[self]_q = (1 - q**self)/(1 - q)``, or ``self`` when not in q-mode."""
        if not qmode:
            return self.to_field(U)
        q = U.gen("q")
        return (1 - self.qpow(U)) / (1 - q)

    def text(self) -> str:
        parts = []
        for v, c in self.terms:
            if c == 1:
                parts.append(f"+{v}")
            elif c == -1:
                parts.append(f"-{v}")
            else:
                parts.append(f"{c:+d}*{v}")
        if self.const or not parts:
            parts.append(f"{self.const:+d}")
        s = "".join(parts)
        return s[1:] if s.startswith("+") else s

    def __str__(self) -> str:
        return self.text()


# --- scalar helpers --------------------------------------------------------------


def _qbracket_value(i: int, q):
    """``[i]_q`` for an integer ``i`` (``q`` may be symbolic or a number)."""
    if i >= 0:
        acc = q * 0
        term = q**0
        for _ in range(i):
            acc = acc + term
            term = term * q
        return acc
    return -(q**i) * _qbracket_value(-i, q)


def _qfactorial_value(i: int, q):
    acc = q**0
    for j in range(1, i + 1):
        acc = acc * _qbracket_value(j, q)
    return acc


def _gen_binomial(a: int, b: int) -> int:
    """Binomial coefficient with the engine's zero conventions."""
    if b < 0:
        return 0
    if a >= 0:
        return comb(a, b) if b <= a else 0
    acc = 1
    for i in range(b):
        acc *= a - i
    return acc // factorial(b)


def _gen_qbinomial(a: int, b: int, q):
    if b < 0:
        return q * 0
    if a >= 0 and b > a:
        return q * 0
    num = q**0
    for i in range(b):
        num = num * _qbracket_value(a - i, q)
    return num / _qfactorial_value(b, q)


def _terms_with_q(p, U: Universe, point: Mapping[str, int]):
    """Substitute integers into a polynomial; returns (dict, min q-exponent)."""
    idx_int = [(U.index(v), val) for v, val in point.items() if v in U.names]
    idx_qc = [(U.index(U.qname(v)), val) for v, val in point.items() if U.q and U.qname(v) in U.names]
    qi = U.index("q") if U.q else None
    out: dict = {}
    for m, c in p.terms():
        coef = c
        for i, val in idx_int:
            if m[i]:
                coef = coef * val ** m[i]
        if coef == 0:
            continue
        mm = list(m)
        for i, _ in idx_int:
            mm[i] = 0
        if qi is not None:
            qe = m[qi] + sum(val * m[i] for i, val in idx_qc)
            for i, _ in idx_qc:
                mm[i] = 0
            mm[qi] = qe
        key = tuple(mm)
        out[key] = out.get(key, 0) + coef
    out = {k: v for k, v in out.items() if v != 0}
    low = min((k[qi] for k in out), default=0) if qi is not None else 0
    return out, min(low, 0)


def _poly_from_terms(terms: dict, low: int, U: Universe) -> FracElement:
    R = U.field.ring
    qi = U.index("q") if U.q else None
    if qi is not None and low < 0:
        shifted = {}
        for m, c in terms.items():
            mm = list(m)
            mm[qi] -= low
            shifted[tuple(mm)] = c
        return U.field.new(R.from_dict(shifted), R.from_dict({tuple(low * 0 if j != qi else -low for j in range(len(m))): 1}) if terms else R.one)
    return U.field.new(R.from_dict(terms), R.one)


def _eval_poly(p, U: Universe, point: Mapping[str, int]) -> FracElement:
    terms, low = _terms_with_q(p, U, point)
    if not terms:
        return U.field.zero
    R = U.field.ring
    qi = U.index("q") if U.q else None
    if qi is not None and low < 0:
        shifted = {}
        for m, c in terms.items():
            mm = list(m)
            mm[qi] -= low
            shifted[tuple(mm)] = c
        den = R.gens[qi] ** (-low)
        return U.field.new(R.from_dict(shifted), den)
    return U.field.new(R.from_dict(terms), R.one)


def eval_ratfunc(f: FracElement, U: Universe, point: Mapping[str, int]) -> FracElement:
    """Substitute integer values for discrete variables (and ``q**v`` for companions)."""
    num = _eval_poly(f.numer, U, point)
    den = _eval_poly(f.denom, U, point)
    if is_zero(den):
        raise EvaluationPole(f"pole of {f} at {dict(point)}")
    return num / den


def shift_ratfunc(f: FracElement, U: Universe, v: str, a: int) -> FracElement:
    """``f`` with ``v -> v + a`` (and ``q_v -> q**a q_v`` in q-mode)."""
    if a == 0:
        return f
    R = U.field.ring
    i = U.index(v)
    subs = [(R.gens[i], R.gens[i] + a)]
    num, den = f.numer.compose(subs), f.denom.compose(subs)
    if U.q and U.qname(v) in U.names:
        num = _qscale(num, U, v, a)
        den = _qscale(den, U, v, a)
        return num / den
    return U.field.new(num, den)


def _qscale(p, U: Universe, v: str, a: int) -> FracElement:
    R = U.field.ring
    ci, qi = U.index(U.qname(v)), U.index("q")
    out = {}
    low = 0
    for m, c in p.terms():
        mm = list(m)
        mm[qi] = m[qi] + a * m[ci]
        low = min(low, mm[qi])
        out[tuple(mm)] = out.get(tuple(mm), 0) + c
    if low < 0:
        sh = {}
        for m, c in out.items():
            mm = list(m)
            mm[qi] -= low
            sh[tuple(mm)] = c
        return U.field.new(R.from_dict(sh), R.gens[qi] ** (-low))
    return U.field.new(R.from_dict(out), R.one)


# --- atoms -------------------------------------------------------------------------


class Atom:
    """Base class; subclasses are frozen dataclasses."""

    slots: tuple[str, ...] = ()

    def args(self) -> tuple[LinExpr, ...]:
        return tuple(getattr(self, s) for s in self.slots)

    def with_args(self, args: tuple[LinExpr, ...]) -> "Atom":
        return replace(self, **dict(zip(self.slots, args)))

    def shifted(self, shifts: Mapping[str, int]) -> "Atom":
        return self.with_args(tuple(a.shift_many(shifts) for a in self.args()))

    def family_key(self) -> tuple:
        return (type(self).__name__, self._static()) + tuple(a.homogeneous() for a in self.args())

    def _static(self) -> tuple:
        return ()

    def step(self, i: int, U: Universe) -> FracElement:
        """``self(args + e_i) / self(args)`` as a rational function."""
        raise NotImplementedError

    def evaluate(self, vals: tuple[int, ...], U: Universe, mult: int):
        raise NotImplementedError

    def involves(self, v: str) -> bool:
        return any(a.coeff(v) for a in self.args())

    def text(self, U: Universe | None = None) -> str:
        raise NotImplementedError


def _frac_text(f: FracElement, U: Universe | None) -> str:
    return ratfunc_text(f, U.rename_map() if U else None)


@dataclass(frozen=True)
class Binomial(Atom):
    top: LinExpr
    bottom: LinExpr
    slots = ("top", "bottom")

    def step(self, i, U):
        a, b = self.top.to_field(U), self.bottom.to_field(U)
        if i == 0:
            return (a + 1) / (a + 1 - b)
        return (a - b) / (b + 1)

    def evaluate(self, vals, U, mult):
        return U.const(_gen_binomial(*vals))

    def text(self, U=None):
        return f"binom({self.top}, {self.bottom})"


@dataclass(frozen=True)
class QBinomial(Atom):
    top: LinExpr
    bottom: LinExpr
    slots = ("top", "bottom")

    def step(self, i, U):
        a, b = self.top, self.bottom
        if i == 0:
            return (a + 1).bracket(U, True) / (a - b + 1).bracket(U, True)
        return (a - b).bracket(U, True) / (b + 1).bracket(U, True)

    def evaluate(self, vals, U, mult):
        return _gen_qbinomial(vals[0], vals[1], U.gen("q"))

    def text(self, U=None):
        return f"qbinom({self.top}, {self.bottom})"


@dataclass(frozen=True)
class Factorial(Atom):
    arg: LinExpr
    slots = ("arg",)

    def step(self, i, U):
        return (self.arg + 1).to_field(U)

    def evaluate(self, vals, U, mult):
        (a,) = vals
        if a < 0:
            if mult < 0:
                return _ReciprocalZero
            raise EvaluationPole(f"factorial of negative integer {a}")
        return U.const(factorial(a))

    def text(self, U=None):
        return f"fact({self.arg})"


_ReciprocalZero = object()


@dataclass(frozen=True)
class FallingProduct(Atom):
    """``prod_{i=0}^{L-1} (base - [i])``; ``[i] = i`` unless q-mode."""

    base: FracElement
    length: LinExpr
    q: bool = False
    slots = ("length",)

    def _static(self):
        return (self.base, self.q)

    def step(self, i, U):
        return self.base - self.length.bracket(U, self.q)

    def evaluate(self, vals, U, mult):
        (L,) = vals
        qv = U.gen("q") if self.q else None

        def br(j):
            return _qbracket_value(j, qv) if self.q else U.const(j)

        acc = U.one
        if L >= 0:
            for j in range(L):
                acc = acc * (self.base - br(j))
        else:
            for j in range(L, 0):
                acc = acc / (self.base - br(j))
        return acc

    def text(self, U=None):
        name = "qff" if self.q else "ff"
        return f"{name}({_frac_text(self.base, U)}, {self.length})"


@dataclass(frozen=True)
class BracketProduct(Atom):
    """``prod_{i=1}^{L} (1 - [i]*aux)``; over Q this is ``prod (1 - i*aux)``."""

    aux: str
    length: LinExpr
    q: bool = False
    slots = ("length",)

    def _static(self):
        return (self.aux, self.q)

    def step(self, i, U):
        return 1 - (self.length + 1).bracket(U, self.q) * U.gen(self.aux)

    def evaluate(self, vals, U, mult):
        (L,) = vals
        qv = U.gen("q") if self.q else None
        t = U.gen(self.aux)

        def br(j):
            return _qbracket_value(j, qv) if self.q else U.const(j)

        acc = U.one
        if L >= 0:
            for j in range(1, L + 1):
                acc = acc * (1 - br(j) * t)
        else:
            for j in range(L + 1, 1):
                acc = acc / (1 - br(j) * t)
        return acc

    def involves_aux(self) -> str:
        return self.aux

    def text(self, U=None):
        name = "qbracket" if self.q else "bracket"
        return f"{name}({self.aux}, {self.length})"


@dataclass(frozen=True)
class Power(Atom):
    """``base ** exponent`` with ``base`` free of discrete variables."""

    base: FracElement
    exponent: LinExpr
    slots = ("exponent",)

    def _static(self):
        return (self.base,)

    def step(self, i, U):
        return self.base

    def evaluate(self, vals, U, mult):
        (e,) = vals
        if is_zero(self.base) and e <= 0:
            if e == 0:
                return U.one
            raise EvaluationPole("zero to a negative power")
        return self.base**e

    def text(self, U=None):
        return f"({_frac_text(self.base, U)})^({self.exponent})"


@dataclass(frozen=True)
class OpaqueKernel(Atom):
    """A shift-free kernel known only through its series in ``aux``.

    Tags: ``exp`` (``exp(arg*aux)``), ``inv_expm1`` (``1/(exp(aux)-1)``),
    ``bernoulli_ogf`` (``sum_j B_j aux**j``).
    """

    tag: str
    aux: str
    arg: FracElement | None = None
    slots = ()

    def _static(self):
        return (self.tag, self.aux, self.arg)

    def derivative(self, var: str, U: Universe) -> FracElement:
        """Multiplier produced by ``d/dvar`` acting on this kernel."""
        if self.tag == "exp" and self.arg is not None:
            return self.arg.diff(U.gen(var)) * U.gen(self.aux)
        return U.field.zero

    def evaluate(self, vals, U, mult):
        raise TypeError("opaque kernels are evaluated through their series")

    def text(self, U=None):
        if self.tag == "exp":
            return f"exp(({_frac_text(self.arg, U)})*{self.aux})"
        if self.tag == "inv_expm1":
            return f"1/(exp({self.aux})-1)"
        return f"{self.tag}({self.aux})"


# --- terms -----------------------------------------------------------------------


@dataclass(frozen=True)
class TermValue:
    """Value of a term at an integer point: ``value * prod(kernel**mult)``."""

    value: FracElement
    kernels: tuple[tuple[OpaqueKernel, int], ...] = ()

    def is_zero(self) -> bool:
        return is_zero(self.value)


def _merge(factors: Iterable[tuple[Atom, int]], U: Universe) -> tuple[FracElement, tuple[tuple[Atom, int], ...]]:
    acc: dict[Atom, int] = {}
    pow_exp: dict = {}
    for a, m in factors:
        if m == 0:
            continue
        if isinstance(a, Power):
            pow_exp[a.base] = pow_exp.get(a.base, LinExpr()) + a.exponent.scale(m)
            continue
        acc[a] = acc.get(a, 0) + m
    pre = U.one
    for base, e in pow_exp.items():
        if e.is_constant():
            pre = pre * base**e.const
        else:
            acc[Power(base, e)] = 1
    items = tuple(sorted(((a, m) for a, m in acc.items() if m), key=lambda t: (t[0].text(U), t[1])))
    return pre, items


@dataclass(frozen=True)
class HyperTerm:
    U: Universe
    prefactor: FracElement
    factors: tuple[tuple[Atom, int], ...] = ()

    @staticmethod
    def make(U: Universe, prefactor=None, factors: Iterable[tuple[Atom, int]] = ()) -> "HyperTerm":
        pre, items = _merge(factors, U)
        p = U.one if prefactor is None else U.const(prefactor)
        return HyperTerm(U, p * pre, items)

    def __mul__(self, other: "HyperTerm | FracElement | int") -> "HyperTerm":
        if isinstance(other, HyperTerm):
            return HyperTerm.make(self.U, self.prefactor * other.prefactor, self.factors + other.factors)
        return HyperTerm(self.U, self.prefactor * self.U.const(other), self.factors)

    __rmul__ = __mul__

    def inverse(self) -> "HyperTerm":
        return HyperTerm.make(self.U, 1 / self.prefactor, tuple((a, -m) for a, m in self.factors))

    def __truediv__(self, other: "HyperTerm") -> "HyperTerm":
        return self * other.inverse()

    def shift(self, v: str, a: int = 1) -> "HyperTerm":
        return self.shift_many({v: a})

    def shift_many(self, shifts: Mapping[str, int]) -> "HyperTerm":
        pre = self.prefactor
        for v, a in shifts.items():
            if a:
                pre = shift_ratfunc(pre, self.U, v, a)
        return HyperTerm.make(self.U, pre, tuple((at.shifted(shifts), m) for at, m in self.factors))

    def substitute(self, v: str, e: LinExpr) -> "HyperTerm":
        """Replace discrete variable ``v`` by ``e`` in every index slot.

        Only used for atoms; the prefactor must not depend on ``v``.
        """
        facs = tuple((at.with_args(tuple(a.substitute(v, e) for a in at.args())), m) for at, m in self.factors)
        return HyperTerm.make(self.U, self.prefactor, facs)

    def kernels(self) -> tuple[tuple[OpaqueKernel, int], ...]:
        return tuple((a, m) for a, m in self.factors if isinstance(a, OpaqueKernel))

    def involves(self, v: str) -> bool:
        if v in self.U.names:
            i = self.U.index(v)
            if self.prefactor.numer.degree(i) > 0 or self.prefactor.denom.degree(i) > 0:
                return True
        return any(a.involves(v) for a, _ in self.factors)

    # evaluation ------------------------------------------------------------

    def evaluate(self, point: Mapping[str, int], rewrite: bool = True) -> TermValue:
        """Exact value at an integer point (all discrete variables assigned).

        Removable ``0/0`` forms are resolved by the binomial/factorial
        rewrite rules before giving up with :class:`EvaluationPole`.
        """
        try:
            return self._evaluate(point)
        except EvaluationPole:
            if not rewrite:
                raise
            t = self.rewrite_removable(point)
            if t is self:
                raise
            return t._evaluate(point)

    def _evaluate(self, point: Mapping[str, int]) -> TermValue:
        U = self.U
        pre = eval_ratfunc(self.prefactor, U, point)
        acc = pre
        kernels = []
        zero = False
        for a, m in self.factors:
            if isinstance(a, OpaqueKernel):
                kernels.append((a, m))
                continue
            vals = tuple(x.evaluate(point) for x in a.args())
            v = a.evaluate(vals, U, m)
            if v is _ReciprocalZero:
                zero = True
                continue
            if is_zero(v):
                if m < 0:
                    raise EvaluationPole(f"{a.text(U)} vanishes in a denominator at {dict(point)}")
                zero = True
                continue
            acc = acc * v**m
        if zero:
            return TermValue(U.field.zero, ())
        return TermValue(acc, tuple(kernels))

    def rewrite_removable(self, point: Mapping[str, int] | None = None) -> "HyperTerm":
        """Absorb linear denominator factors into binomials and factorials.

        ``binom(a,b)/(a-b+1) = binom(a+1,b)/(a+1)``,
        ``binom(a,b)/(b+1) = binom(a+1,b+1)/(a+1)``,
        ``1/(a!*(a+1)) = 1/(a+1)!``.  In q-mode factors ``q**L1 - q**L2``
        are absorbed into q-binomials the same way.  When ``point`` is given
        only factors vanishing there are rewritten.
        """
        U = self.U
        term = self
        changed = True
        touched = False
        while changed:
            changed = False
            _, facs = term.prefactor.denom.factor_list()
            for f, e in facs:
                lin = _as_linexpr(f, U)
                absorb = _absorb
                if lin is None and U.q:
                    lin = _as_qexponent(f, U)
                    absorb = _absorb_q
                if lin is None:
                    continue
                L, scale = lin
                if point is not None and L.evaluate(point) != 0:
                    continue
                new = absorb(term, L)
                if new is not None:
                    term = new
                    changed = touched = True
                    break
        return term if touched else self

    # display ----------------------------------------------------------------

    def text(self) -> str:
        parts = []
        if not (self.prefactor - self.U.one).numer.is_zero or not self.factors:
            parts.append(f"({_frac_text(self.prefactor, self.U)})")
        for a, m in self.factors:
            t = a.text(self.U)
            parts.append(t if m == 1 else f"{t}^({m})")
        return " * ".join(parts)

    def __str__(self) -> str:
        return self.text()


def _as_linexpr(f, U: Universe):
    """Return (LinExpr, scale) when polynomial ``f`` is linear in discrete variables only."""
    if f.is_zero:
        return None
    disc = set(U.discrete)
    coeffs: dict[str, object] = {}
    const = 0
    for m, c in f.terms():
        nz = [(U.names[i], e) for i, e in enumerate(m) if e]
        if not nz:
            const = c
            continue
        if len(nz) != 1 or nz[0][1] != 1 or nz[0][0] not in disc:
            return None
        coeffs[nz[0][0]] = c
    if not coeffs:
        return None
    # normalise to integer coefficients with positive first entry
    vals = list(coeffs.values()) + [const]
    den = 1
    for v in vals:
        den = den * QQ.convert(v).denominator // __import__("math").gcd(den, QQ.convert(v).denominator)
    ints = {v: int(QQ.convert(c) * den) for v, c in coeffs.items()}
    ci = int(QQ.convert(const) * den)
    return LinExpr.of(ints, ci), QQ(1, den)


def _absorb(term: HyperTerm, L: LinExpr) -> HyperTerm | None:
    U = term.U
    for idx, (a, m) in enumerate(term.factors):
        if isinstance(a, Binomial) and m > 0:
            top, bot = a.top, a.bottom
            for cand, new_atom, fac in (
                (top - bot + 1, Binomial(top + 1, bot), top + 1),
                (bot + 1, Binomial(top + 1, bot + 1), top + 1),
            ):
                r = _ratio_linexpr(L, cand)
                if r is not None:
                    facs = list(term.factors)
                    facs[idx] = (a, m - 1)
                    facs.append((new_atom, 1))
                    pre = term.prefactor * cand.to_field(U) / fac.to_field(U)
                    return HyperTerm.make(U, pre, facs)
        if isinstance(a, Factorial):
            arg = a.arg
            if m < 0 and _ratio_linexpr(L, arg + 1) is not None:
                facs = list(term.factors)
                facs[idx] = (a, m + 1)
                facs.append((Factorial(arg + 1), -1))
                return HyperTerm.make(U, term.prefactor * (arg + 1).to_field(U), facs)
    return None


def _as_qexponent(f, U: Universe):
    """Return (L, None) when ``f = c*(M1 - M2)`` for q-monomials with ``M1/M2 = q**L``."""
    terms = f.terms()
    if len(terms) != 2 or terms[0][1] != -terms[1][1]:
        return None
    qi = U.index("q")
    comp = {U.index(U.qname(v)): v for v in U.discrete}
    exps = []
    for m, _ in terms:
        d = {}
        for i, e in enumerate(m):
            if not e:
                continue
            if i == qi:
                d[None] = e
            elif i in comp:
                d[comp[i]] = e
            else:
                return None
        exps.append(d)
    d1, d2 = exps
    keys = set(d1) | set(d2)
    L = LinExpr.of({v: d1.get(v, 0) - d2.get(v, 0) for v in keys if v is not None}, d1.get(None, 0) - d2.get(None, 0))
    if L.is_constant():
        return None
    return L, None


def _absorb_q(term: HyperTerm, L: LinExpr) -> HyperTerm | None:
    U = term.U
    for idx, (a, m) in enumerate(term.factors):
        if not (isinstance(a, QBinomial) and m > 0):
            continue
        top, bot = a.top, a.bottom
        for cand, new_atom in (
            (top - bot + 1, QBinomial(top + 1, bot)),
            (bot + 1, QBinomial(top + 1, bot + 1)),
        ):
            if _ratio_linexpr(L, cand) in (1, -1):
                facs = list(term.factors)
                facs[idx] = (a, m - 1)
                facs.append((new_atom, 1))
                pre = term.prefactor * cand.bracket(U, True) / (top + 1).bracket(U, True)
                return HyperTerm.make(U, pre, facs)
    return None


def _ratio_linexpr(a: LinExpr, b: LinExpr):
    """Rational c with a = c*b, or None."""
    if set(a.variables) != set(b.variables) or not a.terms:
        return None
    v0 = a.terms[0][0]
    c = QQ(a.coeff(v0), b.coeff(v0))
    for v, x in a.terms:
        if QQ(x) != c * b.coeff(v):
            return None
    if QQ(a.const) != c * b.const:
        return None
    return c


# --- ratios --------------------------------------------------------------------------


def _atom_ratio(target: Atom, ref: Atom, U: Universe) -> FracElement:
    """``target/ref`` for atoms of one family (args differ by constants)."""
    r = U.one
    cur = ref
    for i in range(len(ref.args())):
        goal = target.args()[i].const
        while cur.args()[i].const < goal:
            r = r * cur.step(i, U)
            args = list(cur.args())
            args[i] = args[i] + 1
            cur = cur.with_args(tuple(args))
        while cur.args()[i].const > goal:
            args = list(cur.args())
            args[i] = args[i] - 1
            cur = cur.with_args(tuple(args))
            r = r / cur.step(i, U)
    return r


def similar_ratio(t1: HyperTerm, t2: HyperTerm) -> FracElement | None:
    """``t1/t2`` as a rational function, or ``None`` if it is not rational."""
    U = t1.U
    q = t1 / t2
    fams: dict[tuple, list[tuple[Atom, int]]] = {}
    for a, m in q.factors:
        fams.setdefault(a.family_key(), []).append((a, m))
    r = q.prefactor
    for key, members in fams.items():
        if sum(m for _, m in members) != 0:
            return None
        ref = members[0][0]
        for a, m in members[1:]:
            r = r * _atom_ratio(a, ref, U) ** m
    return r


def shift_quotient(t: HyperTerm, v: str) -> FracElement:
    """``t(v+1)/t(v)``."""
    r = similar_ratio(t.shift(v, 1), t)
    if r is None:  # pragma: no cover - guaranteed by the atom invariants
        raise ValueError(f"{t} is not hypergeometric in {v}")
    return r


# --- shifts on polynomials of the shift variable -------------------------------------


def sigma(f: FracElement, U: Universe, v: str, h: int, qmode: bool) -> FracElement:
    """Apply the shift in ``v`` ``h`` times to a rational function.

    In q-mode the polynomial variable is the companion ``q_v`` and only it
    is scaled; otherwise ``v -> v + h``.
    """
    if h == 0:
        return f
    if qmode:
        R = U.field.ring
        num = _qscale(f.numer, U, v, h)
        den = _qscale(f.denom, U, v, h)
        return num / den
    R = U.field.ring
    i = U.index(v)
    subs = [(R.gens[i], R.gens[i] + h)]
    return U.field.new(f.numer.compose(subs), f.denom.compose(subs))


def _var_of(U: Universe, v: str, qmode: bool) -> str:
    return U.qname(v) if qmode else v


def _split_content(p, idx: int):
    """``p = content * prim`` with ``content`` free of generator ``idx``."""
    groups: dict[int, dict] = {}
    for m, c in p.terms():
        mm = m[:idx] + (0,) + m[idx + 1 :]
        groups.setdefault(m[idx], {})[mm] = c
    R = p.ring
    cont = R.zero
    for d in groups.values():
        g = R.from_dict(d)
        cont = g if cont.is_zero else cont.gcd(g)
    prim = p.exquo(cont)
    return cont, prim


def _monic_in(f: FracElement, name: str) -> tuple[FracElement, FracElement]:
    """(lc, f/lc) for ``f`` polynomial in ``name`` over the other variables."""
    cs = coeffs_in(f, name)
    lc = cs[max(cs)]
    return lc, f / lc


def _factors_in(p, idx: int):
    _, facs = p.factor_list()
    return [f for f, _ in facs if f.degree(idx) > 0]


def dispersion_set(a: FracElement, b: FracElement, U: Universe, v: str, qmode: bool = False) -> set[int]:
    """All ``h >= 0`` with ``gcd(a(v), b(v+h)) != 1`` (``b(q^h s)`` in q-mode).

    Shifts are only recognised when they are integer constants; roots that
    differ by a parameter-dependent amount are treated as non-aligning.
    """
    name = _var_of(U, v, qmode)
    idx = U.index(name)
    fa = _factors_in(a.numer, idx)
    fb = _factors_in(b.numer, idx)
    out: set[int] = set()
    for f in fa:
        for g in fb:
            d = f.degree(idx)
            if g.degree(idx) != d:
                continue
            F = U.field
            fm = coeffs_in(F.new(f, F.ring.one), name)
            gm = coeffs_in(F.new(g, F.ring.one), name)
            fl, gl = fm[d], gm[d]
            if qmode:
                if len(fm) == 1 and 0 not in fm:
                    continue  # the monomial s is invariant under q-shifts
                f0 = fm.get(0)
                g0 = gm.get(0)
                if f0 is None or g0 is None:
                    continue
                e = _q_exponent((g0 / gl) / (f0 / fl), U)
                if e is None or e % d:
                    continue
                h = e // d
            else:
                if d == 0:
                    continue
                diff = (fm.get(d - 1, F.zero) / fl - gm.get(d - 1, F.zero) / gl) / d
                c = _rational_constant(diff)
                if c is None or c.denominator != 1:
                    continue
                h = int(c)
            if h < 0:
                continue
            shifted = sigma(F.new(g, F.ring.one), U, v, h, qmode)
            if is_zero(_monic_in(shifted, name)[1] - _monic_in(F.new(f, F.ring.one), name)[1]):
                out.add(h)
    return out


def _rational_constant(f: FracElement):
    if f.numer.is_ground and f.denom.is_ground:
        return QQ.convert(f.numer.LC if not f.numer.is_zero else 0) / QQ.convert(f.denom.LC)
    return None


def _q_exponent(f: FracElement, U: Universe) -> int | None:
    """``e`` when ``f == q**e`` exactly, else ``None``."""
    if not U.q:
        return None
    qi = U.index("q")
    num, den = f.numer, f.denom
    if len(num) != 1 or len(den) != 1:
        return None
    (mn, cn), = num.terms()
    (md, cd), = den.terms()
    if cn != cd:
        return None
    if any(e for i, e in enumerate(mn) if i != qi) or any(e for i, e in enumerate(md) if i != qi):
        return None
    return mn[qi] - md[qi]


@dataclass(frozen=True)
class GPForm:
    """``r(v) = u * A(v)/B(v) * C(sv)/C(v)`` with ``s`` the (q-)shift."""

    u: FracElement
    A: FracElement
    B: FracElement
    C: FracElement
    var: str
    qmode: bool = False

    def recompose(self, U: Universe) -> FracElement:
        return self.u * self.A / self.B * sigma(self.C, U, self.var, 1, self.qmode) / self.C


def gosper_normal_form(r: FracElement, U: Universe, v: str, qmode: bool = False) -> GPForm:
    """Gosper-Petkovsek representation of ``r`` with respect to ``v``.

    ``B`` and ``C`` are monic in ``v`` (in ``q_v`` for q-mode), ``A`` is monic
    up to sign, and ``u`` absorbs everything free of ``v`` with the sign of a
    non-constant ``A`` moved into ``A``.
    """
    if is_zero(r):
        raise ValueError("GP form of the zero rational function")
    F = U.field
    name = _var_of(U, v, qmode)
    idx = U.index(name)
    cn, pn = _split_content(r.numer, idx)
    cd, pd = _split_content(r.denom, idx)
    u = F.new(cn, cd)
    A = F.new(pn, F.ring.one)
    B = F.new(pd, F.ring.one)
    C = F.one
    for h in sorted(dispersion_set(A, B, U, v, qmode)):
        g = F.new(poly_gcd(A.numer, sigma(B, U, v, h, qmode).numer), F.ring.one)
        if g.numer.degree(idx) <= 0:
            continue
        A = A / g
        B = B / sigma(g, U, v, -h, qmode)
        for i in range(1, h + 1):
            C = C * sigma(g, U, v, -i, qmode)
    la, A = _monic_in(_polypart(A, idx, U), name)
    lb, B = _monic_in(_polypart(B, idx, U), name)
    _, C = _monic_in(_polypart(C, idx, U), name)
    u = u * la / lb * (r / (u * la / lb * A / B * sigma(C, U, v, 1, qmode) / C))
    if not A.numer.is_ground and u.numer.LC < 0:
        u, A = -u, -A
    return GPForm(u, A, B, C, v, qmode)


def _polypart(f: FracElement, idx: int, U: Universe) -> FracElement:
    if f.denom.degree(idx) > 0:
        raise ValueError("expected a polynomial in the shift variable")
    return f
