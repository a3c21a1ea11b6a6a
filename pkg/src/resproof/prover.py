"""From a parsed identity to a checkable proof object.

The pipeline rewrites the left-hand sum into residue form, searches a
telescoping relation over growing shift sets, collects evidence that the
boundary terms vanish, checks that the right-hand side satisfies the same
recurrence and compares both sides on a grid of initial values.  Every
numeric comparison uses the recurrence oracles, never the residue
machinery that produced the relation.
"""

from __future__ import annotations

import itertools
import os
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from sympy.polys.domains import QQ
from sympy.polys.fields import FracElement

from . import dsl
from .algebra import is_zero, parse_ratfunc, ratfunc_text
from .applicability import ApplicabilityReport, FORCED_ZERO, analyze_sum
from .hyperterm import EvaluationPole, Universe, _qbracket_value, eval_ratfunc, similar_ratio
from .residue import (
    BoundaryEvidence,
    ResidueSum,
    SequenceKind,
    SumSpec,
    boundary_vanishes,
    eval_sequence,
    rewrite_sum,
)
from .telescope import Member, TelescopeFailure, TelescopeResult, box_shifts, telescope, verify_core

__all__ = [
    "SumSpec",
    "Strategy",
    "Derivation",
    "ProofCertificate",
    "Oracle",
    "grid_max",
    "eval_sum",
    "derive_recurrence",
    "check_certificate",
    "check_operator",
    "prove_identity",
    "reinterpret_aux_members",
    "load_sum",
]

SCHEMA = 1


def grid_max(default: int = 10) -> int:
    """Verification grid bound, overridable through ``RT_GRID_MAX``."""
    raw = os.environ.get("RT_GRID_MAX")
    if raw is None:
        return default
    try:
        return max(0, int(raw))
    except ValueError:
        raise ValueError(f"RT_GRID_MAX must be an integer, got {raw!r}") from None


# --- oracle evaluation ---------------------------------------------------------------------


class Oracle:
    """Exact evaluation of DSL trees from the defining recurrences.

    Values live in the field of ``U``; ``q`` may be kept symbolic or
    specialised to a rational number.
    """

    def __init__(self, U: Universe, q=None):
        self.U = U
        self.F = U.field
        if q is None:
            self.q = U.gen("q") if "q" in U.names else None
        else:
            self.q = self.F(QQ.convert(q))
        self._sums: dict[int, ResidueSum] = {}

    def _c(self, v) -> FracElement:
        if isinstance(v, FracElement):
            return v
        if hasattr(v, "numerator"):
            return self.F(QQ(int(v.numerator), int(v.denominator)))
        return self.F(QQ.convert(v))

    def _int(self, v: FracElement, node) -> int:
        if not (v.numer.is_ground and v.denom.is_ground):
            raise dsl.DSLError("index does not evaluate to an integer", *node.pos)
        c = QQ.convert(v.numer.LC if not v.numer.is_zero else 0) / QQ.convert(v.denom.LC)
        if c.denominator != 1:
            raise dsl.DSLError(f"index {c} is not an integer", *node.pos)
        return int(c.numerator)

    def eval(self, node, env: Mapping[str, object]) -> FracElement:
        ev = lambda n: self.eval(n, env)  # noqa: E731
        idx = lambda n: self._int(ev(n), n)  # noqa: E731
        if isinstance(node, dsl.Num):
            return self._c(node.value)
        if isinstance(node, dsl.Sym):
            if node.name == "q" and self.q is not None:
                return self.q
            if node.name in env:
                return self._c(env[node.name])
            if node.name in self.U.names:
                return self.U.gen(node.name)
            raise dsl.DSLError(f"unbound symbol {node.name!r}", *node.pos)
        if isinstance(node, dsl.Neg):
            return -ev(node.arg)
        if isinstance(node, dsl.BinOp):
            if node.op == "^":
                return self._power(ev(node.left), idx(node.right), node)
            a, b = ev(node.left), ev(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if is_zero(b):
                raise EvaluationPole("division by zero")
            return a / b
        if isinstance(node, dsl.Cases):
            same = is_zero(ev(node.cond_lhs) - ev(node.cond_rhs))
            return ev(node.then) if same else ev(node.other)
        if isinstance(node, dsl.Sum):
            return self.sum(node, env)
        if isinstance(node, dsl.Call):
            return self._call(node, env, ev, idx)
        raise TypeError(f"cannot evaluate {node!r}")  # pragma: no cover

    def _power(self, base: FracElement, e: int, node) -> FracElement:
        if e < 0 and is_zero(base):
            raise EvaluationPole("zero to a negative power")
        return base**e if e else self.F.one

    def _call(self, node, env, ev, idx):
        name, args = node.name, node.args
        if name == "binom":
            a, b = idx(args[0]), idx(args[1])
            return self._c(_binomial(a, b))
        if name == "qbinom":
            a, b = idx(args[0]), idx(args[1])
            return _qbinomial(a, b, self._qv())
        if name == "fact":
            a = idx(args[0])
            if a < 0:
                raise EvaluationPole(f"factorial of {a}")
            out = 1
            for i in range(2, a + 1):
                out *= i
            return self._c(out)
        if name == "dfact":
            a = idx(args[0])
            if a < -1:
                raise EvaluationPole(f"double factorial of {a}")
            out = 1
            for i in range(a, 0, -2):
                out *= i
            return self._c(out)
        if name == "pow":
            return self._power(ev(args[0]), idx(args[1]), node)
        if name in ("S1", "S2"):
            return self._c(eval_sequence(name, (idx(args[0]), idx(args[1]))))
        if name in ("qS1", "qS2"):
            return eval_sequence(name, (idx(args[0]), idx(args[1])), q=self._qv())
        if name == "bernoulli":
            return self._c(eval_sequence(SequenceKind.BERNOULLI, (idx(args[0]),)))
        if name == "bernpoly":
            return eval_sequence(SequenceKind.BERNOULLI_POLY, (idx(args[0]),), x=ev(args[1]))
        raise dsl.DSLError(f"unknown function {name!r}", *node.pos)  # pragma: no cover

    def _qv(self):
        if self.q is None:
            raise dsl.DSLError("q-functions need q in the coefficient field")
        return self.q

    def sum(self, node: dsl.Sum, env: Mapping[str, object]) -> FracElement:
        if node.lo is not None:
            lo = self._int(self.eval(node.lo, env), node.lo)
            hi = self._int(self.eval(node.hi, env), node.hi)
        else:
            rs = self._sums.get(id(node))
            if rs is None:
                rs = rewrite_sum(SumSpec.from_ast(node))
                self._sums[id(node)] = rs
            rng = rs.bounds({p: int(env[p]) for p in rs.U.params})
            if rng is None:
                return self.F.zero
            lo, hi = rng
        acc = self.F.zero
        for kk in range(lo, hi + 1):
            acc = acc + self.eval(node.body, {**env, node.var: kk})
        return acc


def _binomial(a: int, b: int) -> int:
    if b < 0:
        return 0
    if a >= 0 and b > a:
        return 0
    num, den = 1, 1
    for i in range(b):
        num *= a - i
        den *= i + 1
    return num // den


def _qbinomial(a: int, b: int, q):
    if b < 0 or (a >= 0 and b > a):
        return q * 0
    acc = q**0
    for i in range(b):
        acc = acc * _qbracket_value(a - i, q) / _qbracket_value(i + 1, q)
    return acc


def eval_sum(rsum: ResidueSum, point: Mapping[str, int], q=None) -> FracElement:
    """The left-hand sum at ``point`` from the sequence oracles."""
    orc = Oracle(rsum.U, q)
    node = rsum.spec.node
    if node.lo is None:
        rng = rsum.bounds(point)
        if rng is None:
            return orc.F.zero
        lo, hi = rng
        acc = orc.F.zero
        for kk in range(lo, hi + 1):
            acc = acc + orc.eval(node.body, {**point, node.var: kk})
        return acc
    return orc.eval(node, point)


def load_sum(text: str, params: Sequence[str] | None = None) -> ResidueSum:
    """Parse a sum (or the left side of an identity) into residue form."""
    node, ident = _parse_sum_or_identity(text)
    return rewrite_sum(SumSpec.from_ast(node, ident, params))


def _parse_sum_or_identity(text: str):
    if "==" in text:
        ident = dsl.parse_identity(text)
        return ident.lhs, ident
    node = dsl.parse_expr(text)
    if not isinstance(node, dsl.Sum):
        raise dsl.DSLError("expected a sum", 1, 1)
    return node, None


# --- recurrence derivation ---------------------------------------------------------------------


@dataclass(frozen=True)
class Strategy:
    """Search options; ``shifts`` overrides the default box sequence."""

    op_vars: tuple[str, ...] | None = None
    shifts: tuple[tuple[int, ...], ...] | None = None
    aux_degree: int = 0
    derivative: tuple[tuple[tuple[int, ...], str], ...] = ()
    route: str = "auto"  # auto | zeilberger | celine


@dataclass
class Derivation:
    result: TelescopeResult | None
    route: str
    searched: list = field(default_factory=list)
    analysis: ApplicabilityReport | None = None
    boundary: BoundaryEvidence | None = None
    failure: str = ""

    @property
    def ok(self) -> bool:
        return self.result is not None


def _candidate_sets(r: int) -> list[list[tuple[int, ...]]]:
    out = [box_shifts([1] * r), box_shifts([2] * r)]
    for i in range(r):
        out.append(box_shifts([2 if j == i else 1 for j in range(r)]))
    seen, uniq = set(), []
    for c in out:
        key = tuple(c)
        if key not in seen:
            seen.add(key)
            uniq.append(c)
    return uniq


def _default_grid(rsum: ResidueSum, side: int) -> list[dict[str, int]]:
    ps = rsum.U.params
    return [dict(zip(ps, v)) for v in itertools.product(range(side + 1), repeat=len(ps))]


def _compact(res: TelescopeResult, telescoping: bool) -> TelescopeResult:
    """Re-solve on the nonzero members, translated to the origin."""
    live = [m for m, _ in res.nonzero()]
    low = [min(m.shift[i] for m in live) for i in range(len(res.op_vars))]
    members = [Member(tuple(s - l for s, l in zip(m.shift, low)), m.aux_power, m.derivative) for m in live]
    members.sort(key=Member.sort_key, reverse=True)
    if members == list(res.members):
        return res
    try:
        return telescope(res.term, res.op_vars, members, aux=res.aux, telescoping=telescoping)
    except TelescopeFailure:  # pragma: no cover - the translated support always works
        return res


def _members_for(shifts, aux_degree: int, derivative: Mapping) -> list[Member]:
    members = []
    for s in sorted({tuple(s) for s in shifts}, reverse=True):
        for j in range(aux_degree, -1, -1):
            members.append(Member(s, j, derivative.get(s)))
    return members


def derive_recurrence(rsum: ResidueSum, strategy: Strategy | None = None, grid_side: int = 4) -> Derivation:
    """Search a telescoping relation whose boundary terms vanish."""
    strategy = strategy or Strategy()
    U = rsum.U
    op_vars = tuple(strategy.op_vars or U.params)
    if not op_vars:
        return Derivation(None, "none", failure="the sum has no parameters")
    deriv = dict(strategy.derivative)
    aux = U.aux[0] if strategy.aux_degree and U.aux else None
    special = bool(strategy.aux_degree or deriv)
    grid = _default_grid(rsum, grid_side)

    analysis = None
    route = strategy.route
    if route == "auto" and not special:
        analysis = analyze_sum(rsum.base, op_vars, box_shifts([1] * len(op_vars)))
        # the verdict concerns the residue form; without aux variables we search the plain term
        route = "celine" if analysis.verdict == FORCED_ZERO and U.aux else "zeilberger"
    if route == "auto":
        route = "zeilberger"

    cands = [list(strategy.shifts)] if strategy.shifts else _candidate_sets(len(op_vars))
    searched = []
    for shifts in cands:
        members = _members_for(shifts, strategy.aux_degree, deriv)
        searched.append([m.label(op_vars, aux) for m in members])
        try:
            res = telescope(rsum.base, op_vars, members, aux=aux, telescoping=(route != "celine"))
        except TelescopeFailure:
            continue
        res = _compact(res, route != "celine") if not strategy.shifts else res
        if special:
            ev = boundary_vanishes(res, rsum, None)
            if ev.verdict == "unknown":
                ev = BoundaryEvidence("unknown", "boundary check for auxiliary or derivative members is done by the caller")
        else:
            ev = boundary_vanishes(res, rsum, grid)
            if ev.verdict == "unknown":
                continue
        name = "sister-celine" if route == "celine" else "extended-zeilberger"
        return Derivation(res, name, searched, analysis, ev)
    return Derivation(None, route, searched, analysis, failure="no relation with vanishing boundary terms in the searched shift sets")


def check_certificate(result: TelescopeResult) -> bool:
    """Independent exact check of the telescoping identity."""
    try:
        return verify_core(result.term, result.op_vars, result.members, result.coefficients, result.certificate, result.aux)
    except (ValueError, ZeroDivisionError):
        return False


def _operator_at(result: TelescopeResult, P: Mapping[str, int], q=None):
    U = result.U
    out = []
    for m, c in zip(result.members, result.coefficients):
        v = eval_ratfunc(c, U, P)
        if q is not None:
            v = v.subs(U.gen("q"), q) if "q" in U.names else v
        out.append((m, v))
    return out


def _shifted(P: Mapping[str, int], op_vars, shift) -> dict[str, int]:
    Q = dict(P)
    for v, s in zip(op_vars, shift):
        Q[v] = Q[v] + s
    return Q


def check_operator(result: TelescopeResult, values, grid: Iterable[Mapping[str, int]], q=None) -> list[dict]:
    """Points of ``grid`` where the operator does not annihilate ``values``.

    ``values(point)`` returns the sequence value; derivative members are
    differentiated in the variable they carry, aux-power members are not
    supported here.
    """
    U = result.U
    bad = []
    for P in grid:
        try:
            ops = _operator_at(result, P, q)
        except EvaluationPole:
            continue
        acc = U.field.zero
        for m, c in ops:
            if is_zero(c):
                continue
            if m.aux_power:
                raise ValueError("aux-power members need reinterpretation before evaluation")
            v = values(_shifted(P, result.op_vars, m.shift))
            if m.derivative:
                v = v.diff(U.gen(m.derivative))
            acc = acc + c * v
        if not is_zero(acc):
            bad.append(dict(P))
    return bad


# --- aux-power members ----------------------------------------------------------------------------


def reinterpret_aux_members(result: TelescopeResult, target: ResidueSum, reach: int = 2) -> list[tuple[Member, FracElement, tuple[int, ...] | None]]:
    """Read ``aux**j * F(n + a)`` back as a shift of the sum ``target``.

    Multiplying a catalogued kernel by a power of its auxiliary variable
    shifts an index of the represented sequence; when the resulting summand
    equals the summand of ``target`` at ``n + b`` the member stands for
    ``target(n + b)``.  Returns ``(member, coefficient, b)`` for each nonzero
    member with a positive aux power (``b`` is ``None`` if nothing matches).
    """
    F = result.term
    U = F.U
    T = target.base
    if T.U != U:
        raise ValueError("target sum lives in a different universe")
    out = []
    rng = range(-reach, reach + 1)
    for m, c in result.nonzero():
        if not m.aux_power:
            continue
        t = F.shift_many(dict(zip(result.op_vars, m.shift))) * U.gen(result.aux) ** m.aux_power
        found = None
        for b in itertools.product(rng, repeat=len(result.op_vars)):
            r = similar_ratio(t, T.shift_many(dict(zip(result.op_vars, b))))
            if r is not None and is_zero(r - 1):
                found = b
                break
        out.append((m, c, found))
    return out


# --- proof objects -------------------------------------------------------------------------------


@dataclass
class ProofCertificate:
    identity: str
    sum_text: str
    params: tuple[str, ...]
    verdict: str  # proved | refuted | inconclusive
    reason: str = ""
    route: str = ""
    result: TelescopeResult | None = None
    boundary: BoundaryEvidence | None = None
    initial_values: list = field(default_factory=list)
    rhs_check: dict = field(default_factory=dict)
    counterexample: dict | None = None
    analysis: dict | None = None
    searched: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    qmode: bool = False

    def operator_text(self) -> str:
        if self.result is None:
            return ""
        return operator_text(self.result)

    def as_dict(self) -> dict:
        d: dict = {
            "schema": SCHEMA,
            "identity": self.identity,
            "sum": self.sum_text,
            "params": list(self.params),
            "field": "Q(q)" if self.qmode else "Q",
            "verdict": self.verdict,
            "reason": self.reason,
            "route": self.route,
        }
        if self.result is not None:
            d.update(result_dict(self.result))
        if self.boundary is not None:
            d["boundary"] = self.boundary.as_dict()
        d["initial_values"] = self.initial_values
        d["rhs_check"] = self.rhs_check
        if self.counterexample is not None:
            d["counterexample"] = self.counterexample
        if self.analysis is not None:
            d["applicability"] = self.analysis
        if self.searched:
            d["searched_shift_sets"] = self.searched
        if self.notes:
            d["notes"] = self.notes
        return d


def operator_text(result: TelescopeResult) -> str:
    U = result.U
    ren = U.rename_map()
    parts = []
    for m, c in result.nonzero():
        lab = m.label(result.op_vars, result.aux).replace("F(", "L(")
        parts.append(f"({ratfunc_text(c, ren)})*{lab}")
    return " + ".join(parts) + " = 0"


def result_dict(result: TelescopeResult) -> dict:
    U = result.U
    ren = U.rename_map()
    return {
        "base_term": result.term.text(),
        "variables": list(U.names),
        "aux": list(U.aux),
        "op_vars": list(result.op_vars),
        "shift_set": [
            {"shift": list(m.shift), "aux_power": m.aux_power, "derivative": m.derivative, "label": m.label(result.op_vars, result.aux)}
            for m in result.members
        ],
        "aux_variable": result.aux,
        "coefficients": [ratfunc_text(c) for c in result.coefficients],
        "coefficients_display": [ratfunc_text(c, ren) for c in result.coefficients],
        "certificate_ratfunc": ratfunc_text(result.certificate),
        "operator": operator_text(result),
    }


def result_from_dict(d: Mapping, rsum: ResidueSum) -> TelescopeResult:
    """Rebuild a telescoping result from its JSON form."""
    U = rsum.U
    if list(U.names) != list(d["variables"]):
        raise ValueError("certificate variables do not match the sum")
    members = tuple(Member(tuple(m["shift"]), m.get("aux_power", 0), m.get("derivative")) for m in d["shift_set"])
    coeffs = tuple(parse_ratfunc(c, U.field) for c in d["coefficients"])
    cert = parse_ratfunc(d["certificate_ratfunc"], U.field)
    return TelescopeResult(rsum.base, tuple(d["op_vars"]), members, coeffs, cert, U.q, d.get("aux_variable"))


# --- proving ----------------------------------------------------------------------------------


def _point_order(points: list[dict[str, int]], params) -> list[dict[str, int]]:
    """Interior points first, then by size, ties in colexicographic order."""

    def key(P):
        v = [P[p] for p in params]
        return (min(v, default=1) == 0, sum(v), tuple(reversed(v)))

    return sorted(points, key=key)


def _fmt(v: FracElement, U: Universe) -> str:
    return ratfunc_text(v, U.rename_map())


def _rhs_symbolic(result: TelescopeResult, rhs, rsum: ResidueSum) -> bool | None:
    """Does the operator annihilate the residue kernel of the right side?

    ``None`` when the right side has no hypergeometric residue form.
    """
    if any(m.aux_power for m in result.members):
        return None
    U = rsum.U
    node = dsl.Sum(rsum.spec.var, dsl.Num(0), dsl.Num(0), rhs)
    try:
        spec = SumSpec.from_ast(node, None, U.params)
        spec = SumSpec(node, U.params, spec.cont, U.q or spec.qmode)
        rs = rewrite_sum(spec)
    except (dsl.DSLError, ValueError, NotImplementedError):
        return None
    V = rs.U
    try:
        coeffs = tuple(V.field.from_expr(c.as_expr()) for c in result.coefficients)
        return verify_core(rs.base, result.op_vars, result.members, coeffs, V.field.zero, None)
    except (ValueError, ZeroDivisionError, KeyError):
        return None


def prove_identity(text: str, params: Sequence[str] | None = None, strategy: Strategy | None = None, side: int | None = None) -> ProofCertificate:
    """Prove, refute or give up on an identity ``sum(...) == rhs``."""
    ident = dsl.parse_identity(text)
    spec = SumSpec.from_ast(ident.lhs, ident, params)
    rsum = rewrite_sum(spec)
    U = rsum.U
    side = grid_max() if side is None else side
    cert = ProofCertificate(dsl.render(ident), spec.text(), U.params, "inconclusive", qmode=U.q)
    orc = Oracle(U)

    def lhs(P):
        return eval_sum(rsum, P)

    def rhs(P):
        return orc.eval(ident.rhs, P)

    # refutation and initial values share one grid pass
    grid = _point_order(_default_grid(rsum, side), U.params)
    values = {}
    for P in grid:
        try:
            a, b = lhs(P), rhs(P)
        except EvaluationPole as e:
            cert.notes.append(f"skipped {P}: {e}")
            continue
        values[tuple(P[p] for p in U.params)] = (a, b)
        if not is_zero(a - b):
            cert.verdict = "refuted"
            cert.counterexample = {"point": P, "lhs": _fmt(a, U), "rhs": _fmt(b, U)}
            cert.reason = f"sides differ at {P}"
            return cert

    # residue form must reproduce the oracle values
    small = _default_grid(rsum, min(side, 4))
    for P in small:
        if not is_zero(rsum.value(P) - values[tuple(P[p] for p in U.params)][0]):
            cert.reason = f"residue form disagrees with the oracle at {P}"
            return cert

    der = derive_recurrence(rsum, strategy, grid_side=min(side, 5))
    cert.searched = der.searched
    cert.analysis = der.analysis.as_dict() if der.analysis is not None else None
    cert.route = der.route
    if not der.ok:
        cert.reason = der.failure
        return cert
    res = der.result
    cert.result = res
    cert.boundary = der.boundary
    if not check_certificate(res):
        cert.reason = "certificate check failed"
        return cert
    if der.boundary is None or der.boundary.verdict == "unknown":
        cert.reason = "boundary terms not shown to vanish"
        return cert

    # right side satisfies the operator
    sym = _rhs_symbolic(res, ident.rhs, rsum)
    if sym:
        cert.rhs_check = {"mode": "symbolic", "passed": True, "detail": "operator annihilates the residue kernel of the right side"}
    else:
        bad = check_operator(res, rhs, _default_grid(rsum, side))
        cert.rhs_check = {"mode": "grid", "passed": not bad, "grid_max": side, "failures": bad[:5], "label": "grid-certified RHS"}
        if bad:
            cert.reason = f"right side does not satisfy the recurrence at {bad[0]}"
            return cert

    # initial values: faces below the leading shift and zeros of its coefficient
    lead, lead_c = res.nonzero()[0]
    faces = []
    for key in sorted(values):
        P = dict(zip(U.params, key))
        on_face = any(P[v] < s for v, s in zip(res.op_vars, lead.shift))
        if not on_face:
            base = _shifted(P, res.op_vars, tuple(-s for s in lead.shift))
            try:
                on_face = is_zero(eval_ratfunc(lead_c, U, base))
            except EvaluationPole:
                on_face = True
        if on_face:
            a, b = values[key]
            faces.append({"point": P, "lhs": _fmt(a, U), "rhs": _fmt(b, U)})
    cert.initial_values = faces
    if any(m.derivative for m in res.members):
        cert.reason = "a derivative operator fixes the sum only up to a constant in the differentiation variable"
        cert.notes.append("both sides agree on the whole grid")
        return cert
    cert.verdict = "proved"
    cert.reason = "recurrence certified, boundary terms vanish, right side satisfies the recurrence, initial values agree"
    cert.notes.append(f"initial faces are unbounded; they are checked for parameters up to {side} and need a separate induction beyond that")
    return cert


def random_points(rsum: ResidueSum, count: int, side: int, seed: int = 0) -> list[dict[str, int]]:
    rng = random.Random(seed)
    ps = rsum.U.params
    return [{p: rng.randint(0, side) for p in ps} for _ in range(count)]
