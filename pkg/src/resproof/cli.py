"""Command line front end.

Exit codes::

    0   proved / certificate accepted / command succeeded
    1   certificate rejected by ``check``
    2   identity refuted
    3   inconclusive, or no relation found in the searched shift sets
    64  input could not be parsed or rewritten
"""

from __future__ import annotations

import argparse
import ast
import json
import sys
from fractions import Fraction
from typing import Sequence

from . import dsl
from .algebra import is_zero, ratfunc_text
from .hyperterm import eval_ratfunc
from .applicability import FORCED_ZERO, analyze_sum
from .prover import (
    SCHEMA,
    Strategy,
    check_certificate,
    check_operator,
    derive_recurrence,
    eval_sum,
    grid_max,
    load_sum,
    operator_text,
    prove_identity,
    result_dict,
    result_from_dict,
    _default_grid,
)
from .residue import CATALOG, _support_bounds, boundary_vanishes, member_value
from .telescope import box_shifts, sister_celine_basis

EXIT_OK, EXIT_REJECTED, EXIT_REFUTED, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3, 64


def _emit(data, out: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _names(text: str | None) -> tuple[str, ...] | None:
    if not text:
        return None
    return tuple(s.strip() for s in text.split(",") if s.strip())


def parse_shifts(text: str | None, r: int) -> tuple[tuple[int, ...], ...] | None:
    """``"1,1"`` is a box with those sides; ``"(1,1),(0,0)"`` an explicit list."""
    if not text:
        return None
    if "(" in text or "[" in text:
        val = ast.literal_eval(text)
        if val and isinstance(val[0], int):
            val = [val]
        out = tuple(tuple(int(x) for x in s) for s in val)
    else:
        sides = [int(x) for x in text.split(",")]
        if len(sides) == 1:
            sides = sides * r
        out = tuple(box_shifts(sides))
    if any(len(s) != r for s in out):
        raise ValueError(f"shifts must have {r} entries")
    return out


def parse_point(text: str | None) -> dict[str, int]:
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        name, _, val = part.partition("=")
        out[name.strip()] = int(val)
    return out


def _derivatives(items: Sequence[str] | None, r: int):
    out = []
    for item in items or ():
        shift, _, var = item.partition(":")
        s = tuple(int(x) for x in shift.split(","))
        if len(s) != r or not var:
            raise ValueError(f"bad derivative spec {item!r}; expected SHIFT:VAR")
        out.append((s, var.strip()))
    return tuple(out)


def _strategy(args, rsum) -> Strategy | None:
    op_vars = _names(getattr(args, "op_vars", None)) or rsum.U.params
    shifts = parse_shifts(getattr(args, "shifts", None), len(op_vars))
    deriv = _derivatives(getattr(args, "derivative", None), len(op_vars))
    aux = getattr(args, "aux_degree", 0) or 0
    route = getattr(args, "route", "auto") or "auto"
    if shifts is None and not aux and not deriv and route == "auto" and op_vars == rsum.U.params:
        return None
    return Strategy(op_vars=tuple(op_vars), shifts=shifts, aux_degree=aux, derivative=deriv, route=route)


# --- commands ----------------------------------------------------------------------------------


def cmd_prove(args) -> int:
    strategy = None
    if args.shifts or args.aux_degree or args.derivative or args.op_vars:
        ident = dsl.parse_identity(args.identity)
        rsum = load_sum(dsl.render(ident.lhs), _names(args.params))
        strategy = _strategy(args, rsum)
    cert = prove_identity(args.identity, _names(args.params), strategy, args.grid)
    _emit(cert.as_dict(), args.out)
    return {"proved": EXIT_OK, "refuted": EXIT_REFUTED}.get(cert.verdict, EXIT_INCONCLUSIVE)


def cmd_recurrence(args) -> int:
    rsum = load_sum(args.sum, _names(args.params))
    der = derive_recurrence(rsum, _strategy(args, rsum))
    data = {
        "schema": SCHEMA,
        "sum": rsum.spec.text(),
        "params": list(rsum.U.params),
        "field": "Q(q)" if rsum.U.q else "Q",
        "route": der.route,
        "searched_shift_sets": der.searched,
    }
    if der.analysis is not None:
        data["applicability"] = der.analysis.as_dict()
    if not der.ok:
        data["verdict"] = "no-relation"
        data["reason"] = der.failure
        _emit(data, args.out)
        return EXIT_INCONCLUSIVE
    data.update(result_dict(der.result))
    data["boundary"] = der.boundary.as_dict()
    data["verdict"] = "derived"
    _emit(data, args.out)
    return EXIT_OK


def _summed_member(result, mem, P):
    """``sum_k`` of one member term via residues, over the support of that term."""
    U = result.U
    t = result.term.shift_many(dict(zip(result.op_vars, mem.shift)))
    if mem.aux_power:
        t = t * U.gen(result.aux) ** mem.aux_power
    lows, highs, _ = _support_bounds(t)
    if not lows or not highs:
        raise ValueError(f"no finite support for member {mem.label(result.op_vars, result.aux)}")
    lo = max(e.evaluate(P) for e in lows)
    hi = min(e.evaluate(P) for e in highs)
    return sum((member_value(result, mem, P, k) for k in range(lo, hi + 1)), U.field.zero)


def check_document(doc: dict, side: int | None = None) -> tuple[bool, list[str]]:
    """Independent re-check of an emitted certificate."""
    log = []
    if doc.get("schema") != SCHEMA:
        return False, [f"unsupported schema {doc.get('schema')!r}"]
    rsum = load_sum(doc["sum"], doc.get("params"))
    if doc.get("field") != ("Q(q)" if rsum.U.q else "Q"):
        return False, ["field does not match the sum"]
    try:
        res = result_from_dict(doc, rsum)
    except (KeyError, ValueError) as e:
        return False, [f"malformed certificate: {e}"]
    if not check_certificate(res):
        return False, ["telescoping identity fails"]
    log.append("telescoping identity holds")
    side = min(grid_max(), 6) if side is None else side
    grid = _default_grid(rsum, side)
    ev = boundary_vanishes(res, rsum, grid)
    if ev.verdict == "unknown":
        return False, log + [f"boundary: {ev.witness}"]
    log.append(f"boundary: {ev.verdict}")
    if any(m.aux_power for m in res.members):
        bad = []
        for P in grid:
            acc = sum((eval_ratfunc(c, res.U, P) * _summed_member(res, m, P) for m, c in res.nonzero()), res.U.field.zero)
            if not is_zero(acc):
                bad.append(P)
    else:
        bad = check_operator(res, lambda P: eval_sum(rsum, P), grid)
    if bad:
        return False, log + [f"operator fails on the grid at {bad[0]}"]
    log.append(f"operator annihilates the sum for parameters up to {side}")
    return True, log


def cmd_check(args) -> int:
    with open(args.certificate, encoding="utf-8") as fh:
        doc = json.load(fh)
    ok, log = check_document(doc, args.grid)
    for line in log:
        print(line)
    print("accepted" if ok else "rejected")
    return EXIT_OK if ok else EXIT_REJECTED


def cmd_eval(args) -> int:
    rsum = load_sum(args.sum, _names(args.params))
    point = parse_point(args.at)
    missing = [p for p in rsum.U.params if p not in point]
    if missing:
        raise ValueError(f"missing values for {', '.join(missing)}")
    q = Fraction(args.q) if args.q is not None else None
    v = eval_sum(rsum, point, q)
    print(ratfunc_text(v, rsum.U.rename_map()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    rsum = load_sum(args.sum, _names(args.params))
    op_vars = _names(args.op_vars) or rsum.U.params
    shifts = parse_shifts(args.shifts, len(op_vars)) or tuple(box_shifts([1] * len(op_vars)))
    rep = analyze_sum(rsum.base, op_vars, shifts)
    data = {"sum": rsum.spec.text(), "op_vars": list(op_vars), "shifts": [list(s) for s in shifts]}
    data.update(rep.as_dict())
    if rep.verdict == FORCED_ZERO:
        members, basis = sister_celine_basis(rsum.base, op_vars, shifts)
        ren = rsum.U.rename_map()
        data["sister_celine"] = {
            "members": [m.label(op_vars).replace("F(", "L(") for m in members],
            "basis": [[ratfunc_text(c, ren) for c in v] for v in basis],
        }
        der = derive_recurrence(rsum, Strategy(op_vars=tuple(op_vars), shifts=tuple(shifts), route="celine"))
        if der.ok:
            data["operator"] = operator_text(der.result)
    _emit(data, args.out)
    return EXIT_OK


def cmd_catalog(args) -> int:
    for kind, (call, rep, what) in CATALOG.items():
        print(f"{kind.value:9} {call:16} {rep}  ({what})")
    return EXIT_OK


# --- entry point -------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # argparse would exit with 2, which means "refuted" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="resproof", description="Residue-method recurrences and proofs for sums of special numbers.")
    sub = p.add_subparsers(dest="command", required=True)

    def strategy_opts(sp):
        sp.add_argument("--params", help="parameter order, e.g. n,m")
        sp.add_argument("--op-vars", help="parameters the operator shifts (default: all)")
        sp.add_argument("--shifts", help="box sides '1,1' or explicit list '(1,1),(0,0)'")
        sp.add_argument("--aux-degree", type=int, default=0, help="allow coefficients polynomial in the aux variable up to this degree")
        sp.add_argument("--derivative", action="append", metavar="SHIFT:VAR", help="attach d/dVAR to the member at SHIFT")
        sp.add_argument("--out", help="write JSON here instead of stdout")

    sp = sub.add_parser("prove", help="prove or refute sum(...) == rhs")
    sp.add_argument("identity")
    sp.add_argument("--grid", type=int, default=None, help="verification grid bound (default RT_GRID_MAX or 10)")
    strategy_opts(sp)
    sp.set_defaults(func=cmd_prove)

    sp = sub.add_parser("recurrence", help="derive a recurrence and its certificate")
    sp.add_argument("sum")
    sp.add_argument("--route", choices=("auto", "zeilberger", "celine"), default="auto")
    strategy_opts(sp)
    sp.set_defaults(func=cmd_recurrence)

    sp = sub.add_parser("check", help="re-check a certificate JSON file")
    sp.add_argument("certificate")
    sp.add_argument("--grid", type=int, default=None)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("eval", help="exact value of a sum")
    sp.add_argument("sum")
    sp.add_argument("--at", help="point, e.g. n=3,m=2")
    sp.add_argument("--params")
    sp.add_argument("--q", help="specialize q to this rational")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("analyze", help="applicability of telescoping")
    sp.add_argument("sum")
    sp.add_argument("--params")
    sp.add_argument("--op-vars")
    sp.add_argument("--shifts")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("catalog", help="list sequence kinds and residue forms")
    sp.set_defaults(func=cmd_catalog)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, NotImplementedError, SyntaxError) as e:  # DSLError is a ValueError
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
