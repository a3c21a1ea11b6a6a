"""Parser and renderer for the identity language.

Grammar::

    identity := sumexpr [ "==" rhs ]
    rhs      := expr [ "when" expr "==" expr "else" expr ]
    sumexpr  := "sum" "(" NAME [ "=" expr ".." expr ] "," expr ")"
    expr     := term { ("+" | "-") term }
    term     := unary { ("*" | "/") unary }
    unary    := "-" unary | power
    power    := atom [ "^" unary ]
    atom     := INT | NAME | NAME "(" expr { "," expr } ")" | sumexpr | "(" expr ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .hyperterm import LinExpr

__all__ = [
    "DSLError",
    "Num",
    "Sym",
    "Call",
    "BinOp",
    "Neg",
    "Sum",
    "Cases",
    "Identity",
    "FUNCTIONS",
    "parse_identity",
    "parse_expr",
    "render",
    "free_symbols",
    "to_linexpr",
    "walk",
]

FUNCTIONS = {
    "binom": 2,
    "qbinom": 2,
    "fact": 1,
    "dfact": 1,
    "S1": 2,
    "S2": 2,
    "qS1": 2,
    "qS2": 2,
    "pow": 2,
    "bernoulli": 1,
    "bernpoly": 2,
}

KEYWORDS = {"sum", "when", "else"}


class DSLError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {message}" if line else message)


Pos = tuple[int, int]


@dataclass(frozen=True)
class Num:
    value: int
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Sym:
    name: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    arg: "Node"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Sum:
    var: str
    lo: "Node | None"
    hi: "Node | None"
    body: "Node"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Cases:
    """``then when cond_lhs == cond_rhs else other``."""

    cond_lhs: "Node"
    cond_rhs: "Node"
    then: "Node"
    other: "Node"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Identity:
    lhs: Sum
    rhs: "Node | None"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


Node = Union[Num, Sym, Call, BinOp, Neg, Sum, Cases]


# --- lexer -----------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\.\.|==|\*\*|[-+*/^(),=]))")


@dataclass(frozen=True)
class Tok:
    kind: str  # INT, NAME, OP, END
    text: str
    pos: Pos


def tokenize(text: str) -> list[Tok]:
    toks = []
    i = 0
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def pos(j: int) -> Pos:
        ln = max(idx for idx, s in enumerate(line_starts) if s <= j)
        return ln + 1, j - line_starts[ln] + 1

    while True:
        while i < len(text) and text[i].isspace():
            i += 1
        if i >= len(text):
            break
        m = _TOKEN.match(text, i)
        if not m:
            raise DSLError(f"unexpected character {text[i]!r}", *pos(i))
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(Tok("INT", m.group(1), pos(start)))
        elif m.group(2):
            toks.append(Tok("NAME", m.group(2), pos(start)))
        else:
            op = "^" if m.group(3) == "**" else m.group(3)
            toks.append(Tok("OP", op, pos(start)))
        i = m.end()
    toks.append(Tok("END", "", pos(len(text))))
    return toks


# --- parser ------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: Tok | None = None):
        t = tok or self.tok
        return DSLError(msg, *t.pos)

    def accept(self, text: str) -> Tok | None:
        t = self.tok
        if t.text == text and t.kind in ("OP", "NAME"):
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Tok:
        t = self.accept(text)
        if t is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return t

    def name(self) -> Tok:
        t = self.tok
        if t.kind != "NAME" or t.text in KEYWORDS:
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def identity(self) -> Identity:
        if self.tok.text != "sum":
            raise self.error("an identity must start with sum(...)")
        lhs = self.sum()
        rhs = None
        if self.accept("=="):
            rhs = self.rhs()
        if self.tok.kind != "END":
            raise self.error(f"unexpected {self.tok.text!r}")
        return Identity(lhs, rhs, lhs.pos)

    def rhs(self) -> Node:
        then = self.expr()
        if self.tok.text == "when" and self.tok.kind == "NAME":
            t = self.expect("when")
            cl = self.expr()
            self.expect("==")
            cr = self.expr()
            self.expect("else")
            other = self.expr()
            return Cases(cl, cr, then, other, t.pos)
        return then

    def sum(self) -> Sum:
        t = self.expect("sum")
        self.expect("(")
        var = self.name()
        lo = hi = None
        if self.accept("="):
            lo = self.expr()
            self.expect("..")
            hi = self.expr()
        self.expect(",")
        body = self.expr()
        self.expect(")")
        return Sum(var.text, lo, hi, body, t.pos)

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            t = self.tok
            self.i += 1
            node = BinOp(t.text, node, self.term(), t.pos)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "OP" and self.tok.text in ("*", "/"):
            t = self.tok
            self.i += 1
            node = BinOp(t.text, node, self.unary(), t.pos)
        return node

    def unary(self) -> Node:
        t = self.accept("-")
        if t:
            return Neg(self.unary(), t.pos)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        t = self.accept("^")
        if t:
            return BinOp("^", base, self.unary(), t.pos)
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "INT":
            self.i += 1
            return Num(int(t.text), t.pos)
        if t.kind == "NAME" and t.text == "sum":
            return self.sum()
        if t.kind == "NAME" and t.text not in KEYWORDS:
            self.i += 1
            if self.accept("("):
                if t.text not in FUNCTIONS:
                    raise self.error(f"unknown function {t.text!r}", t)
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[t.text]:
                    raise self.error(f"{t.text} takes {FUNCTIONS[t.text]} argument(s), got {len(args)}", t)
                return Call(t.text, tuple(args), t.pos)
            return Sym(t.text, t.pos)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {t.text or 'end of input'!r}")


def parse_identity(text: str) -> Identity:
    return _Parser(text).identity()


def parse_expr(text: str) -> Node:
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "END":
        raise p.error(f"unexpected {p.tok.text!r}")
    return node


# --- rendering -------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def render(node) -> str:
    """Text that parses back to an equal tree."""
    if isinstance(node, Identity):
        s = render(node.lhs)
        return s if node.rhs is None else f"{s} == {render(node.rhs)}"
    if isinstance(node, Num):
        return str(node.value)
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(render(a) for a in node.args)})"
    if isinstance(node, Sum):
        rng = "" if node.lo is None else f"={render(node.lo)}..{render(node.hi)}"
        return f"sum({node.var}{rng}, {render(node.body)})"
    if isinstance(node, Cases):
        return f"{render(node.then)} when {render(node.cond_lhs)} == {render(node.cond_rhs)} else {render(node.other)}"
    if isinstance(node, Neg):
        inner = render(node.arg)
        # the operand of unary minus is itself a unary or power
        return f"-{inner}" if _prec(node.arg) >= _PREC["neg"] else f"-({inner})"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = render(node.left), render(node.right)
        if node.op == "^":
            if _prec(node.left) <= p:
                left = f"({left})"
            if _prec(node.right) < _PREC["neg"]:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"cannot render {node!r}")


# --- helpers -------------------------------------------------------------------------


def walk(node) -> Iterator:
    yield node
    if isinstance(node, Identity):
        yield from walk(node.lhs)
        if node.rhs is not None:
            yield from walk(node.rhs)
    elif isinstance(node, Call):
        for a in node.args:
            yield from walk(a)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Neg):
        yield from walk(node.arg)
    elif isinstance(node, Sum):
        for part in (node.lo, node.hi, node.body):
            if part is not None:
                yield from walk(part)
    elif isinstance(node, Cases):
        for part in (node.cond_lhs, node.cond_rhs, node.then, node.other):
            yield from walk(part)


def free_symbols(node) -> list[str]:
    """Symbols in order of first appearance, excluding bound summation variables."""
    out: list[str] = []

    def visit(n, bound):
        if isinstance(n, Sym):
            if n.name not in bound and n.name not in out:
                out.append(n.name)
        elif isinstance(n, Sum):
            for part in (n.lo, n.hi):
                if part is not None:
                    visit(part, bound)
            visit(n.body, bound | {n.var})
        elif isinstance(n, Identity):
            visit(n.lhs, bound)
            if n.rhs is not None:
                visit(n.rhs, bound)
        elif isinstance(n, Call):
            for a in n.args:
                visit(a, bound)
        elif isinstance(n, BinOp):
            visit(n.left, bound)
            visit(n.right, bound)
        elif isinstance(n, Neg):
            visit(n.arg, bound)
        elif isinstance(n, Cases):
            for part in (n.cond_lhs, n.cond_rhs, n.then, n.other):
                visit(part, bound)

    visit(node, frozenset())
    return out


def to_linexpr(node, discrete: set[str] | None = None) -> LinExpr:
    """Integer-linear index expression; raises :class:`DSLError` otherwise."""

    def bad(msg="index expression must be integer-linear"):
        return DSLError(msg, *node.pos)

    if isinstance(node, Num):
        return LinExpr.constant(node.value)
    if isinstance(node, Sym):
        if discrete is not None and node.name not in discrete:
            raise bad(f"{node.name!r} cannot appear in an index")
        return LinExpr.var(node.name)
    if isinstance(node, Neg):
        return -to_linexpr(node.arg, discrete)
    if isinstance(node, BinOp):
        if node.op in "+-":
            a, b = to_linexpr(node.left, discrete), to_linexpr(node.right, discrete)
            return a + b if node.op == "+" else a - b
        if node.op == "*":
            a, b = to_linexpr(node.left, discrete), to_linexpr(node.right, discrete)
            if a.is_constant():
                return b.scale(a.const)
            if b.is_constant():
                return a.scale(b.const)
    raise bad()
