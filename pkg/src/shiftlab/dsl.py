"""The operator expression language (.op files).

    space H = l2(2) (+) C(2)
    A = e(0,1) (x) e(t0)
    B = 1/2 * e(t0) (x) e(t1)
    T = S + A + B

Scalars fold to constants while parsing, so an emitted program re-parses to
the same tree.  ``S*`` directly followed by a non-operand is the adjoint
shift; ``adj(...)`` works for anything.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from . import opcore as oc
from .errors import ParseError, ShapeError, ShapeMismatch
from .exactnum import FinMatrix, GaussQ, cq, is_exact
from .opcore import TAIL, SpaceShape, StructuredOperator

# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: object


@dataclass(frozen=True)
class Prim:
    kind: str  # "S", "S*", "I"
    space: str


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Adj:
    arg: object


@dataclass(frozen=True)
class RankOne:
    row: tuple
    row_space: str
    col: tuple
    col_space: str


@dataclass(frozen=True)
class Mat:
    kind: str  # "mat" (tail block) or "smat" (constant strand matrix)
    rows: tuple
    space: str


@dataclass(frozen=True)
class Block:
    rows: tuple  # tuple of tuples of expr or None


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


Expr = Union[Num, Prim, Ref, Adj, RankOne, Mat, Block, BinOp, Neg, Pow]


@dataclass(frozen=True)
class SpaceDecl:
    name: str
    shape: SpaceShape


@dataclass(frozen=True)
class Binding:
    name: str
    expr: object


@dataclass(frozen=True)
class Directive:
    name: str
    value: object


@dataclass(frozen=True)
class Program:
    statements: tuple = ()

    @property
    def bindings(self) -> dict:
        return {s.name: s.expr for s in self.statements if isinstance(s, Binding)}

    @property
    def spaces(self) -> dict:
        return {s.name: s.shape for s in self.statements if isinstance(s, SpaceDecl)}

    @property
    def directives(self) -> dict:
        return {s.name: s.value for s in self.statements if isinstance(s, Directive)}

    def digest(self) -> str:
        return hashlib.sha256(emit(self).encode()).hexdigest()


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>//[^\n]*)
  | (?P<nl>\n)
  | (?P<directive>\#[A-Za-z]+)
  | (?P<num>\d+/\d+i?|(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?i?)
  | (?P<oplus>\(\+\))
  | (?P<otimes>\(x\))
  | (?P<ident>[A-Za-z_][A-Za-z_0-9.]*)
  | (?P<punct>[=+\-*/^()\[\],;:])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    depth = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            if depth == 0:
                out.append(Token("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind in ("ws", "comment"):
            pass
        else:
            if kind == "punct":
                if tok in "([":
                    depth += 1
                elif tok in ")]":
                    depth = max(0, depth - 1)
            if kind == "ident" and tok == "S" and text.startswith("*", m.end()):
                nxt = text[m.end() + 1 : m.end() + 2]
                if not (nxt.isalnum() or (nxt and nxt in "(_")):
                    out.append(Token("ident", "S*", line, col))
                    pos = m.end() + 1
                    continue
            out.append(Token(kind, tok, line, col))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


# ---------------------------------------------------------------- parser

FACTOR_START = ("number", "S", "S*", "I", "adj", "e", "mat", "smat", "block", "identifier", "(", "-")


def _num_value(text: str, exact: bool):
    imag = text.endswith("i")
    body = text[:-1] if imag else text
    v = Fraction(body)
    if not exact:
        v = float(v) if "/" in body else float(body)
    if imag:
        return cq(0, v) if exact else complex(0, v)
    return v


class _Parser:
    def __init__(self, text: str, exact: bool):
        self.toks = tokenize(text)
        self.i = 0
        self.exact = exact
        self.space: str | None = None
        self.spaces: dict[str, SpaceShape] = {}

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, msg: str, expected=()):
        t = self.tok
        what = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{msg}, found {what}", t.line, t.col, expected)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind != "eof":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "eof":
            self.fail(f"expected {text!r}", (text,))
        t = self.tok
        self.i += 1
        return t

    def expect_kind(self, kind: str, label: str) -> Token:
        if self.tok.kind != kind:
            self.fail(f"expected {label}", (label,))
        t = self.tok
        self.i += 1
        return t

    def integer(self) -> int:
        t = self.expect_kind("num", "integer")
        if not t.text.isdigit():
            self.i -= 1
            self.fail("expected integer", ("integer",))
        return int(t.text)

    # statements
    def program(self) -> Program:
        stmts = []
        while True:
            while self.tok.kind == "nl":
                self.i += 1
            if self.tok.kind == "eof":
                break
            stmts.append(self.statement())
            if self.tok.kind not in ("nl", "eof"):
                self.fail("expected end of line", ("newline",))
        return Program(tuple(stmts))

    def statement(self):
        t = self.tok
        if t.kind == "directive":
            return self.directive()
        if t.kind == "ident" and t.text == "space":
            return self.space_decl()
        if t.kind == "ident":
            name = t.text
            if name in ("S", "S*", "I", "adj", "e", "mat", "smat", "block"):
                self.fail(f"{name!r} is reserved", ("identifier",))
            self.i += 1
            self.expect("=")
            if self.space is None:
                raise ParseError("no space declared before the first binding", t.line, t.col)
            return Binding(name, self.expr())
        self.fail("expected a statement", ("space", "identifier", "#mode", "#tol", "#depth"))

    def directive(self) -> Directive:
        t = self.tok
        self.i += 1
        name = t.text[1:]
        if name == "mode":
            v = self.expect_kind("ident", "exact or float").text
            if v not in ("exact", "float"):
                self.i -= 1
                self.fail("expected exact or float", ("exact", "float"))
            self.exact = v == "exact"
            return Directive("mode", v)
        if name == "tol":
            v = self.expect_kind("num", "number").text
            return Directive("tol", float(v))
        if name == "depth":
            return Directive("depth", self.integer())
        raise ParseError(f"unknown directive {t.text!r}", t.line, t.col, ("#mode", "#tol", "#depth"))

    def space_decl(self) -> SpaceDecl:
        self.i += 1
        name = self.expect_kind("ident", "space name").text
        self.expect("=")
        kw = self.expect_kind("ident", "l2 or C")
        if kw.text == "l2":
            self.expect("(")
            p = self.integer()
            self.expect(")")
            q = 0
            if self.tok.kind == "oplus":
                self.i += 1
                if self.tok.text != "C":
                    self.fail("expected C", ("C",))
                self.i += 1
                self.expect("(")
                q = self.integer()
                self.expect(")")
        elif kw.text == "C":
            self.expect("(")
            p, q = 0, self.integer()
            self.expect(")")
        else:
            self.i -= 1
            self.fail("expected l2 or C", ("l2", "C"))
        shape = SpaceShape(p, q)
        self.spaces[name] = shape
        self.space = name
        return SpaceDecl(name, shape)

    # expressions
    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "punct":
            op = self.tok.text
            self.i += 1
            node = _fold(BinOp(op, node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "punct":
            op = self.tok.text
            self.i += 1
            node = _fold(BinOp(op, node, self.unary()))
        return node

    def unary(self):
        if self.tok.text == "-" and self.tok.kind == "punct":
            self.i += 1
            return _fold(Neg(self.unary()))
        return self.power()

    def power(self):
        node = self.factor()
        while self.accept("^"):
            node = _fold(Pow(node, self.integer()))
        return node

    def coord(self):
        self.expect("(")
        space = self.space
        if self.tok.kind == "ident" and self.toks[self.i + 1].text == ":":
            space = self.tok.text
            if space not in self.spaces:
                self.fail(f"unknown space {space!r}", tuple(self.spaces))
            self.i += 2
        if self.tok.kind == "ident" and re.fullmatch(r"t\d+", self.tok.text):
            c = (TAIL, int(self.tok.text[1:]))
            self.i += 1
        else:
            lv = self.integer()
            self.expect(",")
            c = (lv, self.integer())
        self.expect(")")
        return c, space

    def matrix_rows(self):
        self.expect("[")
        rows = []
        row = []
        while True:
            if self.tok.text == "]":
                break
            row.append(self.expr())
            if self.accept(","):
                continue
            if self.accept(";"):
                rows.append(tuple(row))
                row = []
                continue
            if self.tok.text != "]":
                self.fail("expected ',', ';' or ']'", (",", ";", "]"))
        self.expect("]")
        if row:
            rows.append(tuple(row))
        return tuple(rows)

    def factor(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            try:
                return Num(_num_value(t.text, self.exact))
            except ZeroDivisionError:
                raise ParseError("zero denominator", t.line, t.col) from None
        if t.kind == "ident":
            if t.text in ("S", "S*", "I"):
                self.i += 1
                return Prim(t.text, self.space)
            if t.text == "adj":
                self.i += 1
                self.expect("(")
                e = self.expr()
                self.expect(")")
                return _fold(Adj(e))
            if t.text == "e":
                self.i += 1
                row, rs = self.coord()
                if self.tok.kind != "otimes":
                    self.fail("expected (x)", ("(x)",))
                self.i += 1
                if not (self.tok.kind == "ident" and self.tok.text == "e"):
                    self.fail("expected e(...)", ("e",))
                self.i += 1
                col, cs = self.coord()
                return RankOne(row, rs, col, cs)
            if t.text in ("mat", "smat"):
                self.i += 1
                rows = self.matrix_rows()
                for r in rows:
                    for x in r:
                        if not isinstance(x, Num):
                            raise ParseError("matrix entries must be scalars", t.line, t.col)
                return Mat(t.text, tuple(tuple(x.value for x in r) for r in rows), self.space)
            if t.text == "block":
                self.i += 1
                rows = self.matrix_rows()
                grid = tuple(tuple(None if isinstance(x, Num) and x.value == 0 else x for x in r) for r in rows)
                return Block(grid)
            if t.text in ("space", "l2"):
                self.fail("expected an expression", FACTOR_START)
            self.i += 1
            return Ref(t.text)
        if t.text == "(" and t.kind == "punct":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expected an expression", FACTOR_START)


def _fold(node):
    """Constant-fold purely scalar subtrees."""
    if isinstance(node, Neg) and isinstance(node.arg, Num):
        return Num(-node.arg.value)
    if isinstance(node, BinOp) and isinstance(node.left, Num) and isinstance(node.right, Num):
        a, b = node.left.value, node.right.value
        if node.op == "+":
            return Num(a + b)
        if node.op == "-":
            return Num(a - b)
        if node.op == "*":
            return Num(a * b)
        if node.op == "/":
            return Num(a / b)
    if isinstance(node, Pow) and isinstance(node.base, Num):
        return Num(node.base.value**node.exp)
    if isinstance(node, Adj) and isinstance(node.arg, Num):
        return Num(node.arg.value.conjugate())
    if isinstance(node, Adj) and isinstance(node.arg, Prim):
        flip = {"S": "S*", "S*": "S", "I": "I"}
        return Prim(flip[node.arg.kind], node.arg.space)
    return node


def parse_dsl(text: str, exact: bool = True) -> Program:
    return _Parser(text, exact).program()


# ---------------------------------------------------------------- emitter


def emit_scalar(v) -> str:
    """Scalar text that re-parses (and re-folds) to the same value."""
    if isinstance(v, int):
        v = Fraction(v)
    if isinstance(v, Fraction):
        s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        return f"({s})" if v < 0 or v.denominator != 1 else s
    if isinstance(v, GaussQ):
        return f"({emit_scalar(v.re)}+{emit_scalar(v.im)}*1i)"
    c = complex(v)
    re_txt = repr(c.real) if c.real >= 0 else f"({c.real!r})"
    if c.imag == 0:
        return re_txt
    im_txt = repr(c.imag) if c.imag >= 0 else f"({c.imag!r})"
    return f"({re_txt}+{im_txt}*1i)"


_scalar = emit_scalar


def _coord(c, space: str) -> str:
    inner = f"t{c[1]}" if c[0] == TAIL else f"{c[0]},{c[1]}"
    return f"({space}: {inner})"


def emit_expr(e) -> str:
    if isinstance(e, Num):
        return _scalar(e.value)
    if isinstance(e, Prim):
        return "adj(S)" if e.kind == "S*" else e.kind
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, Adj):
        return f"adj({emit_expr(e.arg)})"
    if isinstance(e, RankOne):
        return f"(e{_coord(e.row, e.row_space)} (x) e{_coord(e.col, e.col_space)})"
    if isinstance(e, Mat):
        body = "; ".join(", ".join(_scalar(x) for x in r) for r in e.rows)
        return f"{e.kind}[{body}]"
    if isinstance(e, Block):
        body = "; ".join(", ".join("0" if x is None else emit_expr(x) for x in r) for r in e.rows)
        return f"block[{body}]"
    if isinstance(e, BinOp):
        return f"({emit_expr(e.left)} {e.op} {emit_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(-{emit_expr(e.arg)})"
    if isinstance(e, Pow):
        return f"{_atom(emit_expr(e.base))}^{e.exp}"
    raise TypeError(f"not an expression node: {e!r}")


def _atom(s: str) -> str:
    return s if s.startswith("(") or re.fullmatch(r"[A-Za-z_]\w*", s) else f"({s})"


def emit(program: Program) -> str:
    lines = []
    for s in program.statements:
        if isinstance(s, SpaceDecl):
            sh = s.shape
            if sh.p == 0:
                lines.append(f"space {s.name} = C({sh.q})")
            elif sh.q == 0:
                lines.append(f"space {s.name} = l2({sh.p})")
            else:
                lines.append(f"space {s.name} = l2({sh.p}) (+) C({sh.q})")
        elif isinstance(s, Directive):
            lines.append(f"#{s.name} {s.value}")
        else:
            lines.append(f"{s.name} = {emit_expr(s.expr)}")
    return "\n".join(lines) + "\n"


def emit_operator(op: StructuredOperator, name: str = "T", space: str = "H") -> str:
    """A program defining ``name`` as the given operator."""
    sh = op.shape_in
    if op.shape_in != op.shape_out:
        raise ShapeMismatch("only operators on a single space can be emitted")
    decl = SpaceDecl(space, sh)
    terms = []
    for k in op.symbol_powers():
        c = op.symbol_coeff(k)
        m = Mat("smat", tuple(tuple(r) for r in c.entries), space)
        if k == 0:
            terms.append(m)
        else:
            base = Prim("S", space) if k > 0 else Prim("S*", space)
            sh_term = base if abs(k) == 1 else Pow(base, abs(k))
            terms.append(BinOp("*", m, sh_term))
    for (r, c), v in sorted(op.kernel.items(), key=lambda kv: (oc.coord_sort_key(kv[0][0]), oc.coord_sort_key(kv[0][1]))):
        r1 = RankOne(r, space, c, space)
        terms.append(r1 if v == 1 else BinOp("*", Num(v), r1))
    if not terms:
        expr = BinOp("*", Num(Fraction(0)), Prim("I", space))
    else:
        expr = terms[0]
        for t in terms[1:]:
            expr = BinOp("+", expr, t)
    return emit(Program((decl, Binding(name, expr))))


# ---------------------------------------------------------------- evaluator


@dataclass
class Env:
    program: Program
    values: dict = field(default_factory=dict)


def _to_mode(v, exact: bool):
    if exact:
        return v
    return complex(v)


def evaluate(program: Program, exact: bool | None = None) -> dict:
    """Evaluate every binding; returns name -> operator or scalar."""
    mode = program.directives.get("mode")
    if exact is None:
        exact = mode != "float"
    spaces: dict = {}
    values: dict = {}
    for s in program.statements:
        if isinstance(s, SpaceDecl):
            spaces[s.name] = s.shape
        elif isinstance(s, Binding):
            try:
                v = _eval(s.expr, spaces, values, (s.name,))
            except ShapeMismatch as exc:
                raise ShapeError(str(exc), (s.name,)) from exc
            if isinstance(v, StructuredOperator) and not exact:
                v = oc.to_float_op(v)
            values[s.name] = v
    return values


def _eval(e, spaces, values, trace):
    def sub(x, label):
        return _eval(x, spaces, values, trace + (label,))

    if isinstance(e, Num):
        return e.value
    if isinstance(e, Prim):
        sh = spaces[e.space]
        return {"S": oc.shift, "S*": oc.adjoint_shift, "I": oc.identity}[e.kind](sh)
    if isinstance(e, Ref):
        if e.name not in values:
            raise ShapeError(f"unbound name {e.name!r}", trace)
        return values[e.name]
    if isinstance(e, Adj):
        v = sub(e.arg, "adj")
        return oc.adjoint(v) if isinstance(v, StructuredOperator) else v.conjugate()
    if isinstance(e, RankOne):
        rs, cs = spaces[e.row_space], spaces[e.col_space]
        try:
            return oc.rank_one(rs, e.row, e.col, Fraction(1), cs)
        except ShapeMismatch as exc:
            raise ShapeError(str(exc), trace) from exc
    if isinstance(e, Mat):
        sh = spaces[e.space]
        m = FinMatrix.from_rows([list(r) for r in e.rows])
        try:
            return oc.tail_block(m, sh) if e.kind == "mat" else oc.strand_matrix(m, sh)
        except ShapeMismatch as exc:
            raise ShapeError(str(exc), trace) from exc
    if isinstance(e, Block):
        grid = [[None if x is None else sub(x, "block") for x in r] for r in e.rows]
        for r in grid:
            for x in r:
                if x is not None and not isinstance(x, StructuredOperator):
                    raise ShapeError("block entries must be operators or 0", trace)
        try:
            return oc.block_compose(grid)
        except ShapeMismatch as exc:
            raise ShapeError(str(exc), trace) from exc
    if isinstance(e, Neg):
        v = sub(e.arg, "-")
        return oc.scale(-1, v) if isinstance(v, StructuredOperator) else -v
    if isinstance(e, Pow):
        v = sub(e.base, "^")
        if not isinstance(v, StructuredOperator):
            return v**e.exp
        if not v.is_square:
            raise ShapeError("power of a non-square operator", trace)
        out = oc.identity(v.shape_in)
        for _ in range(e.exp):
            out = oc.multiply(out, v)
        return out
    if isinstance(e, BinOp):
        a = sub(e.left, e.op)
        b = sub(e.right, e.op)
        ao, bo = isinstance(a, StructuredOperator), isinstance(b, StructuredOperator)
        try:
            if e.op in "+-":
                if not ao and not bo:
                    return a + b if e.op == "+" else a - b
                if not ao:
                    a = oc.scale(a, oc.identity(b.shape_out))
                if not bo:
                    b = oc.scale(b, oc.identity(a.shape_in))
                return oc.add(a, b) if e.op == "+" else oc.add(a, oc.scale(-1, b))
            if e.op == "*":
                if ao and bo:
                    return oc.multiply(a, b)
                if ao:
                    return oc.scale(b, a)
                if bo:
                    return oc.scale(a, b)
                return a * b
            if e.op == "/":
                if bo:
                    raise ShapeError("cannot divide by an operator", trace)
                return oc.scale(1 / b, a) if ao else a / b
        except ShapeMismatch as exc:
            raise ShapeError(str(exc), trace) from exc
    raise TypeError(f"cannot evaluate {e!r}")


def load_operator(text: str, name: str, exact: bool | None = None) -> StructuredOperator:
    prog = parse_dsl(text, exact if exact is not None else True)
    vals = evaluate(prog, exact)
    if name not in vals:
        raise KeyError(f"no binding named {name!r}")
    v = vals[name]
    if not isinstance(v, StructuredOperator):
        raise ShapeError(f"{name!r} is a scalar, not an operator", (name,))
    return v
