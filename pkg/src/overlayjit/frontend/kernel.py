"""Parser for the restricted OpenCL kernel subset.

Accepted grammar (whitespace and C comments are ignored)::

    kernel  := "__kernel" "void" IDENT "(" param ("," param)* ")" "{" stmt* "}"
    param   := "__global" ["const"] "int" "*" IDENT
    stmt    := "int" IDENT "=" "get_global_id" "(" "0" ")" ";"
             | "int" IDENT "=" expr ";"
             | IDENT "[" IDX "]" "=" expr ";"
    expr    := term (("+" | "-") term)*
    term    := unary ("*" unary)*
    unary   := "-" unary | "+" unary | primary
    primary := INT | IDENT | IDENT "[" IDX "]" | "(" expr ")"

``IDX`` must be the variable bound to ``get_global_id(0)``.  Parameters that
are stored to are outputs, all others are inputs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from ..errors import KernelSyntaxError, MultipleAssignment, UnsupportedConstruct

__all__ = [
    "Num", "Local", "Load", "BinOp", "Neg", "Expr",
    "Param", "Let", "Store", "KernelAST", "parse_kernel",
]


# -- AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Local:
    name: str


@dataclass(frozen=True)
class Load:
    param: str


@dataclass(frozen=True)
class BinOp:
    op: str  # "add" | "sub" | "mul"
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Num, Local, Load, BinOp, Neg]


@dataclass(frozen=True)
class Param:
    name: str
    direction: str  # "input" | "output"


@dataclass(frozen=True)
class Let:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Store:
    param: str
    expr: Expr


@dataclass(frozen=True)
class KernelAST:
    name: str
    params: tuple[Param, ...]
    index_var: str
    body: tuple[Union[Let, Store], ...]

    @property
    def inputs(self) -> list[str]:
        return [p.name for p in self.params if p.direction == "input"]

    @property
    def outputs(self) -> list[str]:
        return [p.name for p in self.params if p.direction == "output"]

    def operation_count(self) -> int:
        """Arithmetic operators in the body, counting each let once."""
        return sum(_count_ops(stmt.expr) for stmt in self.body)


def _count_ops(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 1 + _count_ops(e.lhs) + _count_ops(e.rhs)
    if isinstance(e, Neg):
        return 1 + _count_ops(e.operand)
    return 0


# -- lexer ----------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<float>(?:\d+\.\d*|\.\d+|\d+[eE][+-]?\d+)[fF]?|\d+[fF])
  | (?P<int>0[xX][0-9a-fA-F]+|\d+)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<op><<|>>|\+\+|--|\+=|-=|\*=|/=|==|!=|<=|>=|&&|\|\||->|[-+*/%=<>!&|^~?:;,(){}\[\].])
""", re.VERBOSE | re.DOTALL)

_CONTROL = {"if", "else", "switch", "case", "goto", "return", "break", "continue"}
_LOOPS = {"for", "while", "do"}
_FLOAT_TYPES = {"float", "double", "half"}
_OTHER_TYPES = {"char", "short", "long", "unsigned", "signed", "uint", "uchar",
                "ushort", "ulong", "size_t", "bool"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise KernelSyntaxError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "float":
            raise UnsupportedConstruct("floating point", f"literal {text!r} at line {line}")
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# -- parser ---------------------------------------------------------------------

class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0
        self.params: dict[str, str] = {}
        self.locals: set[str] = set()
        self.index_var: str | None = None
        self.loaded: set[str] = set()
        self.stored: set[str] = set()

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _error(self, msg, tok=None):
        tok = tok or self.tok
        return KernelSyntaxError(msg, tok.line, tok.col)

    def advance(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def check(self, text) -> bool:
        return self.tok.text == text and self.tok.kind != "eof"

    def expect(self, text) -> _Tok:
        if not self.check(text):
            shown = self.tok.text or "end of input"
            raise self._error(f"expected {text!r}, found {shown!r}")
        return self.advance()

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise self._error(f"expected identifier, found {t.text or 'end of input'!r}")
        self._screen_keyword(t)
        self.advance()
        return t.text

    def _screen_keyword(self, t: _Tok):
        if t.text in _CONTROL:
            raise UnsupportedConstruct("control flow", f"{t.text!r} at line {t.line}")
        if t.text in _LOOPS:
            raise UnsupportedConstruct("loop", f"{t.text!r} at line {t.line}")
        if t.text in _FLOAT_TYPES:
            raise UnsupportedConstruct("floating point", f"type {t.text!r} at line {t.line}")
        if t.text in _OTHER_TYPES:
            raise UnsupportedConstruct("non-int type", f"type {t.text!r} at line {t.line}")

    # grammar
    def kernel(self) -> KernelAST:
        self.expect("__kernel")
        self.expect("void")
        name = self.ident()
        self.expect("(")
        order = [self.param()]
        while self.check(","):
            self.advance()
            order.append(self.param())
        self.expect(")")
        self.expect("{")
        body = []
        while not self.check("}"):
            if self.tok.kind == "eof":
                raise self._error("unexpected end of input inside kernel body")
            stmt = self.statement()
            if stmt is not None:
                body.append(stmt)
        self.expect("}")
        if self.tok.kind != "eof":
            raise self._error("trailing input after kernel")
        if self.index_var is None:
            raise KernelSyntaxError("kernel never binds get_global_id(0)")
        both = self.loaded & self.stored
        if both:
            raise UnsupportedConstruct("read-write parameter", ", ".join(sorted(both)))
        params = tuple(Param(p, "output" if p in self.stored else "input") for p in order)
        return KernelAST(name, params, self.index_var, tuple(body))

    def param(self) -> str:
        if self.check("__local") or self.check("__constant") or self.check("__private"):
            raise UnsupportedConstruct("address space", self.tok.text)
        self.expect("__global")
        if self.check("const"):
            self.advance()
        t = self.tok
        if t.text != "int":
            if t.kind == "ident":
                self._screen_keyword(t)
            raise self._error("parameters must be '__global int *'")
        self.advance()
        self.expect("*")
        name = self.ident()
        if name in self.params:
            raise self._error(f"duplicate parameter {name!r}")
        self.params[name] = name
        return name

    def statement(self):
        t = self.tok
        if t.kind == "ident":
            self._screen_keyword(t)
        if self.check("int"):
            self.advance()
            name_tok = self.tok
            name = self.ident()
            self.expect("=")
            if name in self.locals or name == self.index_var or name in self.params:
                raise MultipleAssignment(f"variable {name!r} bound twice (line {name_tok.line})")
            if self.check("get_global_id"):
                self.advance()
                self.expect("(")
                dim = self.tok
                if dim.kind != "int":
                    raise self._error("get_global_id expects an integer literal")
                if int(dim.text, 0) != 0:
                    raise UnsupportedConstruct("multi-dimensional NDRange", f"get_global_id({dim.text})")
                self.advance()
                self.expect(")")
                self.expect(";")
                if self.index_var is not None:
                    raise MultipleAssignment("get_global_id(0) bound more than once")
                self.index_var = name
                return None
            expr = self.expr()
            self.expect(";")
            self.locals.add(name)
            return Let(name, expr)
        if t.kind == "ident" and self.toks[self.i + 1].text == "[":
            name = self.ident()
            if name not in self.params:
                raise self._error(f"{name!r} is not a kernel parameter", t)
            self.expect("[")
            self._index()
            self.expect("]")
            if self.check("+=") or self.check("-=") or self.check("*="):
                raise UnsupportedConstruct("compound assignment", f"line {self.tok.line}")
            self.expect("=")
            expr = self.expr()
            self.expect(";")
            if name in self.stored:
                raise MultipleAssignment(f"output {name!r} assigned more than once (line {t.line})")
            self.stored.add(name)
            return Store(name, expr)
        if t.kind == "ident" and self.toks[self.i + 1].text in ("=", "+=", "-=", "*=", "++", "--"):
            raise MultipleAssignment(f"reassignment of {t.text!r} (line {t.line}); kernels are single-assignment")
        if t.text == "*":
            raise UnsupportedConstruct("pointer arithmetic", f"dereference at line {t.line}")
        raise self._error(f"unexpected token {t.text!r}")

    def _index(self):
        t = self.tok
        if t.kind == "ident" and t.text == self.index_var and self.toks[self.i + 1].text == "]":
            self.advance()
            return
        if t.kind == "ident" and self.index_var is None:
            raise self._error("array indexed before get_global_id(0) is bound")
        raise UnsupportedConstruct("pointer arithmetic", f"only param[{self.index_var}] accesses are supported (line {t.line})")

    def expr(self) -> Expr:
        node = self.term()
        while self.check("+") or self.check("-"):
            op = "add" if self.advance().text == "+" else "sub"
            node = BinOp(op, node, self.term())
        self._reject_operator()
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.check("*"):
            self.advance()
            node = BinOp("mul", node, self.unary())
        self._reject_operator()
        return node

    def _reject_operator(self):
        t = self.tok
        if t.kind != "op":
            return
        if t.text in ("/", "%"):
            raise UnsupportedConstruct("division", f"{t.text!r} at line {t.line}")
        if t.text in ("<", ">", "<=", ">=", "==", "!=", "&&", "||", "?", ":"):
            raise UnsupportedConstruct("control flow", f"{t.text!r} at line {t.line}")
        if t.text in ("&", "|", "^", "<<", ">>", "~"):
            raise UnsupportedConstruct("bitwise operation", f"{t.text!r} at line {t.line}")
        if t.text in ("++", "--"):
            raise MultipleAssignment(f"increment at line {t.line}; kernels are single-assignment")

    def unary(self) -> Expr:
        if self.check("-"):
            self.advance()
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        if self.check("+"):
            self.advance()
            return self.unary()
        if self.check("!") or self.check("~"):
            self._reject_operator()
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return Num(int(t.text, 0))
        if self.check("("):
            self.advance()
            if self.tok.text in _FLOAT_TYPES or self.tok.text == "int":
                raise UnsupportedConstruct("cast", f"line {self.tok.line}")
            e = self.expr()
            self.expect(")")
            return e
        if self.check("*") or self.check("&"):
            raise UnsupportedConstruct("pointer arithmetic", f"line {t.line}")
        if t.kind == "ident":
            name = self.ident()
            if self.check("("):
                raise UnsupportedConstruct("function call", f"{name}() at line {t.line}")
            if self.check("["):
                if name not in self.params:
                    raise self._error(f"{name!r} is not a kernel parameter", t)
                self.advance()
                self._index()
                self.expect("]")
                self.loaded.add(name)
                return Load(name)
            if name in self.locals:
                return Local(name)
            if name == self.index_var:
                raise UnsupportedConstruct("index used as data", f"{name!r} at line {t.line}")
            if name in self.params:
                raise UnsupportedConstruct("pointer arithmetic", f"bare pointer {name!r} at line {t.line}")
            raise self._error(f"undefined variable {name!r}", t)
        raise self._error(f"unexpected token {t.text or 'end of input'!r}")


def parse_kernel(source: str) -> KernelAST:
    """Parse kernel source text into a :class:`KernelAST`.

    Raises :class:`KernelSyntaxError` with a line/column for malformed input,
    :class:`UnsupportedConstruct` for anything outside the subset and
    :class:`MultipleAssignment` when a variable or output is written twice.
    """
    return _Parser(source).kernel()
