"""Tiny expression language for user-supplied forcing functions.

Grammar (infix, no implicit multiplication):

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)?          # '^' is right-leaning but the
    exponent := ['-'] NUMBER | '(' exponent ')'  # exponent must be a literal
    atom     := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Recognized names:

    variables  tau, th1, th1d, th2, th2d
    constants  pi, w1 (slow mode frequency), w2 (fast mode frequency)
    functions  sin, cos, sqrt, exp, abs

``w1`` and ``w2`` are injected by the library so forcing text can hit the
pendulum mode frequencies exactly instead of going through truncated
decimals.  Exponents are restricted to numeric literals: integer exponents
evaluate for any base, real exponents only for positive bases.

Expressions are immutable after parsing; evaluation is pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import OMEGA1, OMEGA2

VARIABLES = ("tau", "th1", "th1d", "th2", "th2d")

CONSTANTS = {
    "pi": math.pi,
    "w1": OMEGA1,
    "w2": OMEGA2,
}

FUNCTIONS = ("sin", "cos", "sqrt", "exp", "abs")


class ExprSyntaxError(ValueError):
    """Malformed expression text.  ``offset`` is the byte offset of the fault."""

    def __init__(self, message, text, pos):
        self.offset = len(text[:pos].encode("utf-8"))
        super().__init__(f"{message} (byte offset {self.offset})")


class ExprDomainError(ArithmeticError):
    """Evaluation left the real domain (sqrt of a negative, division by zero, ...)."""


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Num | Var | Const | Neg | BinOp | Call


@dataclass(frozen=True)
class EvalEnv:
    """Point of evaluation: rescaled time plus the four pendulum coordinates."""

    tau: float
    th1: float
    th1d: float
    th2: float
    th2d: float

    def as_dict(self):
        return {
            "tau": self.tau,
            "th1": self.th1,
            "th1d": self.th1d,
            "th2": self.th2,
            "th2d": self.th2d,
        }


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_OPERATOR_CHARS = "+-*/^(),"


def _tokenize(text):
    """Yield (kind, value, position) triples; kind is 'num', 'name' or a symbol."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPERATOR_CHARS:
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lexeme = text[i:j]
            try:
                value = float(lexeme)
            except ValueError:
                raise ExprSyntaxError(f"bad number {lexeme!r}", text, i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", text, i)
    tokens.append(("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.advance()
        if tok[0] != kind:
            raise ExprSyntaxError(f"expected {what}", self.text, tok[2])
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(
                "unexpected trailing input (implicit multiplication is not allowed)",
                self.text,
                tok[2],
            )
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in "+-":
            op = self.advance()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in "*/":
            op = self.advance()[0]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.advance()
            return BinOp("^", base, self.exponent())
        return base

    def exponent(self):
        # The exponent of '^' must be a (possibly negated, possibly
        # parenthesized) numeric literal, so evaluation stays total.
        tok = self.peek()
        if tok[0] == "-":
            self.advance()
            inner = self.exponent()
            return Neg(inner)
        if tok[0] == "(":
            self.advance()
            inner = self.exponent()
            self.expect(")", "')'")
            return inner
        if tok[0] == "num":
            self.advance()
            return Num(tok[1])
        raise ExprSyntaxError("exponent of '^' must be a numeric literal", self.text, tok[2])

    def atom(self):
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            return Num(value)
        if kind == "(":
            node = self.expr()
            self.expect(")", "')'")
            return node
        if kind == "name":
            if value in FUNCTIONS:
                if self.peek()[0] != "(":
                    raise ExprSyntaxError(
                        f"function {value!r} needs a parenthesized argument", self.text, pos
                    )
                self.advance()
                args = [self.expr()]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")", "')'")
                if len(args) != 1:
                    raise ExprSyntaxError(
                        f"function {value!r} takes 1 argument, got {len(args)}", self.text, pos
                    )
                return Call(value, args[0])
            if value in VARIABLES:
                node = Var(value)
            elif value in CONSTANTS:
                node = Const(value)
            else:
                raise ExprSyntaxError(f"unknown identifier {value!r}", self.text, pos)
            if self.peek()[0] == "(":
                raise ExprSyntaxError(f"{value!r} is not a function", self.text, self.peek()[2])
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", self.text, pos)
        raise ExprSyntaxError(f"unexpected {value!r}", self.text, pos)


def parse(text):
    """Parse expression text into an immutable AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Scalar evaluation
# ---------------------------------------------------------------------------

def _pow(base, exponent):
    if float(exponent).is_integer():
        n = int(exponent)
        if base == 0.0 and n < 0:
            raise ExprDomainError("zero base with negative exponent")
        return base ** n
    if base < 0.0:
        raise ExprDomainError(f"negative base {base!r} with non-integer exponent")
    if base == 0.0 and exponent < 0.0:
        raise ExprDomainError("zero base with negative exponent")
    return math.pow(base, exponent)


def evaluate(expr, env):
    """Evaluate ``expr`` at ``env`` in IEEE double precision.

    Domain faults (sqrt of a negative, division by zero, overflow) raise
    ExprDomainError instead of propagating NaN.
    """
    values = env.as_dict() if isinstance(env, EvalEnv) else dict(env)
    for name in VARIABLES:
        if not math.isfinite(values[name]):
            raise ExprDomainError(f"non-finite value for {name!r}")
    return _eval_node(expr, values)


def _eval_node(node, values):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return values[node.name]
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval_node(node.operand, values)
    if isinstance(node, Call):
        x = _eval_node(node.arg, values)
        if node.func == "sin":
            return math.sin(x)
        if node.func == "cos":
            return math.cos(x)
        if node.func == "sqrt":
            if x < 0.0:
                raise ExprDomainError(f"sqrt of negative value {x!r}")
            return math.sqrt(x)
        if node.func == "exp":
            try:
                return math.exp(x)
            except OverflowError:
                raise ExprDomainError(f"exp overflow at {x!r}") from None
        if node.func == "abs":
            return abs(x)
        raise AssertionError(node.func)
    if isinstance(node, BinOp):
        a = _eval_node(node.lhs, values)
        b = _eval_node(node.rhs, values)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero")
            return a / b
        if node.op == "^":
            return _pow(a, b)
        raise AssertionError(node.op)
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Vectorized compilation
# ---------------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PRECEDENCE = 3


def _emit(node):
    """Emit Python/numpy source for a node; parenthesize defensively."""
    if isinstance(node, Num):
        return _format_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        return f"_const_{node.name}"
    if isinstance(node, Neg):
        return f"(-{_emit(node.operand)})"
    if isinstance(node, Call):
        return f"_fn_{node.func}({_emit(node.arg)})"
    if isinstance(node, BinOp):
        op = "**" if node.op == "^" else node.op
        return f"({_emit(node.lhs)} {op} {_emit(node.rhs)})"
    raise TypeError(f"not an expression node: {node!r}")


@lru_cache(maxsize=None)
def compile_expr(expr):
    """Compile an Expr into a numpy-vectorized callable.

    The callable takes (tau, th1, th1d, th2, th2d) and broadcasts like
    numpy.  Out-of-domain points come back as NaN/inf rather than raising;
    bulk consumers (quadrature, integrators) check finiteness and report.
    """
    body = _emit(expr)
    source = f"def _compiled(tau, th1, th1d, th2, th2d):\n    return +({body})"
    namespace = {
        "_fn_sin": np.sin,
        "_fn_cos": np.cos,
        "_fn_sqrt": np.sqrt,
        "_fn_exp": np.exp,
        "_fn_abs": np.abs,
    }
    for name, value in CONSTANTS.items():
        namespace[f"_const_{name}"] = value
    exec(compile(source, "<expr>", "exec"), namespace)  # noqa: S102 - source built from a closed AST
    fn = namespace["_compiled"]

    def wrapper(tau, th1, th1d, th2, th2d):
        # A constant expression returns a scalar even for array arguments;
        # callers needing a full grid broadcast the result themselves.
        with np.errstate(all="ignore"):
            return fn(tau, th1, th1d, th2, th2d)

    wrapper.source = source
    return wrapper


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def _format_number(value):
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _node_precedence(node):
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _NEG_PRECEDENCE
    return 9


def format_expr(node):
    """Render an Expr back to text; ``parse(format_expr(e))`` equals ``e``."""
    if isinstance(node, Num):
        return _format_number(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({format_expr(node.arg)})"
    if isinstance(node, Neg):
        inner = format_expr(node.operand)
        if _node_precedence(node.operand) < _NEG_PRECEDENCE:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        left = format_expr(node.lhs)
        right = format_expr(node.rhs)
        # Binary operators parse left-associatively, so an equal-precedence
        # right child needs parentheses to round-trip structurally.  '^'
        # keeps its literal exponent bare.
        if _node_precedence(node.lhs) < prec or (
            node.op == "^" and _node_precedence(node.lhs) <= prec
        ):
            left = f"({left})"
        if _node_precedence(node.rhs) <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")
