"""Arithmetic expression language for edge dynamics and running costs.

Problem files describe each edge by two formulas in the variables ``x``
(arclength position on the edge) and ``a`` (control value).  This module
parses such formulas into immutable syntax trees, evaluates them, and
renders them back to a canonical fully parenthesized form.

Grammar (EBNF)::

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | 'x' | 'a' | 'pi' | func '(' expr (',' expr)? ')'
             | '(' expr ')'

``^`` binds tightest and is right-associative, unary minus binds tighter
than ``*`` and ``/``, which bind tighter than ``+`` and ``-``.  Numbers are
decimal with an optional exponent.  The known functions are ``sin``,
``cos``, ``exp``, ``abs`` (unary) and ``min``, ``max`` (binary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expression",
    "Lit",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "ExprSyntaxError",
    "EvalError",
    "parse",
    "evaluate",
    "evaluate_array",
    "format_expr",
    "format_number",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "min": 2, "max": 2}
VARIABLES = ("x", "a")
BINARY_OPS = ("+", "-", "*", "/", "^")


class ExprError(ValueError):
    """Base class for expression language errors."""


class ExprSyntaxError(ExprError):
    """Parse failure; carries the character offset into the source text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class EvalError(ExprError):
    """Evaluation failure (division by zero, domain error, non-finite result)."""


@dataclass(frozen=True)
class Expression:
    """Base node type; concrete nodes are Lit, Var, Neg, BinOp, Call."""


@dataclass(frozen=True)
class Lit(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    name: str  # "x" or "a"


@dataclass(frozen=True)
class Neg(Expression):
    operand: Expression


@dataclass(frozen=True)
class BinOp(Expression):
    op: str  # one of + - * / ^
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call(Expression):
    func: str
    args: tuple[Expression, ...]


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExprSyntaxError(f"malformed number {text!r}", i) from None
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        if c in "+-*/^(),":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent, one token of lookahead)
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text: str) -> _Token:
        tok = self.current
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(f"expected {text!r}", tok.offset)
        return self.advance()

    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Expression:
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expression:
        tok = self.current
        if tok.kind == "num":
            self.advance()
            return Lit(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text == "pi":
                return Lit(math.pi)
            if tok.text in FUNCTIONS:
                self.expect_op("(")
                args = [self.parse_expr()]
                while self.current.kind == "op" and self.current.text == ",":
                    self.advance()
                    args.append(self.parse_expr())
                self.expect_op(")")
                arity = FUNCTIONS[tok.text]
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{tok.text} expects {arity} argument(s), got {len(args)}",
                        tok.offset,
                    )
                return Call(tok.text, tuple(args))
            raise ExprSyntaxError(f"unknown identifier {tok.text!r}", tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(
            "expected a number, variable, function call or '('", tok.offset
        )


def parse(source: str) -> Expression:
    """Parse a formula in the variables x and a into an Expression tree."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    parser = _Parser(_tokenize(source))
    node = parser.parse_expr()
    tok = parser.current
    if tok.kind != "end":
        raise ExprSyntaxError(f"unexpected trailing input {tok.text!r}", tok.offset)
    return node


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_SCALAR_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "abs": abs}


def evaluate(expr: Expression, x: float, a: float) -> float:
    """Evaluate a tree at position ``x`` and control ``a``.

    Raises EvalError on division by zero, zero raised to a negative power,
    domain errors, and any non-finite intermediate or final result.
    """
    value = _eval(expr, x, a)
    if not math.isfinite(value):
        raise EvalError(f"non-finite result {value!r}")
    return value


def _eval(expr: Expression, x: float, a: float) -> float:
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Var):
        return x if expr.name == "x" else a
    if isinstance(expr, Neg):
        return -_eval(expr.operand, x, a)
    if isinstance(expr, BinOp):
        left = _eval(expr.left, x, a)
        right = _eval(expr.right, x, a)
        if expr.op == "+":
            result = left + right
        elif expr.op == "-":
            result = left - right
        elif expr.op == "*":
            result = left * right
        elif expr.op == "/":
            if right == 0.0:
                raise EvalError("division by zero")
            result = left / right
        else:  # "^"
            if left == 0.0 and right < 0.0:
                raise EvalError("zero raised to a negative power")
            try:
                result = math.pow(left, right)
            except (ValueError, OverflowError) as exc:
                raise EvalError(f"pow({left}, {right}): {exc}") from None
        if not math.isfinite(result):
            raise EvalError(f"non-finite result in {expr.op!r}")
        return result
    if isinstance(expr, Call):
        args = [_eval(arg, x, a) for arg in expr.args]
        if expr.func == "min":
            return min(args)
        if expr.func == "max":
            return max(args)
        try:
            result = _SCALAR_FUNCS[expr.func](args[0])
        except (ValueError, OverflowError) as exc:
            raise EvalError(f"{expr.func}({args[0]}): {exc}") from None
        return result
    raise TypeError(f"not an expression node: {expr!r}")


def evaluate_array(expr: Expression, x, a) -> np.ndarray:
    """Vectorized evaluation over numpy arrays (broadcasting x against a).

    Invalid operations produce non-finite entries instead of raising; callers
    decide whether non-finite values are errors or reportable violations.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval_array(expr, x, a)
    return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast_shapes(x.shape, a.shape)).copy()


_ARRAY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}


def _eval_array(expr: Expression, x, a):
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Var):
        return x if expr.name == "x" else a
    if isinstance(expr, Neg):
        return -_eval_array(expr.operand, x, a)
    if isinstance(expr, BinOp):
        left = _eval_array(expr.left, x, a)
        right = _eval_array(expr.right, x, a)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            return np.divide(left, right)
        return np.power(left, right)
    if isinstance(expr, Call):
        args = [_eval_array(arg, x, a) for arg in expr.args]
        if expr.func == "min":
            return np.minimum(args[0], args[1])
        if expr.func == "max":
            return np.maximum(args[0], args[1])
        return _ARRAY_FUNCS[expr.func](args[0])
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def format_number(value: float) -> str:
    """Canonical text for a numeric literal; reparses to the same float."""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def format_expr(expr: Expression) -> str:
    """Canonical fully parenthesized text; parse(format_expr(t)) == t."""
    if isinstance(expr, Lit):
        return format_number(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{format_expr(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(format_expr(arg) for arg in expr.args)})"
    raise TypeError(f"not an expression node: {expr!r}")
