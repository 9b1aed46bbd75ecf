"""A small arithmetic expression language for coefficient and nonlinearity functions.

Grammar::

    expression := term (('+' | '-') term)*
    term       := factor (('*' | '/') factor)*
    factor     := ['-'] atom ['^' factor]
    atom       := number | identifier | identifier '(' args ')' | '(' expression ')'

``^`` is right-associative and binds tighter than unary minus, so ``-2^2`` is
``-(2^2)``. Variables are ``t`` and ``u1`` ... ``u8``; callers may allow extra
names (the radial transform uses ``r``).

Example:
    >>> ast = parse("min(t, 1-t)")
    >>> evaluate(ast, 0.75, [])
    0.25
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

MAX_COMPONENTS = 8
VARIABLES = ("t",) + tuple(f"u{k}" for k in range(1, MAX_COMPONENTS + 1))

# name -> (min args, max args); None means unbounded
FUNCTIONS: dict[str, tuple[int, int | None]] = {
    "abs": (1, 1),
    "min": (2, None),
    "max": (2, None),
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "pow": (2, 2),
    "sin": (1, 1),
    "cos": (1, 1),
}


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class ArityError(ExprError):
    def __init__(self, name: str, got: int, position: int):
        lo, hi = FUNCTIONS[name]
        want = str(lo) if lo == hi else f"at least {lo}"
        super().__init__(f"{name}() takes {want} argument(s), got {got} (position {position})")
        self.position = position


class EvaluationError(ExprError):
    """Raised for out-of-domain evaluation (log/sqrt of negatives, division by zero, overflow)."""


class MissingVariableError(EvaluationError):
    pass


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    value: float
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


Expr = Union[Const, Var, Neg, BinOp, Call]
ExprAst = Expr


def variables(ast: Expr) -> set[str]:
    """Names of all variables referenced by ``ast``."""
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Const):
        return set()
    if isinstance(ast, Neg):
        return variables(ast.operand)
    if isinstance(ast, BinOp):
        return variables(ast.left) | variables(ast.right)
    return set().union(*(variables(a) for a in ast.args))


def substitute(ast: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every occurrence of variable ``name`` with ``replacement``."""
    if isinstance(ast, Var):
        return replacement if ast.name == name else ast
    if isinstance(ast, Const):
        return ast
    if isinstance(ast, Neg):
        return Neg(substitute(ast.operand, name, replacement))
    if isinstance(ast, BinOp):
        return BinOp(ast.op, substitute(ast.left, name, replacement),
                     substitute(ast.right, name, replacement))
    return Call(ast.name, tuple(substitute(a, name, replacement) for a in ast.args))


# ------------------------------------------------------------------------ parser

_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: frozenset[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> tuple[str, str, int]:
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {value!r}, found {what}", tok[2])
        return tok

    def parse(self) -> Expr:
        node = self.expression()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", pos)
        return node

    def expression(self) -> Expr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            right = self.term()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            right = self.factor()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def factor(self) -> Expr:
        kind, value, pos = self.peek()
        negate = kind == "op" and value == "-"
        if negate:
            self.take()
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            exponent = self.factor()
            node = BinOp("^", node, exponent, (node.span[0], exponent.span[1]))
        if negate:
            node = Neg(node, (pos, node.span[1]))
        return node

    def atom(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "number":
            return Const(float(value), (pos, pos + len(value)))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                return self.call(value, pos)
            if value in FUNCTIONS:
                raise ExprSyntaxError(f"function {value!r} needs an argument list", pos + len(value))
            if value not in self.allowed:
                raise UnknownIdentifierError(value, pos)
            return Var(value, (pos, pos + len(value)))
        if kind == "op" and value == "(":
            node = self.expression()
            close = self.expect(")")
            return _respan(node, (pos, close[2] + 1))
        what = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {what}", pos)

    def call(self, name: str, pos: int) -> Expr:
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(name, pos)
        self.expect("(")
        args = []
        if self.peek()[:2] != ("op", ")"):
            args.append(self.expression())
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expression())
        close = self.expect(")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ArityError(name, len(args), pos)
        return Call(name, tuple(args), (pos, close[2] + 1))


def _respan(node: Expr, span: tuple[int, int]) -> Expr:
    return type(node)(*[getattr(node, f) for f in node.__dataclass_fields__ if f != "span"], span)


def parse(text: str, extra_variables: Iterable[str] = ()) -> Expr:
    """Parse ``text`` into an expression tree.

    Args:
        text: Source expression.
        extra_variables: Additional variable names accepted besides ``t`` and ``u1..u8``.

    Raises:
        ExprSyntaxError: Malformed input; carries the character position.
        UnknownIdentifierError: Name that is neither a variable nor a whitelisted function.
        ArityError: Function called with the wrong number of arguments.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, frozenset(VARIABLES) | frozenset(extra_variables)).parse()


# ------------------------------------------------------------------ pretty print

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    if isinstance(node, Const) and node.value < 0:
        return _PREC["neg"]
    return 5


def to_source(node: Expr) -> str:
    """Render ``node`` as text that parses back to a structurally equal tree."""
    if isinstance(node, Const):
        s = format_number(abs(node.value))
        return "-" + s if node.value < 0 else s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if _prec(node.operand) < _PREC["^"]:
            inner = f"({inner})"
        return "-" + inner
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p and not isinstance(node.right, Neg):
            right = f"({right})"
    return f"{left}{node.op}{right}"


# -------------------------------------------------------------------- evaluation


def _fail(message: str, node: Expr) -> EvaluationError:
    return EvaluationError(f"{message} (expression span {node.span[0]}:{node.span[1]})")


def _check(value, node: Expr):
    if np.ndim(value) == 0:
        if not math.isfinite(value):
            raise _fail("non-finite value", node)
    elif not np.isfinite(value).all():
        raise _fail("non-finite value", node)
    return value


def _eval(node: Expr, env: dict):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise MissingVariableError(f"variable {node.name!r} not supplied") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return _check(a + b, node)
        if node.op == "-":
            return _check(a - b, node)
        if node.op == "*":
            return _check(np.multiply(a, b), node)
        if node.op == "/":
            if np.any(np.asarray(b) == 0):
                raise _fail("division by zero", node)
            return _check(np.divide(a, b), node)
        return _power(a, b, node)
    args = [_eval(a, env) for a in node.args]
    name = node.name
    if name == "abs":
        return np.abs(args[0])
    if name == "min":
        return _reduce(np.minimum, args)
    if name == "max":
        return _reduce(np.maximum, args)
    if name == "exp":
        return _check(np.exp(args[0]), node)
    if name == "log":
        if np.any(np.asarray(args[0]) <= 0):
            raise _fail("log of nonpositive value", node)
        return np.log(args[0])
    if name == "sqrt":
        if np.any(np.asarray(args[0]) < 0):
            raise _fail("sqrt of negative value", node)
        return np.sqrt(args[0])
    if name == "pow":
        return _power(args[0], args[1], node)
    if name == "sin":
        return np.sin(args[0])
    return np.cos(args[0])


def _reduce(fn, args):
    out = args[0]
    for a in args[1:]:
        out = fn(out, a)
    return out


def _power(a, b, node: Expr):
    a_arr = np.asarray(a, dtype=float)
    if np.ndim(b) == 0:
        b = float(b)
        if b < 0 and (a_arr == 0).any():
            raise _fail("zero raised to a negative power", node)
        if b != round(b) and (a_arr < 0).any():
            raise _fail("negative base with non-integer exponent", node)
        return _check(np.power(a_arr, b), node)
    b_arr = np.asarray(b, dtype=float)
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise _fail("zero raised to a negative power", node)
    if np.any((a_arr < 0) & (b_arr != np.round(b_arr))):
        raise _fail("negative base with non-integer exponent", node)
    return _check(np.power(a_arr, b_arr), node)


def evaluate(ast: Expr, t, u: Sequence = ()):
    """Evaluate ``ast`` at ``t`` and state ``u = (u1, ..., un)``.

    Scalars in give a float out. Array inputs broadcast and return an ndarray,
    which is how the numerical modules call it.

    Raises:
        EvaluationError: log/sqrt outside their domain, division by zero, or
            any non-finite intermediate.
        MissingVariableError: ``ast`` references a variable that was not supplied.
    """
    if len(u) > MAX_COMPONENTS:
        raise ValueError(f"at most {MAX_COMPONENTS} components are supported")
    env = {"t": t}
    env.update({f"u{k + 1}": v for k, v in enumerate(u)})
    with np.errstate(all="ignore"):
        return _finish(_eval(ast, env), list(env.values()))


def evaluate_env(ast: Expr, env: dict):
    """Evaluate with an explicit name -> value mapping (used for non-standard variables)."""
    with np.errstate(all="ignore"):
        return _finish(_eval(ast, env), list(env.values()))


def _finish(value, leaves):
    shapes = [np.shape(x) for x in leaves]
    if all(s == () for s in shapes):
        return float(value)
    shape = np.broadcast_shapes(*shapes)
    return np.array(np.broadcast_to(np.asarray(value, dtype=float), shape))


def constant(value: float) -> Const:
    if not math.isfinite(value):
        raise ValueError("constants must be finite")
    return Const(float(value))


def scaled(ast: Expr, factor: float) -> Expr:
    """``factor * ast`` as a new tree (identity when factor == 1)."""
    if factor == 1:
        return ast
    return BinOp("*", constant(factor), ast)
