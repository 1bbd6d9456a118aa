"""One-variable scalar expressions: parser, printer, evaluator and symbolic derivative.

The grammar is deliberately small::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ['-'] atom ['^' integer]
    atom   := number | 'pi' | 'w' | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'atan'

Nodes are frozen dataclasses, so a parsed tree can be shared freely.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Expr",
    "Constant",
    "Variable",
    "Unary",
    "Binary",
    "ExprSyntaxError",
    "EvaluationError",
    "parse",
    "to_string",
    "evaluate",
    "differentiate",
    "simplify",
    "node_count",
    "compile_numpy",
    "is_constant",
]

UNARY_OPS = ("neg", "sin", "cos", "atan")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")
FUNCTIONS = ("sin", "cos", "atan")


@dataclass(frozen=True)
class Constant:
    value: float
    name: str | None = None


@dataclass(frozen=True)
class Variable:
    name: str = "w"


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")
        if self.op == "pow":
            exp = self.right
            if not (isinstance(exp, Constant) and float(exp.value).is_integer() and exp.value >= 0):
                raise ValueError("pow exponent must be a non-negative integer constant")


Expr = Union[Constant, Variable, Unary, Binary]

W = Variable()
ZERO = Constant(0.0)
ONE = Constant(1.0)


class ExprSyntaxError(ValueError):
    """Malformed expression text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text


class EvaluationError(ArithmeticError):
    """Numeric failure while evaluating; ``path`` locates the node from the root."""

    def __init__(self, message: str, node: Expr, path: tuple[int, ...]):
        super().__init__(f"{message} at node path {list(path)}: {to_string(node)}")
        self.node = node
        self.path = path


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def _error(self, message: str):
        kind, value, pos = self.tok
        what = "end of input" if kind == "eof" else repr(value)
        raise ExprSyntaxError(f"{message}, found {what}", pos, self.text)

    def _take_op(self, *ops: str) -> str | None:
        kind, value, _ = self.tok
        if kind == "op" and value in ops:
            self.i += 1
            return value
        return None

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok[0] != "eof":
            self._error("expected operator")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while (op := self._take_op("+", "-")) is not None:
            e = Binary("add" if op == "+" else "sub", e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while (op := self._take_op("*", "/")) is not None:
            e = Binary("mul" if op == "*" else "div", e, self.factor())
        return e

    def factor(self) -> Expr:
        negate = self._take_op("-") is not None
        e = self.atom()
        if self._take_op("^") is not None:
            kind, value, pos = self.tok
            if kind != "num":
                self._error("expected non-negative integer exponent")
            if not re.fullmatch(r"\d+", value):
                raise ExprSyntaxError(f"non-integer exponent {value!r}", pos, self.text)
            self.i += 1
            e = Binary("pow", e, Constant(float(int(value))))
        return Unary("neg", e) if negate else e

    def atom(self) -> Expr:
        kind, value, pos = self.tok
        if kind == "num":
            self.i += 1
            return Constant(float(value))
        if kind == "name":
            self.i += 1
            if value == "w":
                return W
            if value == "pi":
                return Constant(math.pi, "pi")
            if value in FUNCTIONS:
                if self._take_op("(") is None:
                    self._error(f"expected '(' after {value}")
                arg = self.expr()
                if self._take_op(")") is None:
                    self._error("expected ')'")
                return Unary(value, arg)
            raise ExprSyntaxError(f"unknown identifier {value!r}", pos, self.text)
        if self._take_op("(") is not None:
            e = self.expr()
            if self._take_op(")") is None:
                self._error("expected ')'")
            return e
        self._error("expected number, 'w', 'pi', function or '('")


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree (no simplification is applied)."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _num(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _atom_str(e: Expr) -> str:
    """Render ``e`` so that it parses back as a single atom."""
    if isinstance(e, Variable):
        return "w"
    if isinstance(e, Constant):
        if e.name == "pi":
            return "pi"
        if e.value >= 0:
            return _num(e.value)
        return f"(-{_num(-e.value)})"
    if isinstance(e, Unary) and e.op in FUNCTIONS:
        return f"{e.op}({to_string(e.child)})"
    return f"({to_string(e)})"


def _factor_str(e: Expr) -> str:
    if isinstance(e, Unary) and e.op == "neg":
        c = e.child
        if isinstance(c, Binary) and c.op == "pow":
            return "-" + _atom_str(c.left) + "^" + _num(c.right.value)
        return "-" + _atom_str(c)
    if isinstance(e, Binary) and e.op == "pow":
        return _atom_str(e.left) + "^" + _num(e.right.value)
    return _atom_str(e)


def to_string(e: Expr) -> str:
    """Canonical text form; ``parse(to_string(e)) == e`` for parsed trees."""
    if isinstance(e, Binary) and e.op in _PREC:
        p = _PREC[e.op]
        left = to_string(e.left) if _prec_of(e.left) >= p else f"({to_string(e.left)})"
        # right operand at equal precedence needs parentheses to keep the tree shape
        right = to_string(e.right) if _prec_of(e.right) > p else f"({to_string(e.right)})"
        return f"{left} {_SYMBOL[e.op]} {right}"
    return _factor_str(e)


def _prec_of(e: Expr) -> int:
    if isinstance(e, Binary) and e.op in _PREC:
        return _PREC[e.op]
    return 3


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: Expr, w: float) -> float:
    """Evaluate ``e`` at parameter value ``w``."""
    return _eval(e, float(w), ())


def _eval(e: Expr, w: float, path: tuple[int, ...]) -> float:
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        return w
    if isinstance(e, Unary):
        a = _eval(e.child, w, path + (0,))
        if e.op == "neg":
            return -a
        if e.op == "sin":
            return math.sin(a)
        if e.op == "cos":
            return math.cos(a)
        return math.atan(a)
    a = _eval(e.left, w, path + (0,))
    b = _eval(e.right, w, path + (1,))
    op = e.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0.0:
            raise EvaluationError("division by zero", e, path)
        return a / b
    try:
        return a ** int(b)
    except OverflowError as exc:
        raise EvaluationError("overflow in power", e, path) from exc


def compile_numpy(e: Expr) -> Callable[[np.ndarray], np.ndarray]:
    """Generate a vectorised numpy function of ``w`` for repeated evaluation."""
    if is_constant(e):
        value = _eval(e, 0.0, ())
        return lambda w: np.full(np.shape(w), value)
    return eval(f"lambda w: {_np_src(e)}", {"np": np, "__builtins__": {}})


def _np_src(e: Expr) -> str:
    if isinstance(e, Constant):
        return f"({e.value!r})"
    if isinstance(e, Variable):
        return "w"
    if isinstance(e, Unary):
        c = _np_src(e.child)
        if e.op == "neg":
            return f"(-{c})"
        fn = {"sin": "np.sin", "cos": "np.cos", "atan": "np.arctan"}[e.op]
        return f"{fn}({c})"
    a, b = _np_src(e.left), _np_src(e.right)
    if e.op == "pow":
        return f"({a}**{int(e.right.value)})"
    return f"({a}{ {'add': '+', 'sub': '-', 'mul': '*', 'div': '/'}[e.op] }{b})"


# ---------------------------------------------------------------------------
# simplification and differentiation


def is_constant(e: Expr) -> bool:
    if isinstance(e, Constant):
        return True
    if isinstance(e, Variable):
        return False
    if isinstance(e, Unary):
        return is_constant(e.child)
    return is_constant(e.left) and is_constant(e.right)


def node_count(e: Expr) -> int:
    if isinstance(e, (Constant, Variable)):
        return 1
    if isinstance(e, Unary):
        return 1 + node_count(e.child)
    return 1 + node_count(e.left) + node_count(e.right)


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Constant) and e.value == value


def _mk_unary(op: str, a: Expr) -> Expr:
    if isinstance(a, Constant):
        return Constant(_eval(Unary(op, a), 0.0, ()))
    if op == "neg" and isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary(op, a)


def _mk_binary(op: str, a: Expr, b: Expr) -> Expr:
    """Build a node with constant folding and identity elimination."""
    if (
        isinstance(a, Constant)
        and isinstance(b, Constant)
        and not (op == "div" and b.value == 0.0)
    ):
        return Constant(_eval(Binary(op, a, b), 0.0, ()))
    if op == "add":
        if _is(a, 0.0):
            return b
        if _is(b, 0.0):
            return a
        if isinstance(b, Unary) and b.op == "neg":
            return _mk_binary("sub", a, b.child)
    elif op == "sub":
        if _is(b, 0.0):
            return a
        if _is(a, 0.0):
            return _mk_unary("neg", b)
        if isinstance(b, Unary) and b.op == "neg":
            return _mk_binary("add", a, b.child)
    elif op == "mul":
        if _is(a, 0.0) or _is(b, 0.0):
            return ZERO
        if _is(a, 1.0):
            return b
        if _is(b, 1.0):
            return a
        if _is(a, -1.0):
            return _mk_unary("neg", b)
        if _is(b, -1.0):
            return _mk_unary("neg", a)
        # pull constants to the left and merge them: c1*(c2*x) -> (c1*c2)*x
        if isinstance(b, Constant) and not isinstance(a, Constant):
            a, b = b, a
        if (
            isinstance(a, Constant)
            and isinstance(b, Binary)
            and b.op == "mul"
            and isinstance(b.left, Constant)
        ):
            return _mk_binary("mul", Constant(a.value * b.left.value), b.right)
    elif op == "div":
        if _is(a, 0.0) and not _is(b, 0.0):
            return ZERO
        if _is(b, 1.0):
            return a
    elif op == "pow":
        n = int(b.value)
        if n == 0:
            return ONE
        if n == 1:
            return a
    return Binary(op, a, b)


def simplify(e: Expr) -> Expr:
    """Constant folding and trivial identities; semantics are preserved."""
    if isinstance(e, (Constant, Variable)):
        return e
    if isinstance(e, Unary):
        return _mk_unary(e.op, simplify(e.child))
    return _mk_binary(e.op, simplify(e.left), simplify(e.right))


def differentiate(e: Expr) -> Expr:
    """Exact derivative with respect to ``w``, lightly simplified."""
    return _d(simplify(e))


def _d(e: Expr) -> Expr:
    if isinstance(e, Constant):
        return ZERO
    if isinstance(e, Variable):
        return ONE
    if isinstance(e, Unary):
        u = e.child
        du = _d(u)
        if e.op == "neg":
            return _mk_unary("neg", du)
        if e.op == "sin":
            return _mk_binary("mul", du, _mk_unary("cos", u))
        if e.op == "cos":
            return _mk_unary("neg", _mk_binary("mul", du, _mk_unary("sin", u)))
        # atan(u)' = u' / (1 + u^2)
        return _mk_binary("div", du, _mk_binary("add", ONE, _mk_binary("pow", u, Constant(2.0))))
    a, b = e.left, e.right
    op = e.op
    if op == "pow":
        n = int(b.value)
        if n == 0:
            return ZERO
        return _mk_binary(
            "mul", Constant(float(n)), _mk_binary("mul", _mk_binary("pow", a, Constant(float(n - 1))), _d(a))
        )
    da, db = _d(a), _d(b)
    if op == "add":
        return _mk_binary("add", da, db)
    if op == "sub":
        return _mk_binary("sub", da, db)
    if op == "mul":
        return _mk_binary("add", _mk_binary("mul", da, b), _mk_binary("mul", a, db))
    # quotient rule written as a'/b - a*b'/b^2, which avoids squaring the numerator
    if _is(db, 0.0):
        return _mk_binary("div", da, b)
    return _mk_binary(
        "sub",
        _mk_binary("div", da, b),
        _mk_binary("div", _mk_binary("mul", a, db), _mk_binary("pow", b, Constant(2.0))),
    )
