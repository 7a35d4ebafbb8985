"""Scalar expression trees: parsing, rendering, exact differentiation, evaluation.

Nodes are hash-consed: building the same tree twice returns the same object,
so structural equality is identity and derivative caches key on the node
itself.  The raw node classes (``Sum``, ``Prod``, ...) never rewrite their
arguments; the lower-case helpers (``add``, ``mul``, ...) and the arithmetic
operators apply light simplification (constant folding, 0/1 identities).
"""

from __future__ import annotations

import math
import re
import threading
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Sum", "Prod", "Quot", "Pow", "Neg", "Fn",
    "FUNCTIONS", "ExprError", "ParseError", "UnboundVariableError", "DomainError",
    "const", "var", "add", "mul", "neg", "div", "power", "func", "sub",
    "parse", "render", "differentiate", "evaluate", "evaluate_many",
    "free_variables", "compile_exprs", "as_expr", "ZERO", "ONE",
]


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class DomainError(ExprError):
    def __init__(self, subexpr: "Expr", detail: str = "math domain error"):
        super().__init__(f"{detail} in {render(subexpr)}")
        self.subexpr = subexpr


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "sqrt": math.sqrt,
}

_intern: dict[tuple, "Expr"] = {}
_intern_lock = threading.Lock()


class Expr:
    """Base node.  Instances are immutable and interned."""

    __slots__ = ("args", "__weakref__")
    args: tuple

    def __new__(cls, *args):
        key = (cls, *args)
        node = _intern.get(key)
        if node is None:
            with _intern_lock:
                node = _intern.get(key)
                if node is None:
                    node = object.__new__(cls)
                    node.args = args
                    _intern[key] = node
        return node

    # identity semantics are structural semantics thanks to interning
    __hash__ = object.__hash__

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        inner = ", ".join(repr(a) for a in self.args)
        return f"{type(self).__name__}({inner})"

    def __str__(self):
        return render(self)

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)

    @property
    def children(self) -> tuple["Expr", ...]:
        return tuple(a for a in self.args if isinstance(a, Expr))


class Const(Expr):
    __slots__ = ()

    def __new__(cls, value):
        value = float(value)
        if not math.isfinite(value):
            raise ExprError(f"non-finite constant {value}")
        if value == 0.0:
            value = 0.0  # drop the sign of -0.0
        return super().__new__(cls, value)

    @property
    def value(self) -> float:
        return self.args[0]


class Var(Expr):
    __slots__ = ()

    def __new__(cls, name: str):
        return super().__new__(cls, str(name))

    @property
    def name(self) -> str:
        return self.args[0]


class Sum(Expr):
    __slots__ = ()

    def __new__(cls, *terms: Expr):
        if len(terms) < 2:
            raise ExprError("Sum needs at least two terms")
        return super().__new__(cls, *terms)


class Prod(Expr):
    __slots__ = ()

    def __new__(cls, *factors: Expr):
        if len(factors) < 2:
            raise ExprError("Prod needs at least two factors")
        return super().__new__(cls, *factors)


class Quot(Expr):
    __slots__ = ()

    def __new__(cls, num: Expr, den: Expr):
        return super().__new__(cls, num, den)


class Pow(Expr):
    __slots__ = ()

    def __new__(cls, base: Expr, exponent: Expr):
        return super().__new__(cls, base, exponent)


class Neg(Expr):
    __slots__ = ()

    def __new__(cls, operand: Expr):
        return super().__new__(cls, operand)


class Fn(Expr):
    __slots__ = ()

    def __new__(cls, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name!r}")
        return super().__new__(cls, name, arg)

    @property
    def name(self) -> str:
        return self.args[0]

    @property
    def arg(self) -> Expr:
        return self.args[1]


ZERO = Const(0)
ONE = Const(1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(value)


# -- simplifying constructors ------------------------------------------------

def const(value) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def add(*terms) -> Expr:
    flat: list[Expr] = []
    total = 0.0
    for t in terms:
        t = as_expr(t)
        parts = t.args if isinstance(t, Sum) else (t,)
        for p in parts:
            if isinstance(p, Const):
                total += p.value
            else:
                flat.append(p)
    if total != 0.0 or not flat:
        flat.append(Const(total))
    if len(flat) == 1:
        return flat[0]
    return Sum(*flat)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def neg(a) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.args[0]
    return Neg(a)


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    coeff = 1.0
    for f in factors:
        f = as_expr(f)
        if isinstance(f, Neg):
            coeff = -coeff
            f = f.args[0]
        parts = f.args if isinstance(f, Prod) else (f,)
        for p in parts:
            if isinstance(p, Const):
                coeff *= p.value
            else:
                flat.append(p)
    if coeff == 0.0:
        return ZERO
    if not flat:
        return Const(coeff)
    body = flat[0] if len(flat) == 1 else Prod(*flat)
    if coeff == 1.0:
        return body
    if coeff == -1.0:
        return Neg(body)
    return Prod(Const(coeff), *flat)


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(b, Const):
        if b.value == 0.0:
            raise ZeroDivisionError("division by constant zero")
        return mul(Const(1.0 / b.value), a) if b.value != 1.0 else a
    if a is ZERO:
        return ZERO
    if isinstance(a, Neg):
        return neg(div(a.args[0], b))
    return Quot(a, b)


def power(base, exponent) -> Expr:
    base, exponent = as_expr(base), as_expr(exponent)
    if isinstance(exponent, Const):
        if exponent.value == 0.0:
            return ONE
        if exponent.value == 1.0:
            return base
        if isinstance(base, Const):
            try:
                return Const(_pow(base.value, exponent.value))
            except (ValueError, OverflowError, ZeroDivisionError):
                pass
        if base is ZERO and exponent.value > 0:
            return ZERO
    if base is ONE:
        return ONE
    return Pow(base, exponent)


def func(name: str, arg) -> Expr:
    arg = as_expr(arg)
    if isinstance(arg, Const):
        try:
            return Const(FUNCTIONS[name](arg.value))
        except (ValueError, OverflowError):
            pass
    return Fn(name, arg)


def _pow(b: float, e: float) -> float:
    if e.is_integer():
        return float(b ** int(e))
    return math.pow(b, e)


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[^\W\d]\w*)"
    r"|(?P<op>[-+*/^(),]))"
)
_NAMED_CONSTANTS = {"pi": math.pi}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip() == "":
                    break
                bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise ParseError(f"unexpected character {text[bad]!r}", self._byte(bad))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def _byte(self, char_index: int) -> int:
        return len(self.text[:char_index].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def error(self, message: str):
        tok = self.peek()
        where = tok[2] if tok else len(self.text.rstrip())
        if tok is None:
            message = "unexpected end of input"
        raise ParseError(message, self._byte(where))

    def take(self, value: str | None = None):
        tok = self.peek()
        if tok is None or (value is not None and tok[1] != value):
            self.error(f"expected {value!r}" if value else "unexpected token")
        self.i += 1
        return tok

    def at(self, *values: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] in values

    def expression(self) -> Expr:
        terms = [self.term()]
        while self.at("+", "-"):
            op = self.take()[1]
            t = self.term()
            terms.append(Neg(t) if op == "-" else t)
        return terms[0] if len(terms) == 1 else Sum(*terms)

    def term(self) -> Expr:
        factors = [self.unary()]
        while self.at("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                factors.append(rhs)
            else:
                left = factors[0] if len(factors) == 1 else Prod(*factors)
                factors = [Quot(left, rhs)]
        return factors[0] if len(factors) == 1 else Prod(*factors)

    def unary(self) -> Expr:
        if self.at("-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of input")
        kind, text, offset = tok
        if kind == "num":
            self.take()
            return Const(float(text))
        if kind == "name":
            self.take()
            if self.at("("):
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", self._byte(offset))
                self.take("(")
                arg = self.expression()
                self.take(")")
                return Fn(text, arg)
            if text in _NAMED_CONSTANTS:
                return Const(_NAMED_CONSTANTS[text])
            return Var(text)
        if text == "(":
            self.take()
            inner = self.expression()
            self.take(")")
            return inner
        self.error(f"unexpected token {text!r}")


def parse(text: str) -> Expr:
    """Parse infix text (``+ - * / ^``, unary minus, calls, numbers, names)."""
    p = _Parser(text)
    if not p.tokens:
        raise ParseError("empty expression", 0)
    e = p.expression()
    if p.peek() is not None:
        p.error(f"unexpected token {p.peek()[1]!r}")
    return e


# -- rendering ---------------------------------------------------------------

def _prec(e: Expr) -> int:
    if isinstance(e, Sum):
        return 1
    if isinstance(e, (Prod, Quot)):
        return 2
    if isinstance(e, Neg) or (isinstance(e, Const) and e.value < 0):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def _fmt(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def render(e: Expr, min_prec: int = 0) -> str:
    """Infix text that parses back to the same tree (for parsed trees)."""
    if isinstance(e, Const):
        s = _fmt(e.value)
    elif isinstance(e, Var):
        s = e.name
    elif isinstance(e, Fn):
        s = f"{e.name}({render(e.arg)})"
    elif isinstance(e, Neg):
        s = "-" + render(e.args[0], 3)
    elif isinstance(e, Pow):
        s = render(e.args[0], 5) + "^" + render(e.args[1], 3)
    elif isinstance(e, Quot):
        s = render(e.args[0], 2) + "/" + render(e.args[1], 3)
    elif isinstance(e, Prod):
        first, *rest = e.args
        head = f"({render(first)})" if isinstance(first, Prod) else render(first, 2)
        s = "*".join([head] + [render(f, 3) for f in rest])
    elif isinstance(e, Sum):
        first, *rest = e.args
        parts = [render(first, 2)]
        for t in rest:
            if isinstance(t, Neg):
                parts.append(" - " + render(t.args[0], 2))
            else:
                parts.append(" + " + render(t, 2))
        s = "".join(parts)
    else:  # pragma: no cover
        raise ExprError(f"cannot render {e!r}")
    return f"({s})" if _prec(e) < min_prec else s


# -- differentiation ---------------------------------------------------------

@lru_cache(maxsize=None)
def differentiate(e: Expr, v: str) -> Expr:
    """Exact derivative of ``e`` with respect to variable ``v``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if v not in free_variables(e):
        return ZERO
    if isinstance(e, Sum):
        return add(*(differentiate(t, v) for t in e.args))
    if isinstance(e, Neg):
        return neg(differentiate(e.args[0], v))
    if isinstance(e, Prod):
        terms = []
        for i, f in enumerate(e.args):
            df = differentiate(f, v)
            if df is not ZERO:
                terms.append(mul(*e.args[:i], df, *e.args[i + 1:]))
        return add(*terms)
    if isinstance(e, Quot):
        a, b = e.args
        da, db = differentiate(a, v), differentiate(b, v)
        return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(e, Pow):
        b, x = e.args
        db, dx = differentiate(b, v), differentiate(x, v)
        if dx is ZERO:
            return mul(x, power(b, sub(x, ONE)), db)
        return mul(e, add(mul(dx, func("log", b)), div(mul(x, db), b)))
    if isinstance(e, Fn):
        a = e.arg
        da = differentiate(a, v)
        outer = {
            "sin": lambda: func("cos", a),
            "cos": lambda: neg(func("sin", a)),
            "tan": lambda: add(ONE, power(e, 2)),
            "exp": lambda: e,
            "log": lambda: div(ONE, a),
            "sinh": lambda: func("cosh", a),
            "cosh": lambda: func("sinh", a),
            "sqrt": lambda: div(Const(0.5), e),
        }[e.name]()
        return mul(outer, da)
    raise ExprError(f"cannot differentiate {e!r}")  # pragma: no cover


@lru_cache(maxsize=None)
def free_variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    out: frozenset[str] = frozenset()
    for c in e.children:
        out |= free_variables(c)
    return out


# -- evaluation --------------------------------------------------------------

def _apply(e: Expr, vals: list[float]) -> float:
    if isinstance(e, Sum):
        return math.fsum(vals) if len(vals) > 8 else sum(vals)
    if isinstance(e, Prod):
        out = 1.0
        for x in vals:
            out *= x
        return out
    if isinstance(e, Neg):
        return -vals[0]
    if isinstance(e, Quot):
        return vals[0] / vals[1]
    if isinstance(e, Pow):
        return _pow(vals[0], vals[1])
    if isinstance(e, Fn):
        return FUNCTIONS[e.name](vals[0])
    raise ExprError(f"cannot evaluate {e!r}")  # pragma: no cover


def evaluate_many(exprs: Iterable[Expr], binding: Mapping[str, float]) -> list[float]:
    """Evaluate several expressions sharing one memo of common subtrees."""
    memo: dict[Expr, float] = {}

    def ev(e: Expr) -> float:
        got = memo.get(e)
        if got is not None:
            return got
        if isinstance(e, Const):
            out = e.value
        elif isinstance(e, Var):
            try:
                out = float(binding[e.name])
            except KeyError:
                raise UnboundVariableError(e.name) from None
        else:
            vals = [ev(c) for c in e.children]
            try:
                out = _apply(e, vals)
            except ZeroDivisionError:
                raise DomainError(e, "division by zero") from None
            except (ValueError, OverflowError) as exc:
                raise DomainError(e, str(exc)) from None
            if not math.isfinite(out):
                raise DomainError(e, "non-finite result")
        memo[e] = out
        return out

    return [ev(e) for e in exprs]


def evaluate(e: Expr, binding: Mapping[str, float]) -> float:
    return evaluate_many([e], binding)[0]


def compile_exprs(exprs: Sequence[Expr], variables: Sequence[str]) -> Callable[[Sequence[float]], np.ndarray]:
    """Generate straight-line Python for ``exprs`` with shared subtrees computed once.

    The returned callable takes values ordered like ``variables`` and returns a
    float array shaped like ``exprs``.  Errors are re-raised as ``DomainError``
    located by the tree-walking evaluator.
    """
    exprs = list(exprs)
    index = {name: i for i, name in enumerate(variables)}
    names: dict[Expr, str] = {}
    lines = ["def _compiled(_v):"]
    for name, i in index.items():
        lines.append(f"    _x{i} = _v[{i}]")

    def emit(root: Expr) -> str:
        stack = [(root, False)]
        while stack:
            node, ready = stack.pop()
            if node in names:
                continue
            if isinstance(node, Const):
                names[node] = repr(node.value)
                continue
            if isinstance(node, Var):
                if node.name not in index:
                    raise UnboundVariableError(node.name)
                names[node] = f"_x{index[node.name]}"
                continue
            if not ready:
                stack.append((node, True))
                stack.extend((c, False) for c in node.children if c not in names)
                continue
            a = [names[c] for c in node.children]
            if isinstance(node, Sum):
                code = " + ".join(a)
            elif isinstance(node, Prod):
                code = " * ".join(a)
            elif isinstance(node, Neg):
                code = f"-{a[0]}"
            elif isinstance(node, Quot):
                code = f"{a[0]} / {a[1]}"
            elif isinstance(node, Pow):
                ex = node.args[1]
                if isinstance(ex, Const) and ex.value.is_integer() and abs(ex.value) < 64:
                    code = f"{a[0]} ** {int(ex.value)}"
                else:
                    code = f"_pow({a[0]}, {a[1]})"
            else:
                code = f"_{node.name}({a[0]})"
            tmp = f"_t{len(names)}"
            lines.append(f"    {tmp} = {code}")
            names[node] = tmp
        return names[root]

    outs = [emit(e) for e in exprs]
    lines.append("    return (" + ", ".join(outs) + ("," if len(outs) == 1 else "") + ")")
    env = {f"_{k}": f for k, f in FUNCTIONS.items()}
    env["_pow"] = math.pow
    exec(compile("\n".join(lines), "<tbgeo-compiled>", "exec"), env)
    raw = env["_compiled"]

    def run(values: Sequence[float]) -> np.ndarray:
        try:
            out = np.array(raw(values), dtype=float)
        except (ValueError, ZeroDivisionError, OverflowError, TypeError):
            # locate the offending subexpression
            evaluate_many(exprs, dict(zip(variables, map(float, values))))
            raise
        if not np.all(np.isfinite(out)):
            evaluate_many(exprs, dict(zip(variables, map(float, values))))
            raise DomainError(exprs[int(np.argmin(np.isfinite(out)))], "non-finite result")
        return out

    return run
