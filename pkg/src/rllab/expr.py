"""Expression trees for scalar functions on R^n.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | factor
    factor := atom ('^' int)*
    atom   := number | 'x'<index> | '(' expr ')'
            | ('abs' | 'sin' | 'cos' | 'exp') '(' expr ')'
            | 'max' '(' expr (',' expr)* ')'
            | 'norm2sq' '(' ')'

Variables are 1-based (``x1`` is the first coordinate).  A unary minus
applied directly to a number literal is folded into the literal, so
``-0.25`` parses to ``Num(-0.25)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

FUNCS1 = ("abs", "sin", "cos", "exp")


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*'
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Norm2Sq:
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*^(),]))"
)


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos + stripped]!r}", pos + stripped)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {value!r}, found {what}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] == "*":
            self.take()
            node = BinOp("*", node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            arg = self.unary()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.factor()

    def factor(self):
        node = self.atom()
        while self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ParseError("exponent must be a non-negative integer", pos)
            node = Pow(node, int(val))
        return node

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        if kind == "name":
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                idx = int(m.group(1))
                if idx < 1:
                    raise ParseError(f"variable index must start at 1 in {val!r}", pos)
                return Var(idx - 1)
            if val in FUNCS1:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(val, (arg,))
            if val == "max":
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                return Call("max", tuple(args))
            if val == "norm2sq":
                self.take("(")
                self.take(")")
                return Norm2Sq()
            raise ParseError(f"unknown identifier {val!r}", pos)
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", pos)


def parse(text: str):
    return _Parser(text).parse()


def to_text(node) -> str:
    """Canonical printer; ``parse(to_text(t)) == t`` for every parsed tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"-({to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if not isinstance(node.base, (Var, Call, Norm2Sq)) or base.startswith("-"):
            base = f"({base})"
        return f"{base}^{node.exp}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, Norm2Sq):
        return "norm2sq()"
    raise TypeError(f"not an expression node: {node!r}")


def walk(node):
    yield node
    if isinstance(node, Neg):
        yield from walk(node.arg)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Pow):
        yield from walk(node.base)
    elif isinstance(node, Call):
        for a in node.args:
            yield from walk(a)


def max_var(node) -> int:
    """Number of variables referenced (highest 1-based index)."""
    return max((n.index + 1 for n in walk(node) if isinstance(n, Var)), default=0)


def is_smooth(node) -> bool:
    return not any(isinstance(n, Call) and n.name in ("abs", "max") for n in walk(node))


def is_polynomial(node) -> bool:
    return not any(isinstance(n, Call) for n in walk(node))


# -- evaluation ---------------------------------------------------------------

def compile_tree(node) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a tree into ``f(X)`` mapping an ``(N, d)`` array to ``(N,)`` values."""
    if isinstance(node, Num):
        c = float(node.value)
        return lambda X: np.full(X.shape[0], c)
    if isinstance(node, Var):
        i = node.index
        return lambda X: X[:, i]
    if isinstance(node, Neg):
        a = compile_tree(node.arg)
        return lambda X: -a(X)
    if isinstance(node, BinOp):
        a, b = compile_tree(node.left), compile_tree(node.right)
        if node.op == "+":
            return lambda X: a(X) + b(X)
        if node.op == "-":
            return lambda X: a(X) - b(X)
        return lambda X: a(X) * b(X)
    if isinstance(node, Pow):
        a, n = compile_tree(node.base), node.exp
        return lambda X: a(X) ** n
    if isinstance(node, Call):
        fs = [compile_tree(arg) for arg in node.args]
        if node.name == "max":
            return lambda X: np.max(np.stack([f(X) for f in fs]), axis=0)
        ufunc = {"abs": np.abs, "sin": np.sin, "cos": np.cos, "exp": np.exp}[node.name]
        f0 = fs[0]
        return lambda X: ufunc(f0(X))
    if isinstance(node, Norm2Sq):
        return lambda X: np.sum(X * X, axis=1)
    raise TypeError(f"not an expression node: {node!r}")


# -- one-sided directional derivatives ----------------------------------------

def directional(node, X: np.ndarray, D: np.ndarray, kink_tol: float = 1e-10):
    """Values and one-sided directional derivatives ``f'(x; d)`` row-wise.

    Forward mode with the nonsmooth rules for ``abs`` and ``max``: at a point
    where the argument of ``abs`` is within ``kink_tol`` of zero the rule
    ``|u|'(x; d) = |u'(x; d)|`` is used, and ``max`` takes the largest
    derivative among arguments within ``kink_tol`` of the maximum.
    """
    if isinstance(node, Num):
        return np.full(X.shape[0], float(node.value)), np.zeros(X.shape[0])
    if isinstance(node, Var):
        return X[:, node.index], D[:, node.index]
    if isinstance(node, Neg):
        v, d = directional(node.arg, X, D, kink_tol)
        return -v, -d
    if isinstance(node, BinOp):
        u, du = directional(node.left, X, D, kink_tol)
        v, dv = directional(node.right, X, D, kink_tol)
        if node.op == "+":
            return u + v, du + dv
        if node.op == "-":
            return u - v, du - dv
        return u * v, u * dv + v * du
    if isinstance(node, Pow):
        u, du = directional(node.base, X, D, kink_tol)
        n = node.exp
        if n == 0:
            return np.ones_like(u), np.zeros_like(u)
        return u**n, n * u ** (n - 1) * du
    if isinstance(node, Norm2Sq):
        return np.sum(X * X, axis=1), 2.0 * np.sum(X * D, axis=1)
    if isinstance(node, Call):
        if node.name == "max":
            vals, ders = zip(*(directional(a, X, D, kink_tol) for a in node.args))
            vals, ders = np.stack(vals), np.stack(ders)
            top = vals.max(axis=0)
            active = vals >= top - kink_tol * (1.0 + np.abs(top))
            return top, np.where(active, ders, -np.inf).max(axis=0)
        u, du = directional(node.args[0], X, D, kink_tol)
        if node.name == "abs":
            at_kink = np.abs(u) <= kink_tol
            return np.abs(u), np.where(at_kink, np.abs(du), np.sign(u) * du)
        if node.name == "sin":
            return np.sin(u), np.cos(u) * du
        if node.name == "cos":
            return np.cos(u), -np.sin(u) * du
        if node.name == "exp":
            e = np.exp(u)
            return e, e * du
    raise TypeError(f"not an expression node: {node!r}")


# -- builders -----------------------------------------------------------------

def add(a, b):
    return BinOp("+", a, b)


def sub(a, b):
    return BinOp("-", a, b)


def mul(a, b):
    return BinOp("*", a, b)


def total(nodes):
    nodes = list(nodes)
    out = nodes[0]
    for n in nodes[1:]:
        out = add(out, n)
    return out


def linear_form(coeffs) -> object:
    """``sum_i c_i x_i``."""
    return total(mul(Num(float(c)), Var(i)) for i, c in enumerate(coeffs))


def half_norm_sq(kind: str, weights, shift) -> object:
    """``0.5 * ||x - shift||^2`` for the given norm kind, as a tree."""
    shift = [float(s) for s in shift]
    diffs = [sub(Var(i), Num(s)) if s != 0.0 else Var(i) for i, s in enumerate(shift)]
    if kind == "p2":
        body = total(Pow(d, 2) for d in diffs)
    elif kind == "w2":
        body = total(mul(Num(float(w)), Pow(d, 2)) for w, d in zip(weights, diffs))
    elif kind == "p1":
        body = Pow(total(Call("abs", (d,)) for d in diffs), 2)
    elif kind == "pinf":
        body = Pow(Call("max", tuple(Call("abs", (d,)) for d in diffs)), 2)
    else:
        raise ValueError(f"unknown norm kind {kind!r}")
    return mul(Num(0.5), body)
