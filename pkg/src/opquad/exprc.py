"""Integrand expressions over inner functions, compiled to matrix plans.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')' | '-' factor

``g1`` .. ``g9`` name inner functions; other identifiers name unary scalar
functions (exp, log1p, sqrt, abs, identity, powNUM such as ``pow2.5``).
Each inner symbol becomes its operator matrix, each function application a
spectral matrix function, and the integral is the (0, 0) element of the
final matrix.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .matfun import (ScalarFunction, apply_matfun, corner, is_function_name, product,
                     scalar_function, symmetrized_product)
from .opmatrix import OperatorMatrix, to_bigfloat_array, to_float_array
from .scalars import DEFAULT_PRECISION, working_precision

INNER_RE = re.compile(r"^g[1-9]$")


class ExprSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int, src: str = ""):
        self.pos = pos
        super().__init__(f"{msg} at position {pos}" + (f" in {src!r}" if src else ""))


class ExprCompileError(ValueError):
    pass


# AST -----------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Inner:
    name: str


@dataclass(frozen=True)
class Add:
    terms: tuple


@dataclass(frozen=True)
class Mul:
    factors: tuple


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Apply:
    func: str
    arg: "Node"


Node = Union[Const, Inner, Add, Mul, Neg, Apply]


# Lexer / parser ------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>pow-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*()])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(src: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), pos))
        pos = m.end()
    out.append(Token("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, functions: Mapping | None):
        self.src = src
        self.tokens = tokenize(src)
        self.i = 0
        self.functions = functions

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", self.tok.pos, self.src)
        return self.advance()

    def parse(self) -> Node:
        if self.tok.kind == "end":
            raise ExprSyntaxError("empty expression", 0, self.src)
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos, self.src)
        return node

    def expr(self) -> Node:
        terms = [self.term()]
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            t = self.term()
            terms.append(t if op == "+" else Neg(t))
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def term(self) -> Node:
        factors = [self.factor()]
        while self.tok.text == "*":
            self.advance()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))

    def factor(self) -> Node:
        tok = self.tok
        if tok.text == "-":
            self.advance()
            return Neg(self.factor())
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if INNER_RE.match(tok.text):
                if self.tok.text == "(":
                    raise ExprSyntaxError(f"inner symbol {tok.text!r} cannot be applied",
                                          self.tok.pos, self.src)
                return Inner(tok.text)
            if not is_function_name(tok.text, self.functions):
                raise ExprSyntaxError(f"unknown identifier {tok.text!r}", tok.pos, self.src)
            if self.tok.text != "(":
                raise ExprSyntaxError(f"function {tok.text!r} takes exactly one argument",
                                      self.tok.pos, self.src)
            self.advance()
            if self.tok.text == ")":
                raise ExprSyntaxError(f"function {tok.text!r} takes exactly one argument",
                                      self.tok.pos, self.src)
            arg = self.expr()
            self.expect(")")
            return Apply(tok.text, arg)
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", tok.pos, self.src)


def parse(src: str, functions: Mapping | None = None) -> Node:
    """Parse ``src`` into an AST. ``functions`` adds user-defined names."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, src)
    return _Parser(src, functions).parse()


def unparse(node: Node) -> str:
    """Print an AST so that ``parse(unparse(ast)) == ast``."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Inner):
        return node.name
    if isinstance(node, Apply):
        return f"{node.func}({unparse(node.arg)})"
    if isinstance(node, Neg):
        inner = node.operand
        s = unparse(inner)
        return f"-({s})" if isinstance(inner, (Add, Mul)) else f"-{s}"
    if isinstance(node, Mul):
        return "*".join(f"({unparse(f)})" if isinstance(f, (Add, Mul)) else unparse(f)
                        for f in node.factors)
    if isinstance(node, Add):
        parts = []
        for k, t in enumerate(node.terms):
            if isinstance(t, Add):
                s = f"({unparse(t)})"
                parts.append(s if k == 0 else "+ " + s)
            elif k > 0 and isinstance(t, Neg):
                # "a - t" reparses as Add((a, Neg(t)))
                s = unparse(t.operand)
                parts.append("- " + (f"({s})" if isinstance(t.operand, Add) else s))
            else:
                parts.append(unparse(t) if k == 0 else "+ " + unparse(t))
        return " ".join(parts)
    raise TypeError(f"not an expression node: {node!r}")


def inner_symbols(node: Node) -> set[str]:
    if isinstance(node, Inner):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, (Neg,)):
        return inner_symbols(node.operand)
    if isinstance(node, Apply):
        return inner_symbols(node.arg)
    children = node.terms if isinstance(node, Add) else node.factors
    return set().union(*(inner_symbols(c) for c in children))


# Plans ---------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    """One primitive operation writing slot ``out``.

    op is one of: build, const, matfun, add, neg, product, corner.
    """

    op: str
    out: int
    args: tuple = ()
    param: object = None


@dataclass(frozen=True)
class EvalPlan:
    steps: tuple
    inner: Mapping[str, OperatorMatrix]
    symmetrize: bool = False
    output: str = "corner"
    high_precision: bool = False
    functions: Mapping | None = None

    def __str__(self) -> str:
        lines = []
        for s in self.steps:
            args = ", ".join(f"%{a}" for a in s.args)
            param = "" if s.param is None else f"[{s.param}]"
            lines.append(f"%{s.out} = {s.op}{param}({args})")
        return "\n".join(lines)


def compile(ast: Node, registry: Mapping[str, OperatorMatrix], symmetrize: bool = False,
            output: str = "corner", high_precision: bool = False,
            functions: Mapping | None = None) -> EvalPlan:
    """Lower an AST to a straight-line plan over the given inner matrices.

    Products are kept in source order; with ``symmetrize`` every product of
    two or more factors becomes (forward + reversed) / 2. A spectral
    function may only be applied to a symmetric argument, so with
    ``symmetrize=False`` applying one to a product of non-scalar factors is
    rejected.
    """
    if output not in ("corner", "matrix"):
        raise ValueError(f"output must be 'corner' or 'matrix', got {output!r}")
    missing = sorted(inner_symbols(ast) - set(registry))
    if missing:
        raise ExprCompileError(f"unresolved inner symbol(s): {', '.join(missing)}")
    sizes = {registry[k].size for k in inner_symbols(ast)}
    if len(sizes) > 1:
        raise ExprCompileError(f"inner matrices have different sizes {sorted(sizes)}")

    steps: list[Step] = []
    built: dict[str, int] = {}

    def emit(op, args=(), param=None) -> int:
        steps.append(Step(op, len(steps), tuple(args), param))
        return len(steps) - 1

    # returns (slot, symmetric, scalar)
    def lower(node: Node) -> tuple[int, bool, bool]:
        if isinstance(node, Const):
            return emit("const", param=float(node.value)), True, True
        if isinstance(node, Inner):
            if node.name not in built:
                built[node.name] = emit("build", param=node.name)
            return built[node.name], True, False
        if isinstance(node, Neg):
            slot, sym, sc = lower(node.operand)
            return emit("neg", [slot]), sym, sc
        if isinstance(node, Apply):
            slot, sym, sc = lower(node.arg)
            if not sym:
                raise ExprCompileError(
                    f"{node.func}() applied to a non-symmetric product {unparse(node.arg)!r}; "
                    "enable symmetrization")
            scalar_function(node.func, functions)
            return emit("matfun", [slot], node.func), True, sc
        if isinstance(node, Add):
            parts = [lower(t) for t in node.terms]
            return (emit("add", [p[0] for p in parts]),
                    all(p[1] for p in parts), all(p[2] for p in parts))
        if isinstance(node, Mul):
            parts = [lower(f) for f in node.factors]
            nonscalar = [p for p in parts if not p[2]]
            sym = all(p[1] for p in parts) and (symmetrize or len(nonscalar) <= 1)
            return (emit("product", [p[0] for p in parts], bool(symmetrize)),
                    sym, not nonscalar)
        raise TypeError(f"not an expression node: {node!r}")

    final, _, _ = lower(ast)
    if output == "corner":
        emit("corner", [final])
    return EvalPlan(tuple(steps), dict(registry), symmetrize, output, high_precision, functions)


def evaluate(plan: EvalPlan):
    """Run a plan; returns a float (corner) or a matrix."""
    if not plan.inner:
        raise ExprCompileError("plan has no inner matrices; the matrix size is unknown")
    size = next(iter(plan.inner.values())).size
    precision = max((m.precision for m in plan.inner.values()), default=DEFAULT_PRECISION)
    hp = plan.high_precision
    slots: list = [None] * len(plan.steps)

    def dense(x):
        if isinstance(x, OperatorMatrix):
            x = x.entries
        return (to_bigfloat_array(x, precision) if x.dtype != object else x) if hp \
            else to_float_array(x)

    for s in plan.steps:
        if s.op == "build":
            val = plan.inner[s.param]
        elif s.op == "const":
            val = np.eye(size, dtype=float) * s.param
            if hp:
                val = to_bigfloat_array(val, precision)
        elif s.op == "neg":
            val = -dense(slots[s.args[0]])
        elif s.op == "matfun":
            f: ScalarFunction = scalar_function(s.param, plan.functions)
            val = apply_matfun(f, slots[s.args[0]], high_precision=hp, precision=precision)
        elif s.op == "add":
            mats = [dense(slots[a]) for a in s.args]
            with working_precision(precision):
                val = mats[0]
                for m in mats[1:]:
                    val = val + m
        elif s.op == "product":
            factors = [slots[a] for a in s.args]
            fn = symmetrized_product if s.param else product
            val = fn(factors, high_precision=hp, precision=precision)
        elif s.op == "corner":
            v = corner(dense(slots[s.args[0]]))
            val = v if hp else float(v)
        else:
            raise ValueError(f"unknown plan step {s.op!r}")
        slots[s.out] = val
    result = slots[-1]
    if isinstance(result, OperatorMatrix):
        result = dense(result)
    return result


def integrate_expression(src: str, registry: Mapping[str, OperatorMatrix],
                         symmetrize: bool = False, high_precision: bool = False,
                         functions: Mapping | None = None):
    """parse + compile + evaluate, returning the corner value."""
    return evaluate(compile(parse(src, functions), registry, symmetrize,
                            high_precision=high_precision, functions=functions))
