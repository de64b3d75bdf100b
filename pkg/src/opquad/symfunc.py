"""Finite sums of monomials with rational exponents over ``d`` variables.

These represent basis functions, inner functions and their products. With
the uniform weight on the unit box every such sum has an exact rational
integral, which is what makes exact Gram and operator matrices possible.
"""
from __future__ import annotations

import ast
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scalars import as_rational

Exponents = tuple  # tuple[Fraction, ...]


class DivergentMomentError(ArithmeticError):
    """A monomial with some exponent <= -1 has no finite integral."""


@dataclass(frozen=True)
class Monomial:
    coefficient: Fraction
    exponents: Exponents

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def __str__(self) -> str:
        return _format_term(self.coefficient, self.exponents)


@dataclass(frozen=True)
class SymFunc:
    """Collected monomial sum. ``terms`` is sorted by exponent vector and
    holds no zero coefficients and no repeated exponent vectors."""

    terms: tuple
    dim: int

    @classmethod
    def from_terms(cls, items: Iterable[tuple], dim: int) -> "SymFunc":
        acc: dict = {}
        for coef, exps in items:
            exps = tuple(as_rational(e) for e in exps)
            if len(exps) != dim:
                raise ValueError(f"exponent vector {exps} does not have dimension {dim}")
            acc[exps] = acc.get(exps, Fraction(0)) + as_rational(coef)
        terms = tuple(Monomial(c, e) for e, c in sorted(acc.items()) if c != 0)
        return cls(terms, dim)

    @classmethod
    def constant(cls, value, dim: int = 1) -> "SymFunc":
        return cls.from_terms([(value, (0,) * dim)], dim)

    @classmethod
    def variable(cls, index: int, dim: int = 1, power=1) -> "SymFunc":
        if not 0 <= index < dim:
            raise ValueError(f"variable index {index} out of range for dim {dim}")
        exps = [0] * dim
        exps[index] = power
        return cls.from_terms([(1, exps)], dim)

    def as_dict(self) -> dict:
        return {t.exponents: t.coefficient for t in self.terms}

    def _coerce(self, other) -> "SymFunc":
        if isinstance(other, SymFunc):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return SymFunc.constant(as_rational(other), self.dim)

    def __add__(self, other):
        other = self._coerce(other)
        return SymFunc.from_terms(
            [(t.coefficient, t.exponents) for t in itertools.chain(self.terms, other.terms)],
            self.dim,
        )

    __radd__ = __add__

    def __neg__(self):
        return SymFunc(tuple(Monomial(-t.coefficient, t.exponents) for t in self.terms), self.dim)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        return sf_mul(self, self._coerce(other))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers of a sum are supported")
        out = SymFunc.constant(1, self.dim)
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, *x):
        """Evaluate at a point (floats or numpy arrays, one per variable)."""
        if len(x) != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {len(x)}")
        total = 0.0
        for t in self.terms:
            val = float(t.coefficient)
            for xi, e in zip(x, t.exponents):
                if e != 0:
                    val = val * np.power(xi, float(e))
            total = total + val
        return total

    def bounds_on_unit_box(self) -> tuple[float, float]:
        """Infimum and supremum over [0, 1]^d.

        Exact when every coefficient is non-negative and every exponent is
        non-negative (the function is then non-decreasing in each variable).
        Otherwise a grid search polished by bounded L-BFGS-B is used.
        """
        if any(e < 0 for t in self.terms for e in t.exponents if t.coefficient != 0):
            raise ValueError(f"{self} is unbounded on the unit box")
        if all(t.coefficient > 0 for t in self.terms):
            lo = sum((t.coefficient for t in self.terms if all(e == 0 for e in t.exponents)),
                     Fraction(0))
            hi = sum((t.coefficient for t in self.terms), Fraction(0))
            return float(lo), float(hi)
        return _numeric_bounds(self)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = [_format_term(t.coefficient, t.exponents) for t in self.terms]
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out


VARIABLE_NAMES = ("x", "y", "z")


def _var_name(i: int, dim: int) -> str:
    return VARIABLE_NAMES[i] if dim <= len(VARIABLE_NAMES) else f"x{i + 1}"


def _format_term(coef: Fraction, exps: Sequence[Fraction]) -> str:
    dim = len(exps)
    factors = []
    for i, e in enumerate(exps):
        if e == 0:
            continue
        name = _var_name(i, dim)
        if e == 1:
            factors.append(name)
        elif e.denominator == 1 and e > 0:
            factors.append(f"{name}^{e}")
        else:
            factors.append(f"{name}^({e})")
    if not factors:
        return str(coef)
    body = "*".join(factors)
    if coef == 1:
        return body
    if coef == -1:
        return "-" + body
    c = str(coef)
    return f"({c})*{body}" if coef.denominator != 1 else f"{c}*{body}"


def _numeric_bounds(f: SymFunc, grid: int = 41) -> tuple[float, float]:
    from scipy.optimize import minimize

    axes = [np.linspace(0.0, 1.0, grid)] * f.dim
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = np.asarray(f(*mesh), dtype=float) * np.ones_like(mesh[0])
    flat_pts = np.stack([m.ravel() for m in mesh], axis=1)
    flat_vals = vals.ravel()
    out = []
    for sign in (1.0, -1.0):
        start = flat_pts[np.argmin(sign * flat_vals)]
        res = minimize(lambda p: sign * float(f(*p)), start,
                       method="L-BFGS-B", bounds=[(0.0, 1.0)] * f.dim)
        out.append(min(sign * float(f(*start)), float(res.fun)) * sign)
    return out[0], out[1]


def sf_mul(a: SymFunc, b: SymFunc) -> SymFunc:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    items = (
        (s.coefficient * t.coefficient, tuple(p + q for p, q in zip(s.exponents, t.exponents)))
        for s in a.terms
        for t in b.terms
    )
    return SymFunc.from_terms(items, a.dim)


class MomentOracle:
    """Maps an exponent vector to the exact integral of that monomial
    against a normalized weight. Subclass to support other weights."""

    dim: int

    def moment(self, exponents: Exponents) -> Fraction:
        raise NotImplementedError


@dataclass(frozen=True)
class UnitBoxMoments(MomentOracle):
    """Uniform weight w = 1 on [0, 1]^d."""

    dim: int = 1

    def moment(self, exponents: Exponents) -> Fraction:
        if len(exponents) != self.dim:
            raise ValueError(f"expected {self.dim} exponents, got {len(exponents)}")
        out = Fraction(1)
        for q in exponents:
            q = as_rational(q)
            if q <= -1:
                raise DivergentMomentError(f"moment of x^({q}) diverges on [0, 1]")
            out /= q + 1
        return out


def sf_integrate(f: SymFunc, moments: MomentOracle) -> Fraction:
    if f.dim != moments.dim:
        raise ValueError(f"dimension mismatch: function {f.dim}, weight {moments.dim}")
    return sum((t.coefficient * moments.moment(t.exponents) for t in f.terms), Fraction(0))


def sf_inner(a: SymFunc, b: SymFunc, moments: MomentOracle) -> Fraction:
    return sf_integrate(sf_mul(a, b), moments)


BASIS_KINDS = ("fractional_powers_13", "monomials", "sum_product_powers")


def basis_family(kind: str, n: int, dim: int = 1) -> list[SymFunc]:
    """First ``n`` functions of a named family; the constant 1 is always first.

    fractional_powers_13
        1, x^(1/3), x, x^(4/3), x^2, x^(7/3), ... (d = 1 only)
    monomials
        1, x, x^2, ... for d = 1; graded lexicographic monomials for d > 1
    sum_product_powers
        1, s, p, s^2, p^2, ... with s = x1 + ... + xd and p = x1 * ... * xd
    """
    if n < 1:
        raise ValueError(f"basis size must be >= 1, got {n}")
    if kind == "fractional_powers_13":
        if dim != 1:
            raise ValueError("fractional_powers_13 is defined for dim = 1")
        return [
            SymFunc.variable(0, 1, Fraction(i // 2) + (Fraction(1, 3) if i % 2 else 0))
            for i in range(n)
        ]
    if kind == "monomials":
        return [SymFunc.from_terms([(1, e)], dim) for e in _graded_exponents(dim, n)]
    if kind == "sum_product_powers":
        if dim < 2:
            raise ValueError("sum_product_powers needs dim >= 2 (s and p coincide for d = 1)")
        s = sum((SymFunc.variable(i, dim) for i in range(dim)), SymFunc.constant(0, dim))
        p = SymFunc.constant(1, dim)
        for i in range(dim):
            p = p * SymFunc.variable(i, dim)
        out = [SymFunc.constant(1, dim)]
        k = 1
        while len(out) < n:
            out.append(s ** k)
            if len(out) < n:
                out.append(p ** k)
            k += 1
        return out
    raise ValueError(f"unknown basis kind {kind!r}; expected one of {BASIS_KINDS}")


def _graded_exponents(dim: int, n: int) -> list[tuple]:
    out: list[tuple] = []
    degree = 0
    while len(out) < n:
        level = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) == degree]
        out.extend(sorted(level, reverse=True))
        degree += 1
    return out[:n]


class SymFuncSyntaxError(ValueError):
    pass


def parse_symfunc(src: str, dim: int = 1) -> SymFunc:
    """Parse strings such as ``"x*y"``, ``"x + y"`` or ``"x^(1/3)"``.

    Variables are x, y, z (or x1, x2, ... for any dim). Exponents must be
    rational constants; ``^`` and ``**`` both denote powers.
    """
    names = {_var_name(i, dim): i for i in range(dim)}
    names.update({f"x{i + 1}": i for i in range(dim)})
    if dim == 1:
        names["x1"] = 0
    try:
        tree = ast.parse(src.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise SymFuncSyntaxError(f"cannot parse {src!r}: {exc.msg}") from None

    def const(node) -> Fraction:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return as_rational(str(node.value)) if isinstance(node.value, float) \
                else Fraction(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = const(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
            l, r = const(node.left), const(node.right)
            if isinstance(node.op, ast.Div):
                if r == 0:
                    raise SymFuncSyntaxError(f"division by zero in {src!r}")
                return l / r
            return {ast.Add: l + r, ast.Sub: l - r, ast.Mult: l * r}[type(node.op)]
        raise SymFuncSyntaxError(f"expected a rational constant in {src!r}")

    def walk(node) -> SymFunc:
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise SymFuncSyntaxError(f"unknown variable {node.id!r} in {src!r}")
            return SymFunc.variable(names[node.id], dim)
        if isinstance(node, ast.Constant):
            return SymFunc.constant(const(node), dim)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base = walk(node.left)
                e = const(node.right)
                if len(base.terms) == 1 and base.terms[0].coefficient == 1:
                    exps = tuple(q * e for q in base.terms[0].exponents)
                    return SymFunc.from_terms([(1, exps)], dim)
                if e.denominator == 1 and e >= 0:
                    return base ** int(e)
                raise SymFuncSyntaxError(
                    f"non-integer power of a sum or scaled term is not representable: {src!r}")
            if isinstance(node.op, ast.Div):
                return walk(node.left) * (1 / _nonzero(const(node.right), src))
            l, r = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return l + r
            if isinstance(node.op, ast.Sub):
                return l - r
            if isinstance(node.op, ast.Mult):
                return l * r
        raise SymFuncSyntaxError(f"unsupported syntax in {src!r}")

    return walk(tree.body)


def _nonzero(v: Fraction, src: str) -> Fraction:
    if v == 0:
        raise SymFuncSyntaxError(f"division by zero in {src!r}")
    return v


def as_symfunc(obj, dim: int = 1) -> SymFunc:
    if isinstance(obj, SymFunc):
        return obj
    if isinstance(obj, str):
        return parse_symfunc(obj, dim)
    if isinstance(obj, Mapping):
        return SymFunc.from_terms([(c, e) for e, c in obj.items()], dim)
    return SymFunc.constant(obj, dim)


def basis_labels(kind: str, n: int, dim: int = 1) -> list[str]:
    """Human-readable names matching :func:`basis_family`, e.g. ``(x + y)^2``."""
    if kind != "sum_product_powers":
        return [str(b) for b in basis_family(kind, n, dim)]
    names = [_var_name(i, dim) for i in range(dim)]
    s, p = " + ".join(names), " ".join(names)
    out = ["1"]
    k = 1
    while len(out) < n:
        out.append(f"{s}" if k == 1 else f"({s})^{k}")
        if len(out) < n:
            out.append(f"{p}" if k == 1 else f"{' '.join(f'{v}^{k}' for v in names)}")
        k += 1
    return out
