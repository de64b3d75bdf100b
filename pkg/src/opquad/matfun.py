"""Spectral matrix functions and symmetrized products."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import gmpy2
import numpy as np

from .eigsym import EigDecomp, symm_eig
from .opmatrix import OperatorMatrix, to_bigfloat_array, to_float_array
from .scalars import DEFAULT_PRECISION, working_precision


class MatfunDomainError(ValueError):
    def __init__(self, name: str, offending):
        self.offending = list(offending)
        super().__init__(f"{name} is undefined at eigenvalue(s) "
                         f"{[float(v) for v in self.offending]}")


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    lo_open: bool = True
    hi_open: bool = True

    def __contains__(self, x) -> bool:
        x = float(x) if not isinstance(x, gmpy2.mpfr) else x
        if x < self.lo or (self.lo_open and x == self.lo):
            return False
        if x > self.hi or (self.hi_open and x == self.hi):
            return False
        return True

    def __str__(self):
        return f"{'(' if self.lo_open else '['}{self.lo}, {self.hi}{')' if self.hi_open else ']'}"


REALS = Interval()


@dataclass(frozen=True)
class ScalarFunction:
    """A real function with a declared domain.

    ``fn`` works on floats/numpy arrays; ``big`` (optional) on mpfr values
    and is used by the high-precision path.
    """

    name: str
    fn: Callable
    domain: Interval = REALS
    big: Callable | None = None

    def __call__(self, x):
        return self.fn(x)

    def check(self, values) -> None:
        bad = [v for v in values if v not in self.domain]
        if bad:
            raise MatfunDomainError(self.name, bad)

    def evaluate_big(self, x):
        if self.big is None:
            return gmpy2.mpfr(float(self.fn(float(x))))
        return self.big(x)


def power(y: float) -> ScalarFunction:
    y = float(y)
    if y.is_integer():
        dom = REALS if y >= 0 else Interval(0.0, math.inf, True, True)
    else:
        dom = Interval(0.0, math.inf, y < 0, True)
    yi = int(y) if y.is_integer() else None

    def fn(x):
        return np.power(x, yi if yi is not None else y)

    def big(x):
        return x ** yi if yi is not None else x ** gmpy2.mpfr(y)

    return ScalarFunction(f"pow{_fmt_number(y)}", fn, dom, big)


def _fmt_number(y: float) -> str:
    return str(int(y)) if float(y).is_integer() else repr(float(y))


def _nonneg_sqrt(x):
    return np.sqrt(x)


BUILTINS: dict[str, ScalarFunction] = {
    "exp": ScalarFunction("exp", np.exp, REALS, gmpy2.exp),
    "log1p": ScalarFunction("log1p", np.log1p, Interval(-1.0, math.inf, True, True), gmpy2.log1p),
    "sqrt": ScalarFunction("sqrt", _nonneg_sqrt, Interval(0.0, math.inf, False, True), gmpy2.sqrt),
    "abs": ScalarFunction("abs", np.abs, REALS, abs),
    "identity": ScalarFunction("identity", lambda x: x, REALS, lambda x: x),
}

_POW_RE = re.compile(r"^pow(-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)$")


def scalar_function(name: str, extra: dict | None = None) -> ScalarFunction:
    """Look up a builtin (exp, log1p, sqrt, abs, identity, powNUM) or a
    user-registered function by name."""
    if extra and name in extra:
        return extra[name]
    if name in BUILTINS:
        return BUILTINS[name]
    m = _POW_RE.match(name)
    if m:
        return power(float(m.group(1)))
    raise KeyError(f"unknown scalar function {name!r}")


def is_function_name(name: str, extra: dict | None = None) -> bool:
    try:
        scalar_function(name, extra)
    except KeyError:
        return False
    return True


def _symmetrize(M: np.ndarray) -> np.ndarray:
    if M.dtype == object:
        return (M + M.T) * gmpy2.mpfr("0.5")
    return (M + M.T) * 0.5


def apply_matfun(f: ScalarFunction, A, high_precision: bool = False,
                 precision: int | None = None, decomp: EigDecomp | None = None) -> np.ndarray:
    """U diag(f(lambda)) U^T, symmetrized.

    The eigendecomposition always runs at working precision. By default f
    and the reconstruction are evaluated in binary64; with
    ``high_precision`` the whole result stays in mpfr.
    """
    if precision is None:
        precision = A.precision if isinstance(A, OperatorMatrix) else DEFAULT_PRECISION
    E = decomp if decomp is not None else symm_eig(A, precision)
    f.check(E.eigenvalues)
    if high_precision:
        with working_precision(E.precision):
            fl = np.array([gmpy2.mpfr(f.evaluate_big(v)) for v in E.eigenvalues], dtype=object)
            U = E.eigenvectors
            return _symmetrize((U * fl[np.newaxis, :]) @ U.T)
    lam = E.values_float()
    U = E.vectors_float()
    fl = np.asarray(f(lam), dtype=float)
    return _symmetrize((U * fl[np.newaxis, :]) @ U.T)


def corner(M):
    """The (0, 0) element: the integral approximation."""
    if isinstance(M, OperatorMatrix):
        M = M.entries
    M = np.asarray(M)
    if M.size == 0:
        raise ValueError("empty matrix")
    return M[0, 0]


def _as_dense(A, high_precision: bool, precision: int):
    if isinstance(A, OperatorMatrix):
        A = A.entries
    A = np.asarray(A)
    if high_precision:
        return to_bigfloat_array(A, precision) if A.dtype != object else A
    return to_float_array(A)


def _chain(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for F in factors[1:]:
        out = out @ F
    return out


def product(factors: Sequence, high_precision: bool = False,
            precision: int = DEFAULT_PRECISION) -> np.ndarray:
    """Plain left-to-right product (not symmetric in general)."""
    mats = _check_factors(factors, high_precision, precision)
    if high_precision:
        with working_precision(precision):
            return _chain(mats)
    return _chain(mats)


def symmetrized_product(factors: Sequence, high_precision: bool = False,
                        precision: int = DEFAULT_PRECISION) -> np.ndarray:
    """(F_1 ... F_m + F_m ... F_1) / 2, exactly symmetric as stored.

    Reversing ``factors`` gives a bit-identical result.
    """
    mats = _check_factors(factors, high_precision, precision)
    if len(mats) == 1:
        return mats[0].copy()

    def run():
        fwd = _chain(mats)
        rev = _chain(mats[::-1])
        half = gmpy2.mpfr("0.5") if high_precision else 0.5
        # fwd + rev is commutative, so reversed input yields the same bits
        return _symmetrize((fwd + rev) * half)

    if high_precision:
        with working_precision(precision):
            return run()
    return run()


def _check_factors(factors, high_precision, precision):
    if not factors:
        raise ValueError("empty factor list")
    mats = [_as_dense(F, high_precision, precision) for F in factors]
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise ValueError(f"factor size mismatch: {sorted(shapes)}")
    return mats


def apply_to_coefficients(f: ScalarFunction, A, v, high_precision: bool = False) -> np.ndarray:
    """f(A) v; element 0 approximates the integral of f(g) psi when v holds
    the coefficients of psi in the orthonormalized basis."""
    F = apply_matfun(f, A, high_precision=high_precision)
    v = np.asarray(v, dtype=object if high_precision else float)
    if v.shape != (F.shape[0],):
        raise ValueError(f"coefficient vector must have length {F.shape[0]}, got {v.shape}")
    if not high_precision:
        return F @ v
    prec = A.precision if isinstance(A, OperatorMatrix) else DEFAULT_PRECISION
    with working_precision(prec):
        return F @ to_bigfloat_array(v, prec)
