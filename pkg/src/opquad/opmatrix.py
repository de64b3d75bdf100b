"""Finite matrices of multiplication operators.

For a (generally non-orthonormal) basis b_0..b_n the exact Gram matrix
G[i, j] = <b_i, b_j> and the raw operator K[i, j] = <b_i, g b_j> are
computed in rationals. Rounding starts at the Cholesky factor R (R^T R = G),
and the operator matrix in the implicitly orthonormalized basis is
R^{-T} K R^{-1}, formed by triangular solves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np

from .scalars import DEFAULT_PRECISION, check_precision, working_precision
from .symfunc import MomentOracle, SymFunc, UnitBoxMoments, sf_integrate, sf_mul


class LinearlyDependentBasisError(ValueError):
    def __init__(self, index: int, pivot):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"Gram matrix is not positive definite at index {index} "
            f"(pivot {float(pivot):.3e}); basis function {index} depends on the earlier ones"
        )


@dataclass(frozen=True)
class OperatorMatrix:
    """Symmetric (n+1)x(n+1) matrix of mpfr entries, indexed from 0."""

    entries: np.ndarray
    inner: SymFunc | None = None
    basis: tuple = ()
    basis_label: str = ""
    precision: int = DEFAULT_PRECISION
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.size - 1

    def to_float(self) -> np.ndarray:
        return to_float_array(self.entries)

    def __array__(self, dtype=None, copy=None):
        out = self.to_float()
        return out if dtype is None else out.astype(dtype)

    def leading(self, size: int) -> "OperatorMatrix":
        """Leading principal block. Equals the operator matrix of the first
        ``size`` basis functions, since Cholesky factors nest."""
        return OperatorMatrix(self.entries[:size, :size].copy(), self.inner,
                              self.basis[:size], self.basis_label, self.precision)


def to_float_array(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype == object:
        return np.vectorize(float, otypes=[float])(a) if a.size else a.astype(float)
    return a.astype(float)


def to_bigfloat_array(a, precision: int) -> np.ndarray:
    """Entry-wise conversion; Fractions round correctly, floats are exact."""
    a = np.asarray(a, dtype=object) if not isinstance(a, np.ndarray) else a
    out = np.empty(a.shape, dtype=object)
    with working_precision(precision):
        for idx, v in np.ndenumerate(a):
            if isinstance(v, Fraction):
                out[idx] = gmpy2.mpfr(gmpy2.mpq(v.numerator, v.denominator))
            else:
                out[idx] = gmpy2.mpfr(v)
    return out


def _pair_products(basis: Sequence[SymFunc]) -> dict:
    dims = {b.dim for b in basis}
    if len(dims) != 1:
        raise ValueError(f"basis functions have inconsistent dimensions {sorted(dims)}")
    return {(i, j): sf_mul(basis[i], basis[j])
            for i in range(len(basis)) for j in range(i, len(basis))}


def _symmetric_from(values: dict, size: int) -> np.ndarray:
    out = np.empty((size, size), dtype=object)
    for (i, j), v in values.items():
        out[i, j] = out[j, i] = v
    return out


def gram(basis: Sequence[SymFunc], moments: MomentOracle | None = None) -> np.ndarray:
    """Exact Gram matrix as an object array of Fractions."""
    if not basis:
        raise ValueError("empty basis")
    moments = moments or UnitBoxMoments(basis[0].dim)
    prods = _pair_products(basis)
    return _symmetric_from({k: sf_integrate(p, moments) for k, p in prods.items()}, len(basis))


def raw_operator(basis: Sequence[SymFunc], g: SymFunc,
                 moments: MomentOracle | None = None) -> np.ndarray:
    """Exact matrix of <b_i, g b_j> in the original basis."""
    if not basis:
        raise ValueError("empty basis")
    moments = moments or UnitBoxMoments(basis[0].dim)
    prods = _pair_products(basis)
    return _symmetric_from({k: sf_integrate(sf_mul(g, p), moments) for k, p in prods.items()},
                           len(basis))


def cholesky(G, precision: int = DEFAULT_PRECISION) -> np.ndarray:
    """Upper-triangular R with positive diagonal and R^T R = G.

    G may hold Fractions (rounded once to ``precision`` bits) or numbers.
    """
    precision = check_precision(precision)
    A = to_bigfloat_array(np.asarray(G, dtype=object), precision)
    size = A.shape[0]
    if A.shape != (size, size):
        raise ValueError(f"Gram matrix must be square, got shape {A.shape}")
    zero = gmpy2.mpfr(0)
    R = np.full((size, size), zero, dtype=object)
    with working_precision(precision):
        for j in range(size):
            pivot = A[j, j] - gmpy2.fsum([R[k, j] * R[k, j] for k in range(j)]) if j else A[j, j]
            if not pivot > 0:
                raise LinearlyDependentBasisError(j, pivot)
            d = gmpy2.sqrt(pivot)
            R[j, j] = d
            for i in range(j + 1, size):
                s = A[j, i] - gmpy2.fsum([R[k, j] * R[k, i] for k in range(j)]) if j else A[j, i]
                R[j, i] = s / d
    return R


def solve_upper_transposed(R: np.ndarray, B: np.ndarray, precision: int) -> np.ndarray:
    """Solve R^T X = B (forward substitution, R upper triangular)."""
    size = R.shape[0]
    X = np.empty(B.shape, dtype=object)
    with working_precision(precision):
        for col in range(B.shape[1]):
            for i in range(size):
                acc = B[i, col]
                if i:
                    acc = acc - gmpy2.fsum([R[k, i] * X[k, col] for k in range(i)])
                X[i, col] = acc / R[i, i]
    return X


def orthonormalize_operator(R: np.ndarray, K, precision: int) -> np.ndarray:
    """R^{-T} K R^{-1} via two triangular solves, then symmetrized."""
    Kb = to_bigfloat_array(np.asarray(K, dtype=object), precision)
    X = solve_upper_transposed(R, Kb, precision)          # R^{-T} K
    M = solve_upper_transposed(R, X.T.copy(), precision).T  # (R^{-T} X^T)^T = X R^{-1}
    with working_precision(precision):
        half = gmpy2.mpfr("0.5")
        return (M + M.T) * half


def operator_matrix(basis: Sequence[SymFunc], g: SymFunc,
                    moments: MomentOracle | None = None,
                    precision: int = DEFAULT_PRECISION,
                    basis_label: str = "") -> OperatorMatrix:
    """Matrix of multiplication by ``g`` in the orthonormalized ``basis``."""
    precision = check_precision(precision)
    moments = moments or UnitBoxMoments(basis[0].dim)
    G = gram(basis, moments)
    K = raw_operator(basis, g, moments)
    R = cholesky(G, precision)
    M = orthonormalize_operator(R, K, precision)
    return OperatorMatrix(M, g, tuple(basis), basis_label, precision,
                          meta={"gram": G, "raw": K, "cholesky": R})


def coefficients(basis: Sequence[SymFunc], psi: SymFunc,
                 moments: MomentOracle | None = None,
                 precision: int = DEFAULT_PRECISION, R: np.ndarray | None = None) -> np.ndarray:
    """Coefficients <phi_i, psi> of ``psi`` in the orthonormalized basis.

    The exact projections <b_j, psi> are mapped through R^{-T}.
    """
    moments = moments or UnitBoxMoments(basis[0].dim)
    if R is None:
        R = cholesky(gram(basis, moments), precision)
    c = np.array([[sf_integrate(sf_mul(b, psi), moments)] for b in basis], dtype=object)
    return solve_upper_transposed(R, to_bigfloat_array(c, precision), precision)[:, 0]


def frobenius(a) -> gmpy2.mpfr:
    a = np.asarray(a, dtype=object)
    return gmpy2.sqrt(gmpy2.fsum([gmpy2.mpfr(v) * gmpy2.mpfr(v) for v in a.ravel()]))


def relative_residual(approx, exact, precision: int) -> gmpy2.mpfr:
    """||approx - exact||_F / ||exact||_F evaluated at ``precision`` bits."""
    with working_precision(precision):
        a = to_bigfloat_array(np.asarray(approx, dtype=object), precision)
        e = to_bigfloat_array(np.asarray(exact, dtype=object), precision)
        den = frobenius(e)
        num = frobenius(a - e)
        return num / den if den != 0 else num


def cholesky_residual(R: np.ndarray, G, precision: int) -> gmpy2.mpfr:
    """||R^T R - G||_F / ||G||_F with the product formed at ``precision``."""
    with working_precision(precision):
        return relative_residual(R.T @ R, G, precision)
