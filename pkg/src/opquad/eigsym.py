"""Cyclic Jacobi eigensolver for real symmetric matrices at any precision."""
from __future__ import annotations

from dataclasses import dataclass

import gmpy2
import numpy as np

from .opmatrix import OperatorMatrix, frobenius, to_bigfloat_array, to_float_array
from .scalars import DEFAULT_PRECISION, check_precision, working_precision

MAX_SWEEPS = 64


class EigenNonConvergenceError(RuntimeError):
    def __init__(self, sweeps: int, off_norm):
        self.sweeps = sweeps
        self.off_norm = off_norm
        super().__init__(f"Jacobi iteration did not converge after {sweeps} sweeps "
                         f"(off-diagonal Frobenius norm {float(off_norm):.3e})")


@dataclass(frozen=True)
class EigDecomp:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray   # object array of mpfr
    eigenvectors: np.ndarray  # object array, column i belongs to eigenvalue i
    precision: int
    sweeps: int = 0

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    def values_float(self) -> np.ndarray:
        return to_float_array(self.eigenvalues)

    def vectors_float(self) -> np.ndarray:
        return to_float_array(self.eigenvectors)

    def reconstruct(self) -> np.ndarray:
        with working_precision(self.precision):
            U = self.eigenvectors
            return (U * self.eigenvalues[np.newaxis, :]) @ U.T

    def orthogonality_residual(self):
        """||U^T U - I||_F at working precision."""
        with working_precision(self.precision):
            U = self.eigenvectors
            E = U.T @ U
            for i in range(self.size):
                E[i, i] = E[i, i] - 1
            return frobenius(E)


def _as_matrix(A, precision: int) -> np.ndarray:
    if isinstance(A, OperatorMatrix):
        A = A.entries
    A = np.asarray(A, dtype=object) if not isinstance(A, np.ndarray) or A.dtype != object \
        else A
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return to_bigfloat_array(A, precision)


def _off_norm(A: np.ndarray):
    size = A.shape[0]
    return gmpy2.sqrt(2 * gmpy2.fsum([A[p, q] * A[p, q]
                                      for p in range(size) for q in range(p + 1, size)]))


def symm_eig(A, precision: int | None = None, max_sweeps: int = MAX_SWEEPS) -> EigDecomp:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm drops to
    2^-(P-8) * ||A||_F. Output is deterministic for identical input: the
    eigenvalues are ascending and every eigenvector has its first
    component of magnitude above 2^-(P/2) non-negative.
    """
    if precision is None:
        precision = A.precision if isinstance(A, OperatorMatrix) else DEFAULT_PRECISION
    precision = check_precision(precision)
    A = _as_matrix(A, precision)
    size = A.shape[0]
    with working_precision(precision):
        for i in range(size):
            for j in range(i + 1, size):
                if A[i, j] != A[j, i]:
                    raise ValueError(f"matrix is not symmetric at ({i}, {j})")
        V = np.empty((size, size), dtype=object)
        for idx in np.ndindex(size, size):
            V[idx] = gmpy2.mpfr(1 if idx[0] == idx[1] else 0)
        tol = frobenius(A) * gmpy2.mpfr(2) ** (8 - precision)
        one = gmpy2.mpfr(1)
        sweeps = 0
        off = _off_norm(A)
        while off > tol:
            if sweeps >= max_sweeps:
                raise EigenNonConvergenceError(sweeps, off)
            sweeps += 1
            for p in range(size - 1):
                for q in range(p + 1, size):
                    apq = A[p, q]
                    if apq == 0:
                        continue
                    tau = (A[q, q] - A[p, p]) / (2 * apq)
                    t = one / (abs(tau) + gmpy2.sqrt(one + tau * tau))
                    if tau < 0:
                        t = -t
                    c = one / gmpy2.sqrt(one + t * t)
                    s = t * c
                    # columns then rows of A <- J^T A J
                    ap, aq = A[:, p].copy(), A[:, q].copy()
                    A[:, p] = c * ap - s * aq
                    A[:, q] = s * ap + c * aq
                    ap, aq = A[p, :].copy(), A[q, :].copy()
                    A[p, :] = c * ap - s * aq
                    A[q, :] = s * ap + c * aq
                    A[p, q] = A[q, p] = gmpy2.mpfr(0)
                    vp, vq = V[:, p].copy(), V[:, q].copy()
                    V[:, p] = c * vp - s * vq
                    V[:, q] = s * vp + c * vq
            off = _off_norm(A)

        lam = np.array([A[i, i] for i in range(size)], dtype=object)
        order = sorted(range(size), key=lambda i: (lam[i], i))
        lam = lam[order]
        V = V[:, order]
        cutoff = gmpy2.mpfr(2) ** (-(precision // 2))
        for k in range(size):
            col = V[:, k]
            for v in col:
                if abs(v) > cutoff:
                    if v < 0:
                        V[:, k] = -col
                    break
    return EigDecomp(lam, V, precision, sweeps)
