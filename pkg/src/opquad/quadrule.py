"""Quadrature rules read off an operator-matrix eigendecomposition.

Nodes are the eigenvalues, weights the squared first eigenvector
components. Everything here is binary64.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .eigsym import EigDecomp, symm_eig
from .matfun import ScalarFunction, scalar_function
from .opmatrix import operator_matrix
from .scalars import DEFAULT_PRECISION
from .symfunc import MomentOracle, SymFunc

CHECK_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    transform: str | None = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.nodes)

    def to_csv(self, path=None) -> str:
        """``index,node,weight`` rows, shortest round-trip floats, LF endings."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "node", "weight"])
        for i, (x, w) in enumerate(zip(self.nodes, self.weights)):
            writer.writerow([i, repr(float(x)), repr(float(w))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _resolve_transform(transform) -> tuple[Callable | None, str | None]:
    if transform is None:
        return None, None
    if isinstance(transform, str):
        return scalar_function(transform), transform
    if isinstance(transform, ScalarFunction):
        return transform, transform.name
    return transform, getattr(transform, "__name__", "custom")


def extract_rule(E: EigDecomp, transform=None, provenance: dict | None = None) -> QuadratureRule:
    fn, name = _resolve_transform(transform)
    lam = E.values_float()
    first = E.vectors_float()[0, :]
    weights = first * first
    nodes = np.asarray(fn(lam), dtype=float) if fn is not None else lam.copy()
    return QuadratureRule(nodes, weights, lam, name, dict(provenance or {}))


def build_rule(basis: Sequence[SymFunc], g: SymFunc, moments: MomentOracle | None = None,
               precision: int = DEFAULT_PRECISION, transform=None) -> QuadratureRule:
    M = operator_matrix(basis, g, moments, precision)
    return extract_rule(symm_eig(M), transform,
                        {"inner": str(g), "size": len(basis), "precision": precision})


def apply_rule(rule: QuadratureRule, f) -> float:
    """sum_i w_i f(x_i)."""
    if isinstance(f, ScalarFunction):
        f.check(rule.nodes)
    elif isinstance(f, str):
        f = scalar_function(f)
        f.check(rule.nodes)
    vals = np.asarray(f(rule.nodes), dtype=float)
    return float(np.dot(rule.weights, vals))


@dataclass(frozen=True)
class CheckReport:
    ok: bool
    worst: float
    detail: list

    def __bool__(self) -> bool:
        return self.ok


def check_range(rule: QuadratureRule, g_inf: float, g_sup: float,
                tol: float = CHECK_TOL) -> CheckReport:
    """Untransformed nodes within [g_inf - tol, g_sup + tol]."""
    if not (np.isfinite(g_inf) and np.isfinite(g_sup)):
        raise ValueError("range bounds must be finite")
    lam = rule.eigenvalues
    excess = np.maximum(g_inf - lam, lam - g_sup)
    bad = [(i, float(v)) for i, v in enumerate(lam) if excess[i] > tol]
    return CheckReport(not bad, float(excess.max()) if len(lam) else 0.0, bad)


def check_interlacing(rule_n: QuadratureRule, rule_n1: QuadratureRule,
                      tol: float = CHECK_TOL) -> CheckReport:
    """beta_i <= alpha_i <= beta_{i+1} for the sorted untransformed nodes
    alpha (size n+1) and beta (size n+2), non-strictly, within ``tol``."""
    alpha = np.sort(np.asarray(getattr(rule_n, "eigenvalues", rule_n), dtype=float))
    beta = np.sort(np.asarray(getattr(rule_n1, "eigenvalues", rule_n1), dtype=float))
    if len(beta) != len(alpha) + 1:
        raise ValueError(f"expected {len(alpha) + 1} nodes in the larger rule, got {len(beta)}")
    below = beta[:-1] - alpha     # beta_i - alpha_i must be <= 0
    above = alpha - beta[1:]      # alpha_i - beta_{i+1} must be <= 0
    gap = np.maximum(below, above)
    bad = [i for i in range(len(alpha)) if gap[i] > tol]
    return CheckReport(not bad, float(gap.max()), bad)
