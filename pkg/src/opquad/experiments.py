"""Run configurations and the experiment pipelines behind the CLI."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import exprc
from .eigsym import symm_eig
from .matfun import scalar_function
from .opmatrix import OperatorMatrix, cholesky_residual, operator_matrix, relative_residual
from .quadrule import QuadratureRule, apply_rule, check_interlacing, check_range, extract_rule
from .scalars import DEFAULT_PRECISION, check_precision
from .symfunc import BASIS_KINDS, SymFunc, UnitBoxMoments, basis_family, basis_labels, \
    parse_symfunc

CONFIG_KEYS = ("basis_kind", "basis_size", "dim", "inner_functions", "expression",
               "precision_bits", "node_transform", "output")

# Tabulated n=18 approximation plus its listed error; checked against integration_oracle().
CONVERGENCE_REFERENCE = 0.9426091069801061
REFERENCE_AGREEMENT = 5e-12

WEIGHT_SUM_TOL = 1e-13


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    basis_kind: str
    basis_size: int
    dim: int = 1
    inner_functions: Mapping[str, str] = field(default_factory=dict)
    expression: str | None = None
    precision_bits: int = DEFAULT_PRECISION
    node_transform: Mapping[str, str] = field(default_factory=dict)
    output: str | None = None

    @classmethod
    def from_dict(cls, raw: Mapping) -> "RunConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        for key in ("basis_kind", "basis_size", "inner_functions"):
            if key not in raw:
                raise ConfigError(f"missing required config key {key!r}")

        inner = raw["inner_functions"]
        if isinstance(inner, list):
            inner = {f"g{i + 1}": src for i, src in enumerate(inner)}
        if not isinstance(inner, Mapping) or not inner:
            raise ConfigError("inner_functions must be a non-empty object or list")

        transform = raw.get("node_transform") or {}
        if isinstance(transform, str):
            transform = {name: transform for name in inner}
        if not isinstance(transform, Mapping):
            raise ConfigError("node_transform must be a function name or an object")

        cfg = cls(
            basis_kind=raw["basis_kind"],
            basis_size=raw["basis_size"],
            dim=raw.get("dim", 1),
            inner_functions=dict(inner),
            expression=raw.get("expression"),
            precision_bits=raw.get("precision_bits", DEFAULT_PRECISION),
            node_transform=dict(transform),
            output=raw.get("output"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    def validate(self) -> None:
        if self.basis_kind not in BASIS_KINDS:
            raise ConfigError(f"basis_kind must be one of {BASIS_KINDS}, got {self.basis_kind!r}")
        for key in ("basis_size", "dim", "precision_bits"):
            v = getattr(self, key)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{key} must be a positive integer, got {v!r}")
        try:
            check_precision(self.precision_bits)
            basis_family(self.basis_kind, 1, self.dim)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name, src in self.inner_functions.items():
            if not exprc.INNER_RE.match(name):
                raise ConfigError(f"inner function names must be g1..g9, got {name!r}")
            if not isinstance(src, str):
                raise ConfigError(f"inner function {name} must be a string")
            try:
                parse_symfunc(src, self.dim)
            except ValueError as exc:
                raise ConfigError(f"inner function {name}: {exc}") from None
        for name, fn in self.node_transform.items():
            if name not in self.inner_functions:
                raise ConfigError(f"node_transform names unknown inner function {name!r}")
            try:
                scalar_function(fn)
            except KeyError as exc:
                raise ConfigError(f"node_transform for {name}: {exc.args[0]}") from None
        if self.expression is not None:
            try:
                ast = exprc.parse(self.expression)
            except ValueError as exc:
                raise ConfigError(f"expression: {exc}") from None
            missing = exprc.inner_symbols(ast) - set(self.inner_functions)
            if missing:
                raise ConfigError(f"expression uses undeclared inner function(s) {sorted(missing)}")

    def replace(self, **changes) -> "RunConfig":
        data = {k: getattr(self, k) for k in CONFIG_KEYS}
        data.update({k: v for k, v in changes.items() if v is not None})
        cfg = RunConfig(**data)
        cfg.validate()
        return cfg

    def inner(self, name: str) -> SymFunc:
        return parse_symfunc(self.inner_functions[name], self.dim)

    def basis(self, size: int | None = None):
        return basis_family(self.basis_kind, size or self.basis_size, self.dim)


EXPERIMENT_FRACTIONAL = {
    "basis_kind": "fractional_powers_13",
    "basis_size": 5,
    "dim": 1,
    "inner_functions": {"g1": "x", "g2": "x^(1/3)"},
    "node_transform": {"g2": "pow3"},
    "precision_bits": DEFAULT_PRECISION,
}

EXPERIMENT_PRODUCT = {
    "basis_kind": "sum_product_powers",
    "basis_size": 19,
    "dim": 2,
    "inner_functions": {"g1": "x*y", "g2": "x + y"},
    "expression": "exp(g1)*log1p(g2)",
    "precision_bits": DEFAULT_PRECISION,
}


def full_operator(cfg: RunConfig, name: str, size: int | None = None) -> OperatorMatrix:
    size = size or cfg.basis_size
    return operator_matrix(cfg.basis(size), cfg.inner(name), UnitBoxMoments(cfg.dim),
                           cfg.precision_bits, cfg.basis_kind)


def rule_for(cfg: RunConfig, name: str, size: int | None = None,
             matrix: OperatorMatrix | None = None) -> QuadratureRule:
    M = matrix if matrix is not None else full_operator(cfg, name, size)
    return extract_rule(symm_eig(M), cfg.node_transform.get(name),
                        {"inner": cfg.inner_functions[name], "basis": cfg.basis_kind,
                         "size": M.size, "precision": cfg.precision_bits})


# sweep ---------------------------------------------------------------------

def relative_power_error(rule: QuadratureRule, y: float) -> float:
    """sum w_k x_k^y / int_0^1 x^y dx - 1."""
    return apply_rule(rule, lambda x: np.power(x, y)) * (y + 1.0) - 1.0


def sweep(cfg: RunConfig, ys) -> tuple[list[str], list[list[float]]]:
    names = list(cfg.inner_functions)
    rules = {name: rule_for(cfg, name) for name in names}
    header = ["y"] + [f"eps_{name}" for name in names]
    rows = [[float(y)] + [relative_power_error(rules[name], float(y)) for name in names]
            for y in ys]
    return header, rows


# table1 --------------------------------------------------------------------

def pointwise(ast: exprc.Node, inner: Mapping[str, SymFunc]):
    """The integrand f(g(x)) evaluated directly at points (no matrices)."""
    def ev(node, x):
        if isinstance(node, exprc.Const):
            return node.value
        if isinstance(node, exprc.Inner):
            return inner[node.name](*x)
        if isinstance(node, exprc.Neg):
            return -ev(node.operand, x)
        if isinstance(node, exprc.Apply):
            return scalar_function(node.func)(ev(node.arg, x))
        if isinstance(node, exprc.Add):
            return sum(ev(t, x) for t in node.terms)
        out = 1.0
        for f in node.factors:
            out = out * ev(f, x)
        return out
    return lambda *x: float(ev(ast, x))


def integration_oracle(cfg: RunConfig, expression: str | None = None) -> tuple[float, float]:
    """Adaptive quadrature of the integrand over [0, 1]^d (scipy nquad).

    Independent of the matrix machinery; returns (value, error estimate).
    """
    from scipy.integrate import nquad

    src = expression or cfg.expression
    if src is None:
        raise ConfigError("no expression to integrate")
    f = pointwise(exprc.parse(src), {k: cfg.inner(k) for k in cfg.inner_functions})
    opts = {"epsabs": 1e-14, "epsrel": 1e-14, "limit": 200}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err = nquad(f, [(0.0, 1.0)] * cfg.dim, opts=[opts] * cfg.dim)
    return float(val), float(err)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    phi: str
    approximation: float
    error: float


def operator_family(cfg: RunConfig, size: int) -> dict[str, OperatorMatrix]:
    return {name: full_operator(cfg, name, size) for name in cfg.inner_functions}


def convergence_table(cfg: RunConfig, n_max: int, expression: str | None = None,
                      symmetrize: bool = False, reference: float | None = None) -> list[ConvergenceRow]:
    """Corner of the compiled expression for n = 0..n_max.

    The operator matrices are assembled once at size n_max + 1; the
    size-(n+1) matrix is its leading block because Cholesky factors nest.
    """
    src = expression or cfg.expression
    if src is None:
        raise ConfigError("no expression given")
    ast = exprc.parse(src)
    big = operator_family(cfg, n_max + 1)
    labels = basis_labels(cfg.basis_kind, n_max + 1, cfg.dim)
    if reference is None:
        reference = integration_oracle(cfg, src)[0]
    rows = []
    for n in range(n_max + 1):
        reg = {k: m.leading(n + 1) for k, m in big.items()}
        val = float(exprc.evaluate(exprc.compile(ast, reg, symmetrize)))
        rows.append(ConvergenceRow(n, labels[n], val, reference - val))
    return rows


def verified_reference(cfg: RunConfig | None = None) -> dict:
    """Oracle value for the product experiment and its agreement with the
    tabulated reference."""
    cfg = cfg or RunConfig.from_dict(EXPERIMENT_PRODUCT)
    val, est = integration_oracle(cfg)
    diff = abs(val - CONVERGENCE_REFERENCE)
    return {"reference": CONVERGENCE_REFERENCE, "oracle": val, "oracle_error_estimate": est,
            "difference": diff, "ok": diff <= REFERENCE_AGREEMENT}


# check ---------------------------------------------------------------------

def property_report(cfg: RunConfig, max_size: int | None = None) -> dict:
    """Range, interlacing and weight checks for sizes 1..max_size."""
    max_size = max_size or cfg.basis_size
    report = {"range_ok": True, "interlacing_ok": True, "weights_positive": True,
              "weights_sum": 0.0, "residuals": {}, "inner": {}}
    resid = {"eig_orthogonality": 0.0, "eig_reconstruction": 0.0, "cholesky": 0.0}
    tol_factor = 2.0 ** (-(cfg.precision_bits // 2))
    for name in cfg.inner_functions:
        g = cfg.inner(name)
        lo, hi = g.bounds_on_unit_box()
        big = full_operator(cfg, name, max_size)
        R = big.meta["cholesky"]
        G = big.meta["gram"]
        resid["cholesky"] = max(resid["cholesky"],
                                float(cholesky_residual(R, G, cfg.precision_bits)))
        entry = {"bounds": [lo, hi], "range_ok": True, "interlacing_ok": True,
                 "weights_positive": True, "weights_sum": 0.0, "failures": []}
        prev = None
        for size in range(1, max_size + 1):
            M = big.leading(size)
            E = symm_eig(M)
            rule = extract_rule(E, cfg.node_transform.get(name))
            resid["eig_orthogonality"] = max(resid["eig_orthogonality"],
                                             float(E.orthogonality_residual()) / size)
            resid["eig_reconstruction"] = max(
                resid["eig_reconstruction"],
                float(relative_residual(E.reconstruct(), M.entries, cfg.precision_bits)) / size)
            rng = check_range(rule, lo, hi)
            if not rng:
                entry["range_ok"] = False
                entry["failures"].append({"size": size, "range": rng.detail})
            if not np.all(rule.weights > 0):
                entry["weights_positive"] = False
                entry["failures"].append({"size": size, "weights": rule.weights.tolist()})
            dev = abs(float(np.sum(rule.weights)) - 1.0)
            entry["weights_sum"] = max(entry["weights_sum"], dev)
            if prev is not None:
                il = check_interlacing(prev, rule)
                if not il:
                    entry["interlacing_ok"] = False
                    entry["failures"].append({"size": size, "interlacing": il.detail})
            prev = rule
        report["inner"][name] = entry
        for key in ("range_ok", "interlacing_ok", "weights_positive"):
            report[key] = report[key] and entry[key]
        report["weights_sum"] = max(report["weights_sum"], entry["weights_sum"])
    report["residuals"] = resid
    report["residual_bound"] = tol_factor
    report["weights_sum_ok"] = report["weights_sum"] <= WEIGHT_SUM_TOL
    report["residuals_ok"] = all(v <= tol_factor for v in resid.values())
    report["ok"] = all(report[k] for k in ("range_ok", "interlacing_ok", "weights_positive",
                                           "weights_sum_ok", "residuals_ok"))
    return report


def default_y_grid(y_min: float = 0.0, y_max: float = 6.5, step: float = 0.05) -> np.ndarray:
    count = int(math.floor((y_max - y_min) / step + 1e-9)) + 1
    return np.round(y_min + step * np.arange(count), 12)
