import csv
import io

import numpy as np
import pytest

from opquad.eigsym import symm_eig
from opquad.experiments import EXPERIMENT_FRACTIONAL, EXPERIMENT_PRODUCT, RunConfig
from opquad.matfun import BUILTINS, MatfunDomainError, power
from opquad.opmatrix import operator_matrix
from opquad.quadrule import apply_rule, build_rule, check_interlacing, check_range, extract_rule
from opquad.symfunc import SymFunc, basis_family
from oracles import gauss_legendre_unit

x1 = SymFunc.variable(0, 1)


def rules_for(cfg, name, sizes):
    big = operator_matrix(cfg.basis(max(sizes)), cfg.inner(name))
    return {s: extract_rule(symm_eig(big.leading(s))) for s in sizes}


def test_single_node():
    rule = build_rule([SymFunc.constant(1, 1)], x1)
    assert list(rule.nodes) == [0.5] and list(rule.weights) == [1.0]


def test_gauss_legendre_five():
    rule = build_rule(basis_family("monomials", 5, 1), x1)
    nodes, weights = gauss_legendre_unit(5)
    assert np.abs(rule.nodes - nodes).max() < 1e-15
    assert np.abs(rule.weights - weights).max() < 1e-15


def test_cube_transform_nodes_in_unit_interval(fractional_cfg):
    rule = build_rule(fractional_cfg.basis(5), fractional_cfg.inner("g2"), transform="pow3")
    assert rule.transform == "pow3"
    assert ((rule.nodes >= 0) & (rule.nodes <= 1)).all()
    assert np.allclose(rule.nodes, rule.eigenvalues ** 3, rtol=1e-15, atol=0)


def test_apply_rule_examples(fractional_cfg):
    one = BUILTINS["identity"]
    r1 = build_rule(fractional_cfg.basis(5), fractional_cfg.inner("g1"))
    assert apply_rule(r1, lambda v: np.ones_like(v)) == pytest.approx(1.0, abs=1e-13)
    assert abs(apply_rule(r1, one) - 0.5) <= 1e-12
    r2 = build_rule(fractional_cfg.basis(5), fractional_cfg.inner("g2"), transform="pow3")
    assert abs(apply_rule(r2, power(1 / 3)) - 0.75) <= 1e-12
    assert abs(apply_rule(r2, "pow0.5") - 2 / 3) < 1e-3


def test_apply_rule_domain_error():
    rule = build_rule(basis_family("monomials", 3, 1), x1)
    shifted = extract_rule(symm_eig(np.diag([-0.5, 0.2])))
    with pytest.raises(MatfunDomainError):
        apply_rule(shifted, power(0.5))
    # 3-point Gauss error for exp is about 8e-7
    assert apply_rule(rule, "exp") == pytest.approx(np.e - 1, abs=1e-6)


@pytest.mark.parametrize("size", range(1, 9))
def test_gaussian_exactness(size):
    rule = build_rule(basis_family("monomials", size, 1), x1)
    for k in range(2 * size):
        assert abs(apply_rule(rule, power(k)) - 1 / (k + 1)) <= 1e-12


def test_range_examples(product_cfg):
    for n in (1, 4, 10):
        assert check_range(build_rule(basis_family("monomials", n, 1), x1), 0, 1)
    rules = {name: rules_for(product_cfg, name, [19])[19] for name in ("g1", "g2")}
    assert check_range(rules["g1"], 0, 1)
    assert check_range(rules["g2"], 0, 2)
    report = check_range(rules["g2"], 0, 1)
    assert not report and report.worst > 0.5


def test_interlacing_examples(fractional_cfg):
    r0 = build_rule(basis_family("monomials", 1, 1), x1)
    r1 = build_rule(basis_family("monomials", 2, 1), x1)
    b = sorted(r1.nodes)
    # 2x2 Jacobi matrix: 1/2 +- 1/sqrt(12)
    assert b == pytest.approx([0.5 - 12 ** -0.5, 0.5 + 12 ** -0.5], abs=1e-15)
    assert b[0] <= r0.nodes[0] <= b[1]
    assert check_interlacing(r0, r1)
    rules = rules_for(fractional_cfg, "g1", [5, 6])
    assert check_interlacing(rules[5], rules[6])


def test_interlacing_ties_and_failures():
    a = extract_rule(symm_eig(np.diag([1.0, 1.0])))
    b = extract_rule(symm_eig(np.diag([1.0, 1.0, 1.0])))
    assert check_interlacing(a, b)
    c = extract_rule(symm_eig(np.diag([0.0, 0.5, 3.0])))
    d = extract_rule(symm_eig(np.diag([2.0, 2.5])))
    assert not check_interlacing(d, c)
    with pytest.raises(ValueError):
        check_interlacing(a, a)


@pytest.mark.parametrize("cfg_dict", [EXPERIMENT_FRACTIONAL, EXPERIMENT_PRODUCT])
def test_properties_on_experiment_configurations(cfg_dict):
    cfg = RunConfig.from_dict(cfg_dict)
    sizes = list(range(1, 22))
    for name in cfg.inner_functions:
        lo, hi = cfg.inner(name).bounds_on_unit_box()
        rules = rules_for(cfg, name, sizes)
        for s in sizes:
            r = rules[s]
            assert (r.weights > 0).all()
            assert abs(r.weights.sum() - 1) <= 1e-13
            assert check_range(r, lo, hi)
            if s > 1:
                assert check_interlacing(rules[s - 1], r)


def test_csv_round_trip(tmp_path, fractional_cfg):
    rule = build_rule(fractional_cfg.basis(5), fractional_cfg.inner("g1"))
    path = tmp_path / "rule.csv"
    text = rule.to_csv(path)
    raw = path.read_bytes()
    assert raw == text.encode() and b"\r" not in raw
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["index", "node", "weight"]
    assert [float(r[1]) for r in rows[1:]] == list(rule.nodes)
    assert [float(r[2]) for r in rows[1:]] == list(rule.weights)


def test_fractional_rule_frozen_nodes(fractional_cfg):
    # frozen from a 512-bit run; the g=x rule is exact for f=x, the cube rule for f=x^(1/3)
    r1 = build_rule(fractional_cfg.basis(5), fractional_cfg.inner("g1"))
    r2 = build_rule(fractional_cfg.basis(5), fractional_cfg.inner("g2"), transform="pow3")
    assert r1.nodes == pytest.approx([0.01255507, 0.09801067, 0.32094243, 0.64592055, 0.92257128],
                                     abs=1e-8)
    assert r2.nodes == pytest.approx([0.00622410, 0.07574969, 0.29020372, 0.62432010, 0.91717267],
                                     abs=1e-8)
    assert abs(apply_rule(r1, power(1.0)) - 0.5) <= 1e-12
    assert abs(apply_rule(r2, power(1 / 3)) - 0.75) <= 1e-12
