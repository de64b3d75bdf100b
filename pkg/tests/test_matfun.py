import math

import gmpy2
import numpy as np
import pytest

from opquad.experiments import EXPERIMENT_PRODUCT, RunConfig
from opquad.matfun import (BUILTINS, MatfunDomainError, ScalarFunction, apply_matfun,
                           apply_to_coefficients, corner, power, product, scalar_function,
                           symmetrized_product)
from opquad.opmatrix import coefficients, operator_matrix
from opquad.symfunc import SymFunc, basis_family
from oracles import table_integrand_reference

ident, exp_, log1p = BUILTINS["identity"], BUILTINS["exp"], BUILTINS["log1p"]
x1 = SymFunc.variable(0, 1)


def rel_fro(a, b):
    return np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def product_mats():
    cfg = RunConfig.from_dict(EXPERIMENT_PRODUCT)
    return {size: (operator_matrix(cfg.basis(size), cfg.inner("g1")),
                   operator_matrix(cfg.basis(size), cfg.inner("g2"))) for size in (3, 8)}


def test_identity_returns_input():
    A = np.array([[2.0, 0.5, 0.1], [0.5, 1.0, 0.3], [0.1, 0.3, -1.0]])
    assert np.abs(apply_matfun(ident, A) - A).max() < 1e-15


def test_exp_diagonal():
    out = apply_matfun(exp_, np.diag([0.0, 1.0]))
    assert out[0, 0] == 1.0 and out[1, 1] == pytest.approx(math.e, rel=1e-16)
    assert out[0, 1] == 0


def test_square_of_swap():
    out = apply_matfun(power(2), [[0, 1], [1, 0]])
    assert np.abs(out - np.eye(2)).max() < 1e-15


def test_domain_error_lists_eigenvalues():
    with pytest.raises(MatfunDomainError) as info:
        apply_matfun(log1p, np.diag([-2.0, 0.5, -1.0]))
    assert sorted(float(v) for v in info.value.offending) == [-2.0, -1.0]
    with pytest.raises(MatfunDomainError):
        apply_matfun(BUILTINS["sqrt"], np.diag([-0.5, 1.0]))
    with pytest.raises(MatfunDomainError):
        apply_matfun(power(0.5), np.diag([-0.5, 1.0]))


def test_scalar_function_lookup():
    assert scalar_function("pow3")(2.0) == 8.0
    assert scalar_function("pow-1")(4.0) == 0.25
    assert scalar_function("pow0.5")(9.0) == 3.0
    custom = ScalarFunction("twice", lambda v: 2 * v)
    assert scalar_function("twice", {"twice": custom}) is custom
    with pytest.raises(KeyError):
        scalar_function("sin")


def test_result_symmetric_as_stored(product_mats):
    A, _ = product_mats[8]
    out = apply_matfun(exp_, A)
    assert (out == out.T).all()
    big = apply_matfun(exp_, A, high_precision=True)
    assert (big == big.T).all()
    assert np.abs(np.asarray(big, float) - out).max() < 1e-14


def test_corner_examples():
    M = operator_matrix([SymFunc.constant(1, 1)], x1)
    assert corner(apply_matfun(ident, M)) == 0.5
    M = operator_matrix(basis_family("monomials", 5, 1), x1)
    from opquad.eigsym import symm_eig
    E = symm_eig(M)
    nodes, w = E.values_float(), E.vectors_float()[0] ** 2
    for y in (0.5, 2, 3.7):
        assert corner(apply_matfun(power(y), M)) == pytest.approx(float(np.sum(w * nodes ** y)),
                                                                  rel=1e-14)


def test_table_row_18(product_mats):
    cfg = RunConfig.from_dict(EXPERIMENT_PRODUCT)
    A = operator_matrix(cfg.basis(19), cfg.inner("g1"))
    B = operator_matrix(cfg.basis(19), cfg.inner("g2"))
    val = corner(product([apply_matfun(exp_, A), apply_matfun(log1p, B)]))
    assert abs(val - 0.9426091069789710) < 1e-15 * 10
    assert abs(val - table_integrand_reference()) < 1e-11


def test_symmetrized_product_examples():
    A = np.diag([1.0, 3.0])
    assert (symmetrized_product([A]) == A).all()
    B = np.diag([2.0, -1.0])
    assert (symmetrized_product([A, B]) == A @ B).all()
    S = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert (symmetrized_product([S, np.diag([1.0, 2.0])]) == [[0, 1.5], [1.5, 0]]).all()
    with pytest.raises(ValueError):
        symmetrized_product([np.eye(2), np.eye(3)])


def test_non_commuting_experiment_matrices(product_mats):
    A, B = (m.to_float() for m in product_mats[3])
    assert np.linalg.norm(A @ B - B @ A) > 0
    S = symmetrized_product(list(product_mats[3]))
    assert (S == S.T).all()
    S_rev = symmetrized_product(list(product_mats[3])[::-1])
    assert (S == S_rev).all()


def test_composition(product_mats):
    for A in product_mats[8]:
        scaled = ScalarFunction("half", lambda v: 0.5 * v)
        inner = apply_matfun(scaled, A, high_precision=True)
        outer = apply_matfun(exp_, inner)
        direct = apply_matfun(ScalarFunction("exp_half", lambda v: np.exp(0.5 * v)), A)
        assert rel_fro(outer, direct) <= 1e-10


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_integer_powers(product_mats, k):
    for A in product_mats[8]:
        dense = A.to_float()
        want = np.linalg.matrix_power(dense, k)
        assert rel_fro(apply_matfun(power(k), A), want) <= 1e-10


def test_apply_to_coefficients():
    A = np.array([[1.0, 0.2], [0.2, -0.5]])
    v = np.array([0.3, -0.7])
    assert np.allclose(apply_to_coefficients(ident, A, v), A @ v, atol=1e-15)
    e0 = np.array([1.0, 0.0])
    col = apply_to_coefficients(exp_, A, e0)
    assert col[0] == corner(apply_matfun(exp_, A))
    with pytest.raises(ValueError):
        apply_to_coefficients(ident, A, np.ones(3))


def test_coefficients_integral_of_x_times_x():
    basis = basis_family("monomials", 3, 1)
    M = operator_matrix(basis, x1)
    v = coefficients(basis, x1)
    out = apply_to_coefficients(ident, M, [float(c) for c in v])
    assert abs(out[0] - 1 / 3) <= 1e-12
    big = apply_to_coefficients(ident, M, v, high_precision=True)
    with gmpy2.context(precision=512):
        assert abs(big[0] - gmpy2.mpq(1, 3)) < 2.0 ** -500
