import random

import pytest

import oracles
from hamop import expr as E
from hamop.catalog import Family, FamilySpec, build
from hamop.diffop import (DiffOp, adjoint, apply, compose, d_operator, from_symmetrized, is_hamiltonian,
                          is_skew_adjoint, jacobi_residual)
from hamop.expr import U, X
from hamop.jetcalc import total_derivative
from hamop.probe import ZeroKind, zero_test

from helpers import random_diff_function

u, u1, u2 = U(0), U(1), U(2)
D = DiffOp.D


def linear_family(A):
    return D(3) + from_symmetrized([(A * u, 1)])


def test_from_symmetrized():
    f = E.func("f", ("x", "u"))
    assert from_symmetrized([(f, 1)]) == DiffOp({1: 2 * f, 0: total_derivative(f)})


def test_composition_leibniz():
    assert compose(D(1), DiffOp.mult(u)) == DiffOp({1: u, 0: u1})
    assert compose(D(2), DiffOp.mult(u)) == DiffOp({2: u, 1: 2 * u1, 0: u2})


def test_conjugated_core():
    S = U(3) / u1 - E.const(E.mpq(3, 2)) * u2 ** 2 / u1 ** 2
    inv = DiffOp.mult(1 / u1)
    core = compose(compose(inv, D(3) + from_symmetrized([(S, 1)])), inv)
    assert core.order == 3
    assert core.leading == 1 / u1 ** 2


def test_adjoint_basics():
    assert adjoint(D(1)) == -D(1)
    m = DiffOp.mult(E.param("rho") * total_derivative(X + u))
    assert adjoint(m) == m


def test_symmetrized_is_skew():
    rng = random.Random(2)
    for _ in range(5):
        parts = [(random_diff_function(rng, 2), k) for k in (5, 3, 1)]
        A = from_symmetrized(parts)
        assert adjoint(A) == -A


def test_apply():
    assert apply(DiffOp({1: 2 * u, 0: u1}), E.ONE) == u1
    A = E.const(3)
    assert apply(linear_family(A), 1 / A) == u1
    ex1 = build(FamilySpec(Family.VODOVA5, alpha=E.const(E.mpq(1, 2)), beta=E.const(-1)))
    assert apply(ex1, -u / 2) == u1


def test_d_operator():
    f = E.func("f", ("x", "u"))
    assert d_operator(D(3) + 5 * D(1), f).is_zero()
    assert d_operator(DiffOp({1: 2 * u, 0: u1}), f) == DiffOp({1: f, 0: 2 * total_derivative(f)})
    A = E.param("A")
    op = DiffOp({3: E.ONE, 1: 2 * A * u, 0: A * u1})
    assert d_operator(op, f) == DiffOp({1: A * f, 0: 2 * A * total_derivative(f)})


def test_constant_coefficient_jacobi_is_exact_zero():
    assert jacobi_residual(D(5) - 7 * D(3) + D(1)).is_zero()


def test_linear_family_hamiltonian_matches_oracle():
    assert all(o == 0 for o in oracles.jacobi_obstructions(oracles.linear_family(3)))
    rep = is_hamiltonian(linear_family(E.const(3)))
    assert rep.hamiltonian
    assert zero_test(jacobi_residual(linear_family(E.param("A")))).is_zero


def test_negative_control_nonzero_matches_oracle():
    assert oracles.is_skew(oracles.negative_control)
    assert any(o != 0 for o in oracles.jacobi_obstructions(oracles.negative_control))
    A = D(3) + from_symmetrized([(u ** 2, 1)])
    rep = is_hamiltonian(A)
    assert rep.skew_adjoint
    assert rep.jacobi.kind is ZeroKind.NONZERO
    assert rep.witness is not None


def test_hamiltonian_reports():
    assert is_hamiltonian(D(3) + D(1)).hamiltonian
    ex2 = build(FamilySpec(Family.VODOVA5, alpha=E.kernel("sin", u), beta=E.kernel("sin", u) + u))
    assert is_hamiltonian(ex2, tol=1e-8).hamiltonian
    rep = is_hamiltonian(D(3) + DiffOp.mult(u) * D(1))
    assert not rep.skew_adjoint
    assert not rep.hamiltonian
    assert rep.as_dict()["jacobi_scope"] == "diagnostic"


def test_operator_algebra():
    A = DiffOp({2: u, 0: u1})
    assert (A + A) == 2 * A
    assert (A - A).is_zero()
    assert A * D(1) == compose(A, D(1))
    assert A(u) == u * u2 + u1 * u
    assert is_skew_adjoint(D(1))
    with pytest.raises(TypeError):
        A * "x"
