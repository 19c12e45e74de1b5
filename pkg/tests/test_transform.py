import random

import pytest

from hamop import expr as E
from hamop.catalog import Family, FamilySpec, build
from hamop.diffop import DiffOp, from_symmetrized, is_hamiltonian
from hamop.expr import U, X
from hamop.probe import zero_test
from hamop.symbridge import QuadratureError
from hamop.transform import (Kind, Substitution, TransformError, is_special_contact, k_operator,
                             normalize_leading_coefficient, pushforward_operator)

v, v1, v2 = U(0), U(1), U(2)
Y = X
q = lambda a, b=1: E.const(E.mpq(a, b))  # noqa: E731

THIRD = [
    FamilySpec(Family.MOKHOV3_LINEAR, A=q(3)),
    FamilySpec(Family.MOKHOV3_CONST, A=q(2)),
    FamilySpec(Family.MOKHOV3_CONJUGATED, f=v),
]
FIFTH = [
    FamilySpec(Family.VODOVA5, alpha=q(1, 2), beta=q(-1)),
    FamilySpec(Family.COOKE5_UNIT),
]
NONLINEAR = [
    Substitution(Y, v ** 3 + v),
    Substitution(Y + v, v),
    Substitution(Y + v ** 2, 2 * v),
    Substitution(Y, E.kernel("exp", v)),
    Substitution(2 * Y, v + Y),
]
AFFINE = [Substitution(Y, 2 * v + 1), Substitution(Y + 3, -v), Substitution(q(1, 2) * Y, v)]


def ops_equal(A: DiffOp, B: DiffOp) -> bool:
    keys = set(A.coeffs) | set(B.coeffs)
    return all(zero_test(A.coeff(k) - B.coeff(k)).is_zero for k in keys)


def test_kinds():
    assert Substitution.identity().kind is Kind.POINT
    assert Substitution(Y, E.I * v).kind is Kind.POINT
    assert Substitution(Y + v1, v + v1 ** 2 / 2).kind is Kind.SPECIAL_CONTACT
    assert Substitution(Y + v1, v).kind is Kind.GENERAL
    assert Substitution(Y + v2, v).kind is Kind.GENERAL


def test_special_contact_reports():
    r = is_special_contact(Substitution.identity())
    assert r.is_special and r.rho == E.ONE
    r = is_special_contact(Substitution(Y, E.I * v))
    assert r.is_special and r.rho == E.I
    r = is_special_contact(Substitution(Y + v1, v))
    assert not r.is_special and "tangency" in r.failed_condition


def test_k_operator():
    assert k_operator(Substitution.identity()) == DiffOp.mult(E.ONE)
    psi = v ** 3 + v
    assert k_operator(Substitution(Y, psi)) == DiffOp.mult(E.diff_partial(psi, v))


@pytest.mark.parametrize("sub", [Substitution(Y + v1, v + v1 ** 2 / 2), Substitution(Y + v1 ** 2, v + 2 * v1 ** 3 / 3)])
def test_special_contact_k_is_rho_times_dphi(sub):
    rep = is_special_contact(sub)
    assert rep.is_special
    K = k_operator(sub)
    assert set(K.coeffs) == {0}
    assert K.coeff(0) == rep.rho * E.total_derivative(sub.phi)


def test_pushforward_examples():
    lam = E.param("lam")
    assert pushforward_operator(DiffOp.D(1), Substitution(Y, lam * v)) == lam ** -2 * DiffOp.D(1)
    minus = build(FamilySpec(Family.VODOVA5, sign=-1, alpha=E.ZERO, beta=E.ZERO))
    out = pushforward_operator(minus, Substitution(Y, E.I * v))
    assert out.leading == 1 / v1 ** 4
    linear_family = build(FamilySpec(Family.MOKHOV3_LINEAR, A=q(3)))
    assert pushforward_operator(linear_family, Substitution.identity()) == linear_family


def test_general_substitution_refused():
    with pytest.raises(TransformError, match="nonlocal"):
        pushforward_operator(DiffOp.D(1), Substitution(Y + v2, v))


def _pairs(n, seed):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        if rng.random() < 0.6:
            out.append((rng.choice(THIRD), rng.choice(NONLINEAR)))
        else:
            out.append((rng.choice(FIFTH), rng.choice(AFFINE)))
    return out


@pytest.mark.parametrize("spec,sub", _pairs(10, 1))
def test_pushforward_preserves_hamiltonian(spec, sub):
    assert is_hamiltonian(pushforward_operator(build(spec), sub)).hamiltonian


@pytest.mark.slow
def test_pushforward_fifth_order_nonlinear():
    op = build(FIFTH[0])
    assert is_hamiltonian(pushforward_operator(op, Substitution(Y + v ** 2, v ** 3 + v))).hamiltonian


def test_special_contact_pushforward_preserves_hamiltonian():
    sub = Substitution(Y + v1, v + v1 ** 2 / 2)
    for spec in THIRD[:2]:
        assert is_hamiltonian(pushforward_operator(build(spec), sub)).hamiltonian


@pytest.mark.parametrize("i", range(10))
def test_functoriality(i):
    rng = random.Random(100 + i)
    spec = rng.choice(THIRD)
    s1, s2 = rng.choice(NONLINEAR), rng.choice(NONLINEAR + AFFINE)
    op = build(spec)
    stepwise = pushforward_operator(pushforward_operator(op, s1), s2)
    assert ops_equal(stepwise, pushforward_operator(op, s1.then(s2)))


@pytest.mark.parametrize("s,inv", [
    (Substitution(Y, 2 * v + 1), Substitution(Y, (v - 1) / 2)),
    (Substitution(Y + v, v), Substitution(Y - v, v)),
    (Substitution(Y, E.kernel("exp", v)), Substitution(Y, E.kernel("ln", v))),
])
def test_inverse_recovers_operator(s, inv):
    op = build(THIRD[0])
    assert ops_equal(pushforward_operator(pushforward_operator(op, s), inv), op)


def _quintic(lead):
    return DiffOp({5: lead, 3: v1, 1: v})


def test_normalize_u4_scaling():
    res = normalize_leading_coefficient(_quintic(1 / (16 * v1 ** 4)))
    assert res.target == "+1/u_1^4"
    assert res.substitution.phi == Y
    psi_prime = E.diff_partial(res.substitution.psi, v)
    assert zero_test(psi_prime ** 3 - q(1, 4)).is_zero


def test_normalize_identity_when_already_normal():
    op = build(FamilySpec(Family.VODOVA5, alpha=E.ZERO, beta=E.ZERO))
    res = normalize_leading_coefficient(op)
    assert res.substitution == Substitution.identity()
    assert res.operator == op


def test_normalize_order_zero_branch():
    res = normalize_leading_coefficient(_quintic(q(4)))
    assert res.substitution.psi == 2 * v
    assert res.operator.leading == E.ONE
    res = normalize_leading_coefficient(_quintic(q(-9)))
    assert res.target == "-1"


def test_normalize_shift_branch():
    res = normalize_leading_coefficient(_quintic(1 / (v1 + 1) ** 4))
    assert res.substitution.psi == v
    assert res.operator.leading == E.ONE


def test_normalize_reports_unsupported_shapes():
    with pytest.raises(NotImplementedError):
        normalize_leading_coefficient(_quintic(1 / v2 ** 4))
    with pytest.raises(TransformError):
        normalize_leading_coefficient(DiffOp.D(3))


def test_normalize_quadrature_failure_names_the_ode():
    with pytest.raises(QuadratureError, match="Psi"):
        normalize_leading_coefficient(_quintic(E.kernel("exp", v ** 2) + 1))
