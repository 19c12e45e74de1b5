import pytest

from hamop import catalog
from hamop import expr as E
from hamop.catalog import (Family, FamilyError, FamilySpec, build, lemma3_coefficients, lemma3_consistency,
                           relation_residual, verify_family_hamiltonian, verify_lemma3_relations)
from hamop.diffop import DiffOp, from_symmetrized
from hamop.expr import U, X
from hamop.jetcalc import total_derivative

u, u1, u2, u3 = U(0), U(1), U(2), U(3)
half = E.const(E.mpq(1, 2))
sin_u = E.kernel("sin", u)


def _extract_bc(op: DiffOp):
    """Invert p5 = 2a, p3 = 10 a'' + 2b, p1 = 5 a'''' + 3 b'' + 2c."""
    Dn = lambda e, n: e if n == 0 else Dn(total_derivative(e), n - 1)  # noqa: E731
    a = op.coeff(5) / 2
    b = (op.coeff(3) - 10 * Dn(a, 2)) / 2
    c = (op.coeff(1) - 5 * Dn(a, 4) - 3 * Dn(b, 2)) / 2
    return a, b, c


def test_rational_instance_b():
    op = build(FamilySpec(Family.VODOVA5, alpha=half, beta=E.const(-1)))
    _, b, _ = _extract_bc(op)
    assert b == (10 * u3 * u1 - 55 * u2 ** 2 + u1 ** 4) / (2 * u1 ** 6)
    assert lemma3_coefficients(half, -1)[1] == b


def test_trigonometric_instance_c_has_cos_term():
    op = build(FamilySpec(Family.VODOVA5, alpha=sin_u, beta=sin_u + u))
    _, _, c = _extract_bc(op)
    cos_u = E.kernel("cos", u)
    num = c * u1 ** 8
    ids = [E._resolve_var(a) for a in (u1, u2, cos_u)]
    assert num.coefficients_in(ids)[(6, 1, 1)] == E.const(3)


def test_lemma3_operator_is_symmetrized_form():
    a, b, c = lemma3_coefficients(0, 0)
    assert a == 1 / (2 * u1 ** 4)
    expect = from_symmetrized([(a, 5), (b, 3), (c, 1)])
    assert build(FamilySpec(Family.VODOVA5, alpha=E.ZERO, beta=E.ZERO)) == expect


def test_mokhov3_const_zero():
    assert build(FamilySpec(Family.MOKHOV3_CONST, A=E.ZERO)) == DiffOp.D(3)


@pytest.mark.parametrize("spec", [
    FamilySpec(Family.MOKHOV3_CONJUGATED, f=u ** 2),
    FamilySpec(Family.COOKE5_UNIT, gamma=X),
    FamilySpec(Family.VODOVA5, sign=-1, alpha=E.ZERO, beta=E.ZERO),
    FamilySpec(Family.MOKHOV3_CONST, A=E.ONE),
], ids=["conjugated-u2", "cooke-gamma-x", "vodova-minus", "const-1"])
def test_families_hamiltonian(spec):
    assert verify_family_hamiltonian(spec).hamiltonian


def test_parameter_validation():
    with pytest.raises(FamilyError):
        build(FamilySpec(Family.MOKHOV3_LINEAR, A=E.const(-1)))
    with pytest.raises(FamilyError):
        build(FamilySpec(Family.VODOVA5, alpha=X, beta=E.ZERO))
    with pytest.raises(FamilyError):
        build(FamilySpec(Family.COOKE5_UNIT, beta=E.ONE))
    with pytest.raises(FamilyError):
        build(FamilySpec(Family.MOKHOV3_CONJUGATED, f=u1))


def test_relation_12_exact_for_zero_parameters():
    _, b, c = lemma3_coefficients(0, 0)
    assert E.diff_partial(b, u3) == 5 / u1 ** 5
    assert relation_residual("b_u3 = 5/u_1^5", b, c).is_zero()


@pytest.mark.parametrize("sign", [1, -1])
def test_relations_hold_for_rational_instance(sign):
    res = verify_lemma3_relations(half, -1, sign)
    assert [r.index for r in res] == list(range(9, 20))
    assert all(r.holds for r in res)


def test_consistency_oracle_flags_a_mutated_relation(monkeypatch):
    table = list(catalog.RELATIONS)
    idx, text = table[3]
    table[3] = (idx, text.replace("5/u_1^5", "6/u_1^5"))
    monkeypatch.setattr(catalog, "RELATIONS", tuple(table))
    report = lemma3_consistency(0, 0)
    assert report["hamiltonian"].hamiltonian
    assert report["suspect_transcriptions"] == [12]
