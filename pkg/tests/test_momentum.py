import pytest

from hamop import expr as E
from hamop.catalog import Family, FamilySpec, build
from hamop.diffop import DiffOp, from_symmetrized
from hamop.expr import U, X
from hamop.momentum import (NotHamiltonianError, Outcome, SingularPointError, Witness, decide_momentum,
                            momentum_ode_fifth, momentum_ode_third, momentum_residual_system, solve_ode,
                            verify_momentum_density)

u, u1 = U(0), U(1)
half = E.const(E.mpq(1, 2))
sin_u, cos_u = E.kernel("sin", u), E.kernel("cos", u)
EX1 = FamilySpec(Family.VODOVA5, alpha=half, beta=E.const(-1))
EX2 = FamilySpec(Family.VODOVA5, alpha=sin_u, beta=sin_u + u)


def linear_family(A):
    return DiffOp.D(3) + from_symmetrized([(E.const(A) * u, 1)])


def const_family(A):
    return DiffOp.D(3) + E.const(A) * DiffOp.D(1)


def test_density_verification():
    assert verify_momentum_density(build(EX1), -u ** 2 / 4)
    assert verify_momentum_density(build(EX2), u, tol=1e-8)
    assert not verify_momentum_density(const_family(1), u ** 2)


def test_residual_system_first_order():
    h = E.func("h", ("x", "u"))
    system = momentum_residual_system(DiffOp({1: 2 * u, 0: u1}))
    exprs = {eq.expr for eq in system}
    assert exprs == {2 * u * E.diff_partial(h, X), 2 * u * E.diff_partial(h, u) + h - 1}


def test_residual_system_eq6_forces_h_u_zero():
    h_u = E.diff_partial(E.func("h", ("x", "u")), u)
    system = momentum_residual_system(DiffOp.D(3) + E.param("A") * DiffOp.D(1))
    assert any(eq.monomial == {3: 1} and eq.expr == h_u for eq in system)


def test_residual_system_quintic_reduces_to_ode():
    system = momentum_residual_system(build(FamilySpec(Family.VODOVA5, alpha=E.param("a"), beta=E.param("b"))))
    u1_eq = [eq for eq in system if eq.monomial == {1: 1}]
    assert len(u1_eq) == 1
    h = E.func("h", ("x", "u"))
    dus = [h]
    for _ in range(5):
        dus.append(E.diff_partial(dus[-1], u))
    a, b = E.param("a"), E.param("b")
    assert u1_eq[0].expr == dus[5] + 2 * a * dus[3] + 2 * b * dus[1] - 1
    # every other equation is built from x-derivatives of h only
    for eq in system:
        if eq is u1_eq[0]:
            continue
        partials = [E.atom_key(a) for a in eq.expr.free_atoms() if E.atom_key(a)[0] == "f"]
        assert partials and all(key[3][0] >= 1 for key in partials)


def test_fifth_order_odes():
    ode = momentum_ode_fifth(half, -1, 1)
    assert ode.to_str() == "h^(5) + h^(3) - 2*h^(1) - 1 = 0"
    assert momentum_ode_fifth(0, 0, 1).to_str() == "h^(5) - 1 = 0"
    ode2 = momentum_ode_fifth(sin_u, sin_u + u, 1)
    assert ode2.coeffs == (E.ONE, -sin_u + 2 * u, 3 * cos_u, 2 * sin_u, E.ZERO, E.ONE)
    assert ode2.residual(E.ONE).is_zero()


def test_third_order_odes():
    assert momentum_ode_third(0, 1).residual(u ** 4 / 24).is_zero()
    A = E.param("A")
    assert momentum_ode_third(A, 1).residual(u ** 2 / (4 * A)).is_zero()
    assert momentum_ode_third(u, 1).to_str() == "p^(4) + (2*u)*p^(2) + p^(1) - 1 = 0"


def test_series_solutions():
    sol = solve_ode(momentum_ode_fifth(half, -1), init=[0, E.mpq(-1, 2), 0, 0, 0], N=12)
    assert sol.polynomial() == -u / 2
    assert sol.terminating_degree() == 1
    sol = solve_ode(momentum_ode_fifth(0, 0), N=6)
    assert sol.polynomial() == u ** 5 / 120
    sol = solve_ode(momentum_ode_fifth(sin_u, sin_u + u), init=[1, 0, 0, 0, 0], N=12)
    assert sol.polynomial() == E.ONE
    assert sol.residual_max < 1e-12


def test_series_truncation_residual_is_reported():
    sol = solve_ode(momentum_ode_third(u, -1), init=[0, 0, 0, 0], N=8)
    assert sol.residual_valuation is not None and sol.residual_valuation > 8 - 4
    assert sol.shooting_max_deviation < 1e-6


def test_singular_point():
    with pytest.raises(SingularPointError):
        solve_ode(momentum_ode_fifth(0, 0).__class__((E.ZERO,) * 5 + (u,), E.ONE, "h"))


def test_decide_third_order():
    v = decide_momentum(linear_family(3))
    assert v.outcome is Outcome.YES
    assert v.density == u / 3
    assert decide_momentum(const_family(1)).outcome is Outcome.NO
    v = decide_momentum(build(FamilySpec(Family.MOKHOV3_CONJUGATED, f=u)))
    assert v.outcome is Outcome.YES
    assert verify_momentum_density(build(FamilySpec(Family.MOKHOV3_CONJUGATED, f=u)), v.density)


def test_decide_fifth_order():
    v = decide_momentum(build(EX1))
    assert v.outcome is Outcome.YES
    assert v.ode.to_str() == "h^(5) + h^(3) - 2*h^(1) - 1 = 0"
    v = decide_momentum(build(FamilySpec(Family.COOKE5_UNIT)))
    assert v.outcome is Outcome.NO
    assert v.witness is Witness.PROP5_CONTRADICTION
    assert v.trace[-1].expr == E.const(-1)


def test_quasiconstant_cooke_branch_fails_at_u1_matching():
    v = decide_momentum(build(FamilySpec(Family.COOKE5_UNIT, quasiconstant=True)))
    assert v.outcome is Outcome.NO
    assert v.trace[-1].expr == E.const(-1)


def test_non_translation_invariant_third_order_is_no():
    op = DiffOp.D(3) + from_symmetrized([(X, 1)])
    v = decide_momentum(op)
    assert v.outcome is Outcome.NO
    assert v.witness is Witness.NOT_TRANSLATION_INVARIANT


def test_non_hamiltonian_rejected():
    with pytest.raises(NotHamiltonianError):
        decide_momentum(DiffOp.D(3) + from_symmetrized([(u ** 2, 1)]))


def test_verdict_serialization_is_stable():
    a = decide_momentum(build(FamilySpec(Family.COOKE5_UNIT))).as_dict()
    b = decide_momentum(build(FamilySpec(Family.COOKE5_UNIT))).as_dict()
    assert a == b and a["outcome"] == "NO"
