"""Acceptance criteria 1-8; each test records one PASS/FAIL line."""

from __future__ import annotations

import random
import time
from contextlib import contextmanager

import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from hamop import expr as E
from hamop.catalog import Family, FamilySpec, build, lemma3_consistency, verify_lemma3_relations
from hamop import catalog
from hamop.diffop import DiffOp, adjoint, compose, from_symmetrized, is_hamiltonian
from hamop.expr import U, X
from hamop.jetcalc import euler_operator, frechet_derivative, level, total_derivative
from hamop.momentum import (Outcome, Witness, decide_momentum, momentum_ode_fifth, solve_ode,
                            verify_momentum_density)
from hamop.probe import ZeroKind, zero_test
from hamop.transform import Substitution, pushforward_operator

from helpers import random_diff_function

u, u1 = U(0), U(1)
q = lambda a, b=1: E.const(E.mpq(a, b))  # noqa: E731
sin_u = E.kernel("sin", u)


@contextmanager
def criterion(n: int, title: str, budget: float):
    start = time.perf_counter()
    state = {"detail": ""}
    ok = False
    try:
        yield state
        ok = True
    finally:
        took = time.perf_counter() - start
        within = took < budget
        verdict = "PASS" if ok and within else "FAIL"
        extra = f"; {state['detail']}" if state["detail"] else ""
        line = f"criterion {n} [{verdict}] {title} ({took:.1f}s of {budget:.0f}s){extra}"
        ACCEPTANCE_LINES[n] = line
        print(line)
    assert within, f"criterion {n} exceeded its {budget}s budget"


def test_criterion_1_rational_instance():
    with criterion(1, "rational fifth-order instance end to end", 120) as st:
        op = build(FamilySpec(Family.VODOVA5, alpha=q(1, 2), beta=q(-1)))
        rep = is_hamiltonian(op, trials=128, tol=1e-9)
        assert rep.hamiltonian
        assert rep.jacobi.kind is ZeroKind.EXACT_ZERO or (rep.jacobi.trials >= 100 and rep.jacobi.max_residual < 1e-9)
        assert verify_momentum_density(op, -u ** 2 / 4)
        v = decide_momentum(op)
        assert v.outcome is Outcome.YES
        assert v.ode.to_str() == "h^(5) + h^(3) - 2*h^(1) - 1 = 0"
        st["detail"] = f"jacobi {rep.jacobi.kind.value}, ODE {v.ode.to_str()}"


def test_criterion_2_trigonometric_instance():
    with criterion(2, "trigonometric fifth-order instance end to end", 120) as st:
        op = build(FamilySpec(Family.VODOVA5, alpha=sin_u, beta=sin_u + u))
        rep = is_hamiltonian(op, trials=128, tol=1e-8)
        assert rep.hamiltonian
        assert verify_momentum_density(op, u, trials=128, tol=1e-8)
        sol = solve_ode(momentum_ode_fifth(sin_u, sin_u + u), u0=0, init=[1, 0, 0, 0, 0], N=12)
        assert sol.polynomial() == E.ONE
        assert sol.residual_max < 1e-12
        st["detail"] = f"jacobi {rep.jacobi.kind.value}, series residual {sol.residual_max:.1e}"


def test_criterion_3_third_order_suite():
    with criterion(3, "third-order suite", 60) as st:
        for f in (E.ZERO, u, u ** 2):
            assert is_hamiltonian(build(FamilySpec(Family.MOKHOV3_CONJUGATED, f=f))).hamiltonian
        for A in (1, 3):
            op = build(FamilySpec(Family.MOKHOV3_LINEAR, A=q(A)))
            assert is_hamiltonian(op).hamiltonian
            v = decide_momentum(op)
            assert v.outcome is Outcome.YES and v.density == u / A
            assert verify_momentum_density(op, v.density)
        for A in (-2, 0, 5):
            assert decide_momentum(build(FamilySpec(Family.MOKHOV3_CONST, A=q(A)))).outcome is Outcome.NO
        st["detail"] = "5 Hamiltonian checks, linear family YES for A=1,3, constant family NO for A=-2,0,5"


COOKE_CASES = [
    ("alpha=beta=gamma=0", FamilySpec(Family.COOKE5_UNIT)),
    ("gamma=x", FamilySpec(Family.COOKE5_UNIT, gamma=X)),
    ("beta=1, rho=0", FamilySpec(Family.COOKE5_UNIT, beta=E.ONE, rho=E.ZERO)),
]


def test_criterion_4_cooke_contradictions():
    with criterion(4, "cooke5 contradiction suite", 300) as st:
        for _, spec in COOKE_CASES:
            op = build(spec)
            assert is_hamiltonian(op).hamiltonian
            v = decide_momentum(op)
            assert v.outcome is Outcome.NO
            assert v.witness is Witness.PROP5_CONTRADICTION
            assert v.trace[-1].expr == E.const(-1)
        st["detail"] = "all three end in a unit residual (0 = 1)"


def test_criterion_5_relation_system(monkeypatch):
    with criterion(5, "relation system", 300) as st:
        params = [(E.ZERO, E.ZERO), (q(1, 2), q(-1)), (sin_u, sin_u + u)]
        count = 0
        for alpha, beta in params:
            for sign in (1, -1):
                rels = verify_lemma3_relations(alpha, beta, sign)
                bad = [r.index for r in rels if not r.holds]
                assert not bad, f"relations {bad} fail for alpha={alpha}, beta={beta}, sign={sign}"
                assert all(r.verdict.kind in (ZeroKind.EXACT_ZERO, ZeroKind.ZERO) for r in rels)
                count += len(rels)
        # the oracle must notice a corrupted transcription
        table = list(catalog.RELATIONS)
        idx, text = table[7]
        table[7] = (idx, text.replace("+ 21*Dx(b)", "+ 20*Dx(b)", 1))
        monkeypatch.setattr(catalog, "RELATIONS", tuple(table))
        report = lemma3_consistency(q(1, 2), q(-1))
        assert report["suspect_transcriptions"] == [idx]
        st["detail"] = f"{count} residuals zero; mutated relation ({idx}) flagged"


def test_criterion_6_transform_suite():
    with criterion(6, "transform suite", 120) as st:
        minus = build(FamilySpec(Family.VODOVA5, sign=-1, alpha=E.ZERO, beta=E.ZERO))
        out = pushforward_operator(minus, Substitution(X, E.I * u))
        assert out.leading == 1 / u1 ** 4
        linear_family = build(FamilySpec(Family.MOKHOV3_LINEAR, A=q(3)))
        assert is_hamiltonian(pushforward_operator(linear_family, Substitution(X, u ** 3 + u))).hamiltonian
        assert pushforward_operator(linear_family, Substitution.identity()) == linear_family
        assert pushforward_operator(minus, Substitution.identity()) == minus
        st["detail"] = f"leading after u = I*v: {out.leading}"


def test_criterion_7_property_suites():
    with criterion(7, "property suites", 60) as st:
        rng = random.Random(2024)
        for _ in range(200):
            T = random_diff_function(rng, max_order=3)
            assert euler_operator(total_derivative(T)).is_zero()
        for _ in range(100):
            T = random_diff_function(rng, max_order=2, terms=2)
            J = frechet_derivative(euler_operator(T))
            diff = adjoint(J) - J
            assert all(zero_test(c, tol=1e-9).is_zero for c in diff.coeffs.values())
        for _ in range(30):
            A = DiffOp({k: random_diff_function(rng, 1, terms=2) for k in range(rng.randint(0, 3) + 1)})
            B = DiffOp({k: random_diff_function(rng, 1, terms=2) for k in range(rng.randint(0, 3) + 1)})
            assert adjoint(adjoint(A)) == A
            assert adjoint(compose(A, B)) == compose(adjoint(B), adjoint(A))
        fifth = [
            FamilySpec(Family.VODOVA5, alpha=E.ZERO, beta=E.ZERO),
            FamilySpec(Family.VODOVA5, sign=-1, alpha=E.ZERO, beta=E.ZERO),
            FamilySpec(Family.VODOVA5, alpha=q(1, 2), beta=q(-1)),
            FamilySpec(Family.VODOVA5, alpha=sin_u, beta=sin_u + u),
        ] + [spec for _, spec in COOKE_CASES]
        levels = [level(build(s)) for s in fifth]
        assert all(m in (5, 6, 7) for m in levels)
        st["detail"] = f"levels {levels}"


def test_criterion_8_negative_control():
    with criterion(8, "negative control", 60) as st:
        obstructions = oracles.jacobi_obstructions(oracles.negative_control)
        assert any(o != 0 for o in obstructions), "independent expansion says the residual vanishes"
        op = DiffOp.D(3) + from_symmetrized([(u ** 2, 1)])
        rep = is_hamiltonian(op)
        assert rep.skew_adjoint
        assert rep.jacobi.kind is ZeroKind.NONZERO
        assert rep.witness is not None
        st["detail"] = f"witness |value| = {rep.witness['|value|']:.3g}"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
