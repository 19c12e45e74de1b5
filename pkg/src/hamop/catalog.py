"""Classified low-order Hamiltonian operator families.

Third order: the conjugated form with ``S`` (``mokhov3-conjugated``),
``+-[D^3 + 2AuD + Au_1]`` (``mokhov3-linear``), ``+-[D^3 + AD]``
(``mokhov3-const``).  Fifth order: leading coefficient 1 (``cooke5``) and
leading coefficient ``+-1/u_1^4`` (``vodova5``).  Fifth-order operators are
written ``aD^5 + D^5 o a + bD^3 + D^3 o b + cD + D o c``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace

from . import expr as E
from .diffop import DiffOp, HamiltonianReport, compose, from_symmetrized, is_hamiltonian
from .expr import Expr
from .parser import parse
from .probe import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS, ZeroVerdict, zero_test

__all__ = [
    "Family",
    "FamilySpec",
    "FamilyError",
    "build",
    "verify_family_hamiltonian",
    "schwarzian_s",
    "lemma3_coefficients",
    "cooke5_coefficients",
    "RELATIONS",
    "RelationResult",
    "verify_lemma3_relations",
    "lemma3_consistency",
]


class FamilyError(ValueError):
    """Invalid family parameters."""


class Family(str, enum.Enum):
    MOKHOV3_CONJUGATED = "mokhov3-conjugated"
    MOKHOV3_LINEAR = "mokhov3-linear"
    MOKHOV3_CONST = "mokhov3-const"
    COOKE5_UNIT = "cooke5"
    VODOVA5 = "vodova5"


@dataclass(frozen=True)
class FamilySpec:
    """Family tag, sign and parameters.

    ``f`` is used by the conjugated third-order form, ``A`` by the linear
    and constant ones, ``alpha``/``beta`` (functions of u) by ``vodova5``.
    ``cooke5`` takes ``alpha, beta, gamma`` (functions of x) or ``beta, rho``
    with ``gamma`` derived; with ``quasiconstant=True`` it takes ``b, c``
    (functions of x) instead.
    """

    family: Family
    sign: int = 1
    f: Expr | None = None
    A: Expr | None = None
    alpha: Expr | None = None
    beta: Expr | None = None
    gamma: Expr | None = None
    rho: Expr | None = None
    quasiconstant: bool = False
    b: Expr | None = None
    c: Expr | None = None

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise FamilyError("sign must be +1 or -1")
        object.__setattr__(self, "family", Family(self.family))
        for name in ("f", "A", "alpha", "beta", "gamma", "rho", "b", "c"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, Expr):
                object.__setattr__(self, name, E.const(v))


def _free_of(e: Expr, allowed: set) -> bool:
    """True if ``e`` depends on no jet/x atoms beyond ``allowed`` (tags 'x' or u-orders)."""
    for a in e.free_atoms():
        key = E.atom_key(a)
        if key[0] == "x" and "x" not in allowed:
            return False
        if key[0] == "u" and key[1] not in allowed:
            return False
        if key[0] in ("w", "f"):
            return False
    return True


def _require(e: Expr | None, name: str, allowed: set, default=None) -> Expr:
    if e is None:
        if default is None:
            raise FamilyError(f"parameter {name} is required")
        return default
    if not _free_of(e, allowed):
        var = "x" if "x" in allowed else ("u" if allowed else "no variables")
        raise FamilyError(f"parameter {name} must depend on {var} only")
    return e


def schwarzian_s() -> Expr:
    u1, u2, u3 = E.U(1), E.U(2), E.U(3)
    return u3 / u1 - E.const(E.mpq(3, 2)) * u2 ** 2 / u1 ** 2


def _du(e: Expr, k: int = 1) -> Expr:
    for _ in range(k):
        e = E.diff_partial(e, E.U(0))
    return e


def _dx(e: Expr, k: int = 1) -> Expr:
    for _ in range(k):
        e = E.diff_partial(e, E.X)
    return e


def lemma3_coefficients(alpha, beta, sign: int = 1):
    """``(a, b, c)`` of the ``+-1/u_1^4`` family for ``alpha(u), beta(u)``."""
    alpha = _require(E.const(alpha) if not isinstance(alpha, Expr) else alpha, "alpha", {0})
    beta = _require(E.const(beta) if not isinstance(beta, Expr) else beta, "beta", {0})
    u1, u2, u3, u4, u5 = (E.U(k) for k in range(1, 6))
    s = sign
    a = E.const(s) / (2 * u1 ** 4)
    b = (s * 10 * u3 * u1 - s * 55 * u2 ** 2 + 2 * alpha * u1 ** 4) / (2 * u1 ** 6)
    c = (3 * u1 ** 6 * u2 * _du(alpha) + 2 * u1 ** 5 * u3 * alpha - 6 * u1 ** 4 * u2 ** 2 * alpha
         + beta * u1 ** 8
         + s * (-3 * u1 ** 3 * u5 + 65 * u1 ** 2 * u2 * u4 + 50 * u1 ** 2 * u3 ** 2
                - 615 * u1 * u2 ** 2 * u3 + 735 * u2 ** 4)) / u1 ** 8
    return a, b, c


def cooke_gamma(beta: Expr, rho: Expr) -> Expr:
    """``gamma = -rho/beta^2 - beta''/(2 beta) + beta'^2/(4 beta^2)``."""
    b1, b2 = _dx(beta), _dx(beta, 2)
    return -rho / beta ** 2 - b2 / (2 * beta) + b1 ** 2 / (4 * beta ** 2)


def _cooke_params(spec: FamilySpec):
    alpha = _require(spec.alpha, "alpha", {"x"}, E.ZERO)
    beta = _require(spec.beta, "beta", {"x"}, E.ZERO)
    gamma = spec.gamma
    if spec.rho is not None:
        rho = _require(spec.rho, "rho", set())
        if beta.is_zero():
            raise FamilyError("rho only applies when beta is nonzero")
        derived = cooke_gamma(beta, rho)
        if gamma is not None and not (gamma - derived).is_zero():
            raise FamilyError("gamma conflicts with the value derived from beta and rho")
        gamma = derived
    elif gamma is None:
        if not beta.is_zero():
            raise FamilyError("beta nonzero requires rho (gamma is derived from it)")
        gamma = E.ZERO
    else:
        gamma = _require(gamma, "gamma", {"x"})
        if not beta.is_zero():
            # gamma must match the derived form for some constant rho
            rho = -beta ** 2 * (gamma + _dx(beta, 2) / (2 * beta) - _dx(beta) ** 2 / (4 * beta ** 2))
            if not _dx(rho).is_zero():
                raise FamilyError("gamma violates the constraint imposed by nonzero beta")
    return alpha, beta, gamma


def cooke5_coefficients(spec: FamilySpec):
    """``(b, c)`` of the leading-coefficient-1 family."""
    if spec.quasiconstant:
        b = _require(spec.b, "b", {"x"}, E.ZERO)
        c = _require(spec.c, "c", {"x"}, E.ZERO)
        return b, c
    alpha, beta, gamma = _cooke_params(spec)
    u = E.U(0)
    z = u + alpha
    w = beta * z + gamma
    zs = [z]
    for _ in range(4):
        zs.append(E.total_derivative(zs[-1]))
    w1 = E.total_derivative(w)
    z0, z1, z2, z3, z4 = zs
    q = E.const
    b = (q(E.mpq(3, 2)) * (E.U(2) + _dx(alpha, 2)) / z
         - q(E.mpq(7, 4)) * (E.U(1) + _dx(alpha)) ** 2 / z ** 2 + beta * z + gamma)
    c = (-z4 / z + beta * z1 ** 2 / (2 * z) + w * z2 / (2 * z) - w * z1 ** 2 / (4 * z ** 2)
         - w1 * z1 / z + 9 * z1 * z3 / (2 * z ** 2) - 129 * z1 ** 2 * z2 / (8 * z ** 3)
         + 273 * z1 ** 4 / (32 * z ** 4) + 33 * z2 ** 2 / (8 * z ** 2) - beta * z2 / 2
         - 3 * z * _dx(beta, 2) / 2 - _dx(beta) * z1 / 2 - beta ** 2 * z ** 2 / 2 + w ** 2 / 2)
    return b, c


def build(spec: FamilySpec) -> DiffOp:
    """The family member in normal form."""
    s = spec.sign
    fam = spec.family
    if fam is Family.MOKHOV3_CONJUGATED:
        f = _require(spec.f, "f", {0}, E.ZERO)
        inv = DiffOp.mult(E.U(1).inverse())
        core = DiffOp.D(3) + from_symmetrized([(schwarzian_s(), 1)])
        op = compose(compose(inv, core), inv)
        return s * op + from_symmetrized([(f, 1)])
    if fam is Family.MOKHOV3_LINEAR:
        A = _require(spec.A, "A", set())
        val = A.constant_value()
        if val is None or isinstance(val, E.GaussQ) or complex(val).imag != 0 or complex(val).real <= 0:
            raise FamilyError("A must be a positive constant")
        return s * (DiffOp.D(3) + from_symmetrized([(A * E.U(0), 1)]))
    if fam is Family.MOKHOV3_CONST:
        A = _require(spec.A, "A", set(), E.ZERO)
        return s * (DiffOp.D(3) + DiffOp({1: A}))
    if fam is Family.COOKE5_UNIT:
        b, c = cooke5_coefficients(spec)
        return s * (DiffOp.D(5) + from_symmetrized([(b, 3), (c, 1)]))
    if fam is Family.VODOVA5:
        a, b, c = lemma3_coefficients(_require(spec.alpha, "alpha", {0}, E.ZERO),
                                      _require(spec.beta, "beta", {0}, E.ZERO), s)
        return from_symmetrized([(a, 5), (b, 3), (c, 1)])
    raise FamilyError(f"unknown family {fam}")  # pragma: no cover


def verify_family_hamiltonian(spec: FamilySpec, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                              seed: int = DEFAULT_SEED) -> HamiltonianReport:
    return is_hamiltonian(build(spec), trials, tol, seed)


# ---------------------------------------------------------------------------
# relation system for the 1/u_1^4 family, stated for leading coefficient
# +1/u_1^4.  Names: b, c, b_u2 (= db/du_2), b_u2_u (= d^2 b/du_2 du), ...;
# Dx, Dx2, Dx3, Dx4 are iterated total derivatives.

RELATIONS: tuple = (
    (9, "c_u6 = 0"),
    (10, "b_u4 = 0"),
    (11, "c_u5 = -3/u_1^5"),
    (12, "b_u3 = 5/u_1^5"),
    (13, "c_u4 = 1/(3*u_1^6)*(85*u_2 - 2*b_u2*u_1^6)"),
    (14, "c_u3 = 1/(3*u_1^7)*(-16*b_u2*u_1^6*u_2 - 225*u_1*u_3 - 9*Dx(b_u2)*u_1^7"
         " + 410*u_2^2 + 6*b*u_1^6)"),
    (15, "b_u1 = 1/(3*u_1^7)*(26*b_u2*u_1^6*u_2 + 340*u_1*u_3 + 7*Dx(b_u2)*u_1^7"
         " - 550*u_2^2 - 6*b*u_1^6)"),
    (16, "c_u2 = 1/(6*u_1^8)*(-3*b_u*u_1^8 + 140*b_u2*u_1^6*u_2^2 + 80*b*u_1^6*u_2"
         " + 11390*u_1*u_2*u_3 - 96*b_u2*u_1^7*u_3 - 14260*u_2^3 - 27*Dx2(b_u2)*u_1^8"
         " + 21*Dx(b)*u_1^7 - 1200*u_1^2*u_4 + 2*b_u2*b*u_1^12 - 82*Dx(b_u2)*u_1^7*u_2)"),
    (17, "c_u1 = 1/(6*u_1^9)*(18*b_u*u_1^8*u_2 - 42*Dx(b_u2)*u_1^7*u_2^2"
         " + 416*b_u2*u_1^6*u_2^3 - 271*Dx(b)*u_1^7*u_2 - 856*b*u_1^6*u_2^2"
         " + 80*b*u_1^7*u_3 + 14730*u_1^2*u_2*u_4 - 214*Dx(b_u2)*u_1^8*u_3"
         " - 68*b_u2*u_1^8*u_4 - 136*Dx2(b_u2)*u_1^8*u_2 + 2*Dx(b_u2)*b*u_1^13"
         " - 4*b_u2*Dx(b)*u_1^13 - 92450*u_1*u_2^2*u_3 - 1080*u_1^3*u_5"
         " - 21*Dx3(b_u2)*u_1^9 + 3*Dx2(b)*u_1^8 + 7610*u_1^2*u_3^2 - 3*Dx(b_u)*u_1^9"
         " - 404*b_u2*u_1^7*u_2*u_3 - 4*b_u2*b*u_1^12*u_2 + 87920*u_2^4)"),
    (18, "c_u = 1/(6*u_1^10)*(-21*Dx4(b_u2)*u_1^10 + 9*Dx2(b_u)*u_1^10"
         " + 28410*u_1^3*u_3*u_4 + 15730*u_1^3*u_2*u_5 - 66*Dx2(b)*u_1^8*u_2"
         " - 608*Dx(b)*u_1^7*u_2^2 - 717*Dx(b)*u_1^8*u_3 - 13280*b*u_1^6*u_2^3"
         " - 660*b*u_1^8*u_4 - 205510*u_1^2*u_2*u_3^2 - 139340*u_1^2*u_2^2*u_4"
         " + 838900*u_1*u_2^3*u_3 - 80*Dx(b)*b_u2*u_1^13*u_2 - 1416*b_u2*u_1^7*u_2^2*u_3"
         " - 2062*Dx(b_u2)*u_1^8*u_2*u_3 - 464*b_u2*b*u_1^12*u_2^2 - 32*b_u2*b*u_1^13*u_3"
         " - 120*Dx(b_u2)*b*u_1^13*u_2 - 744*b_u2*u_1^8*u_2*u_4 - 673120*u_2^5"
         " + 440*c*u_1^8*u_2 - 6*Dx(b)*b*u_1^13 - 232*b^2*u_1^12*u_2 - 1092*u_1^4*u_6"
         " - 9*Dx3(b)*u_1^9 + 6*Dx(c)*u_1^9"
         " - 252*Dx3(b_u2)*u_1^9*u_2 - 956*Dx2(b_u2)*u_1^8*u_2^2 - 408*Dx2(b_u2)*u_1^9*u_3"
         " + 8*c*b_u2*u_1^14 + 6*b_u*b*u_1^14 - 4*b^2*b_u2*u_1^18"
         " - 1304*Dx(b_u2)*u_1^7*u_2^3 - 282*Dx(b_u2)*u_1^9*u_4 - 2200*b_u2*u_1^6*u_2^4"
         " - 68*b_u2*u_1^9*u_5 + 66*Dx(b_u)*u_1^9*u_2 + 192*b_u*u_1^8*u_2^2"
         " + 12*b_u*u_1^9*u_3 - 12*Dx2(b_u2)*b*u_1^14 - 12*Dx(b_u2)*Dx(b)*u_1^14"
         " - 708*b_u2*u_1^8*u_3^2 + 3124*b*u_1^7*u_2*u_3)"),
    (19, "0 = 1197*u_1^8*b_u2_u + 252*u_1^9*b_u2_u1_u + 2034*b*u_1^6"
         " + 378*u_1^10*b_u2_u2_u_u - 71865*u_3*u_1 + 27*u_1^7*b_u1"
         " + 16*u_1^12*b_u2^2 + 756*u_1^8*u_2*u_3*b_u2_u2_u2_u1 + 392590*u_2^2"
         " + 2268*u_1^7*u_2*u_3*b_u2_u2_u2 + 378*u_1^8*u_2^2*b_u2_u2_u1_u1"
         " + 36*b*u_1^12*b_u2_u2 + 2868*u_1^6*u_2^2*b_u2_u2 + 756*u_1^9*u_3*b_u2_u2_u2_u"
         " + 3926*u_1^6*u_2*b_u2 + 756*u_1^9*u_2*b_u2_u2_u1_u"
         " + 378*u_1^8*u_3^2*b_u2_u2_u2_u2 + 630*u_1^8*u_3*b_u2_u2_u1"
         " + 252*u_1^8*u_2*b_u2_u1_u1 + 1929*u_1^7*u_2*b_u2_u1"
         " + 2268*u_1^7*u_2^2*b_u2_u2_u1 + 2646*u_1^8*u_2*b_u2_u2_u"
         " + 2466*u_1^7*u_3*b_u2_u2 + 378*u_1^8*u_4*b_u2_u2_u2"),
)

_PARTIAL_RE = re.compile(r"^([bc])((?:_u\d*)+)$")


def _relation_namespace(b: Expr, c: Expr):
    base = {"b": b, "c": c}
    cache: dict = {}

    def lookup(name: str):
        if name in base:
            return base[name]
        m = _PARTIAL_RE.match(name)
        if not m:
            return None
        hit = cache.get(name)
        if hit is None:
            hit = base[m.group(1)]
            for var in m.group(2).split("_")[1:]:
                hit = E.diff_partial(hit, E.U(int(var[1:] or 0)))
            cache[name] = hit
        return hit

    return lookup


def _dxn(n: int):
    def f(e: Expr) -> Expr:
        for _ in range(n):
            e = E.total_derivative(e)
        return e
    return f


_FUNCS = {"Dx": _dxn(1), "Dx2": _dxn(2), "Dx3": _dxn(3), "Dx4": _dxn(4)}


def relation_residual(text: str, b: Expr, c: Expr) -> Expr:
    lhs, rhs = text.split("=")
    ns = _relation_namespace(b, c)
    return parse(lhs, namespace=ns, functions=_FUNCS) - parse(rhs, namespace=ns, functions=_FUNCS)


@dataclass(frozen=True)
class RelationResult:
    index: int
    verdict: ZeroVerdict

    @property
    def holds(self) -> bool:
        return self.verdict.is_zero


def verify_lemma3_relations(alpha, beta, sign: int = 1, trials: int = DEFAULT_TRIALS,
                            tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED) -> list:
    """Zero-test every relation on the concrete ``b, c``.

    The relations are stated for leading coefficient ``+1/u_1^4``; for the
    minus sign they are applied to the negated operator, which is the plus
    family with ``(-alpha, -beta)``.
    """
    alpha = alpha if isinstance(alpha, Expr) else E.const(alpha)
    beta = beta if isinstance(beta, Expr) else E.const(beta)
    if sign == -1:
        alpha, beta = -alpha, -beta
    _, b, c = lemma3_coefficients(alpha, beta, 1)
    return [RelationResult(idx, zero_test(relation_residual(text, b, c), trials, tol, seed))
            for idx, text in RELATIONS]


def lemma3_consistency(alpha, beta, sign: int = 1, trials: int = DEFAULT_TRIALS,
                       tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED) -> dict:
    """Relations plus the Jacobi check; failing relations on a Hamiltonian operator are flagged as suspect transcriptions."""
    rels = verify_lemma3_relations(alpha, beta, sign, trials, tol, seed)
    spec = FamilySpec(Family.VODOVA5, sign, alpha=alpha, beta=beta)
    ham = verify_family_hamiltonian(spec, trials, tol, seed)
    failing = [r.index for r in rels if not r.holds]
    return {
        "relations": rels,
        "hamiltonian": ham,
        "suspect_transcriptions": failing if ham.hamiltonian else [],
        "failing": failing,
    }
