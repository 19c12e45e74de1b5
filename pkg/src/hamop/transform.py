"""Point and special contact changes of variables ``x = phi, u = psi``.

The new coordinates ``(y, v, v_k)`` reuse the ``(x, u, u_k)`` atoms, so
``phi`` and ``psi`` are ordinary expressions and the transformed operator
is again an operator in the jet coordinates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import sympy as sp

from . import expr as E
from .diffop import DiffOp, compose
from .expr import Expr
from .jetcalc import NEG_INFINITY, diff_order, is_translation_invariant
from .probe import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS, ZeroKind, zero_test
from .scalar import GaussQ, is_exact
from .symbridge import QuadratureError, from_sympy, integrate_u, to_sympy

__all__ = [
    "Kind",
    "Substitution",
    "TransformError",
    "SpecialContactReport",
    "is_special_contact",
    "k_operator",
    "pushforward_operator",
    "normalize_leading_coefficient",
    "NormalizationResult",
]

Y = E.X
V = E.U(0)


class TransformError(ValueError):
    pass


class Kind(str, enum.Enum):
    POINT = "POINT"
    SPECIAL_CONTACT = "SPECIAL_CONTACT"
    GENERAL = "GENERAL"


def _max_jet(e: Expr) -> int:
    return max(e.max_jet_order(), 0)


@dataclass(frozen=True)
class SpecialContactReport:
    is_special: bool
    rho: Expr | None
    failed_condition: str = ""
    caveat: str = ""

    def as_dict(self) -> dict:
        d = {"is_special": self.is_special}
        if self.rho is not None:
            d["rho"] = self.rho.to_str()
        if self.failed_condition:
            d["failed_condition"] = self.failed_condition
        if self.caveat:
            d["caveat"] = self.caveat
        return d


class Substitution:
    """``x = phi(y, v, v_1, ...)``, ``u = psi(y, v, v_1, ...)``."""

    __slots__ = ("phi", "psi", "_kind", "_report")

    def __init__(self, phi=None, psi=None):
        self.phi = Y if phi is None else (phi if isinstance(phi, Expr) else E.const(phi))
        self.psi = V if psi is None else (psi if isinstance(psi, Expr) else E.const(psi))
        for e in (self.phi, self.psi):
            for a in e.free_atoms():
                if E.atom_key(a)[0] in ("w", "f"):
                    raise TransformError("substitutions may not contain test functions or unknown functions")
        self._kind = None
        self._report = None

    @classmethod
    def identity(cls) -> "Substitution":
        return cls(Y, V)

    @property
    def m(self) -> int:
        return _max_jet(self.phi)

    @property
    def n(self) -> int:
        return _max_jet(self.psi)

    @property
    def kind(self) -> Kind:
        if self._kind is None:
            if self.m == 0 and self.n == 0:
                self._kind = Kind.POINT
            elif self.report().is_special:
                self._kind = Kind.SPECIAL_CONTACT
            else:
                self._kind = Kind.GENERAL
        return self._kind

    def report(self, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
               seed: int = DEFAULT_SEED) -> SpecialContactReport:
        if self._report is None:
            self._report = is_special_contact(self, trials, tol, seed)
        return self._report

    def then(self, other: "Substitution") -> "Substitution":
        """Pushing forward along ``self`` then ``other`` equals pushing along the result."""
        bind = {Y: other.phi, V: other.psi}
        for k in range(1, max(self.m, self.n) + 1):
            bind[E.U(k)] = _transformed_jets(other, k)[k]
        return Substitution(E.substitute(self.phi, bind), E.substitute(self.psi, bind))

    def __eq__(self, other):
        return isinstance(other, Substitution) and self.phi == other.phi and self.psi == other.psi

    def __hash__(self):
        return hash((self.phi, self.psi))

    def __repr__(self):
        return f"Substitution(x = {self.phi}, u = {self.psi})"


def _dy(e: Expr) -> Expr:
    return E.total_derivative(e)


def is_special_contact(s: Substitution, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                       seed: int = DEFAULT_SEED) -> SpecialContactReport:
    """Check ``x = y + w(v, v_1)``, ``u = psi(v, v_1)``, tangency, and ``rho != 0``."""
    w = s.phi - Y
    if not E.diff_partial(w, Y).is_zero():
        return SpecialContactReport(False, None, "phi - y depends on y")
    if not E.diff_partial(s.psi, Y).is_zero():
        return SpecialContactReport(False, None, "psi depends on y")
    if s.m > 1 or s.n > 1:
        return SpecialContactReport(False, None, "phi or psi depends on v_2 or higher")
    v1 = E.U(1)
    dphi, dpsi = _dy(s.phi), _dy(s.psi)
    tangency = E.diff_partial(s.phi, v1) * dpsi - E.diff_partial(s.psi, v1) * dphi
    if not tangency.is_zero():
        return SpecialContactReport(False, None, f"tangency identity fails: {tangency} != 0")
    if dphi.is_zero():
        return SpecialContactReport(False, None, "D_y(phi) vanishes identically")
    rho = E.diff_partial(s.psi, V) - E.diff_partial(s.phi, V) * dpsi / dphi
    v = zero_test(rho, trials, tol, seed)
    if v.is_zero:
        return SpecialContactReport(False, rho, "rho vanishes identically")
    caveat = "" if rho.constant_value() is not None else f"rho != 0 checked at {v.trials} sample points only"
    return SpecialContactReport(True, rho, "", caveat)


def k_operator(s: Substitution) -> DiffOp:
    """``K = sum_i (-D_y)^i o (dpsi/dv_i D_y phi - dphi/dv_i D_y psi)``."""
    dphi, dpsi = _dy(s.phi), _dy(s.psi)
    acc = DiffOp()
    for i in range(max(s.m, s.n) + 1):
        vi = E.U(i)
        q = E.diff_partial(s.psi, vi) * dphi - E.diff_partial(s.phi, vi) * dpsi
        if q.is_zero():
            continue
        term = compose(DiffOp.D(i), DiffOp.mult(q)) if i else DiffOp.mult(q)
        acc = acc + term if i % 2 == 0 else acc - term
    return acc


def _transformed_jets(s: Substitution, n: int) -> list:
    """``[psi, L psi, ..., L^n psi]`` with ``L = (D_y phi)^-1 D_y``."""
    inv = _dy(s.phi).inverse()
    out = [s.psi]
    for _ in range(n):
        out.append(inv * _dy(out[-1]))
    return out


def pushforward_operator(op: DiffOp, s: Substitution, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                         seed: int = DEFAULT_SEED) -> DiffOp:
    """The operator in the new coordinates, solved from the transformation law with ``K`` a multiplier."""
    if s.kind is Kind.GENERAL:
        raise TransformError("only point and special contact substitutions are supported: "
                             "a general differential substitution may produce nonlocal terms")
    if op.is_zero():
        return op
    K = k_operator(s)
    if K.order != 0:
        raise TransformError("K is not a multiplication operator for this substitution")
    kappa = K.coeff(0)
    if zero_test(kappa, trials, tol, seed).is_zero:
        raise TransformError("K vanishes identically")
    dphi = _dy(s.phi)
    if dphi.is_zero():
        raise TransformError("D_y(phi) vanishes identically")
    top = max(max((p.max_jet_order() for p in op.coeffs.values()), default=0), 0)
    jets = _transformed_jets(s, top)
    bind = {E.X: s.phi}
    for j, e in enumerate(jets):
        bind[E.U(j)] = e
    L = compose(DiffOp.mult(dphi.inverse()), DiffOp.D(1))
    powers = [DiffOp.mult(E.ONE)]
    for _ in range(op.order):
        powers.append(compose(L, powers[-1]))
    bar = DiffOp()
    for k, p in op.coeffs.items():
        bar = bar + compose(DiffOp.mult(E.substitute(p, bind)), powers[k])
    kinv = DiffOp.mult(kappa.inverse())
    return compose(compose(DiffOp.mult(kappa.inverse() * dphi), bar), kinv)


# ---------------------------------------------------------------------------
# leading-coefficient normalization (point branches)


@dataclass(frozen=True)
class NormalizationResult:
    substitution: Substitution
    operator: DiffOp
    target: str
    steps: tuple = ()

    def as_dict(self) -> dict:
        return {
            "substitution": {"x": self.substitution.phi.to_str(), "u": self.substitution.psi.to_str()},
            "target": self.target,
            "leading": self.operator.leading.to_str(),
            "steps": list(self.steps),
        }


def _real_sign(c: Expr):
    """Sign of a real constant or of a function of u sampled at a point, else None."""
    v = c.constant_value()
    if v is None:
        try:
            z = complex(E.evaluate(E.substitute(c, {V: E.const(E.mpq(3, 2))}), E.JetPoint({})))
        except (E.EvaluationError, ZeroDivisionError, KeyError):
            return None
    elif isinstance(v, GaussQ):
        return None
    else:
        z = complex(v)
    if abs(z.imag) > 1e-12 * max(1.0, abs(z)) or z.real == 0:
        return None
    return 1 if z.real > 0 else -1


def _const_root(c: Expr, k: int) -> Expr:
    """Positive real ``c^(1/k)`` for a positive constant ``c``."""
    v = c.constant_value()
    if is_exact(v) and not isinstance(v, GaussQ):
        n, d = int(v.numerator), int(v.denominator)
        rn, rd = round(n ** (1.0 / k)), round(d ** (1.0 / k))
        for a in (rn - 1, rn, rn + 1):
            for b in (rd - 1, rd, rd + 1):
                if a > 0 and b > 0 and a ** k == n and b ** k == d:
                    return E.const(E.mpq(a, b))
        if k % 2 == 0:
            inner = _const_root(c, k // 2)
            if inner.is_constant() and not inner.has_kernels():
                return E.kernel("sqrt", inner)
        return E.kernel("exp", E.kernel("ln", c) / k)
    return E.const(complex(v).real ** (1.0 / k))


def _solve_autonomous(rate: Expr, what: str) -> Expr:
    """Solve ``Psi'(v) = rate(Psi)`` with ``Psi(0) = 0`` through ``v = int dPsi / rate``."""
    us, vs = sp.Symbol("u"), sp.Symbol("v_new")
    try:
        G = sp.integrate(1 / to_sympy(rate), us)
    except (QuadratureError, ValueError, TypeError, NotImplementedError) as exc:
        raise QuadratureError(f"{what}: {exc}") from exc
    if G.has(sp.Integral):
        raise QuadratureError(f"{what}: no closed-form antiderivative")
    G0 = G.subs(us, 0)
    sols = sp.solve(sp.Eq(G - G0, vs), us)
    if not sols:
        raise QuadratureError(f"{what}: cannot invert the antiderivative")
    expr = min(sols, key=lambda s: _branch_rank(s, vs)).subs(vs, sp.Symbol("u"))
    try:
        return from_sympy(expr)
    except QuadratureError as exc:
        raise QuadratureError(f"{what}: {exc}") from exc


def _branch_rank(sol, vs) -> tuple:
    """Prefer real, increasing branches of the inverted antiderivative."""
    try:
        z = complex(sp.diff(sol, vs).subs(vs, sp.Rational(1, 2)).evalf())
    except (TypeError, ValueError):
        return (3, 0)
    if abs(z.imag) > 1e-12:
        return (2, sp.count_ops(sol))
    return (0 if z.real > 0 else 1, sp.count_ops(sol))


def _scale_branch(p5: Expr):
    """Order-zero leading coefficient: ``Psi'^2 = s p5(Psi)``."""
    s = _real_sign(p5)
    if s is None:
        raise QuadratureError("cannot determine the sign of the leading coefficient; "
                              f"solve (Psi')^2 = +-({p5})(Psi) for Psi(v)")
    target = "+1" if s > 0 else "-1"
    g = s * p5
    if g.is_constant():
        psi = _const_root(g, 2) * V
    else:
        rate = E.kernel("sqrt", g)
        psi = _solve_autonomous(rate, f"solve Psi' = sqrt({g})(Psi) for Psi(v)")
    return Substitution(Y, psi), target


def _u4_branch(c4: Expr):
    """Leading ``s/(alpha u_1)^4``: ``Psi' = (s c4)^(-1/6)(Psi)``."""
    s = _real_sign(c4)
    if s is None:
        raise QuadratureError(f"cannot determine the sign of {c4}")
    target = "+1/u_1^4" if s > 0 else "-1/u_1^4"
    g = s * c4
    if g.is_constant():
        psi = _const_root(g, 6).inverse() * V
    else:
        rate = E.kernel("exp", E.kernel("ln", g) * E.const(E.mpq(-1, 6)))
        psi = _solve_autonomous(rate, f"solve Psi' = ({g})^(-1/6)(Psi) for Psi(v)")
    return Substitution(Y, psi), target


def _is_target(lead: Expr, trials, tol, seed) -> str | None:
    u1 = E.U(1)
    for val, name in ((1, "+1"), (-1, "-1")):
        if zero_test(lead - val, trials, tol, seed).is_zero:
            return name
        if zero_test(lead * u1 ** 4 - val, trials, tol, seed).is_zero:
            return name + "/u_1^4"
    return None


def normalize_leading_coefficient(op: DiffOp, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                                  seed: int = DEFAULT_SEED) -> NormalizationResult:
    """Point substitution bringing a fifth-order leading coefficient to ``+-1`` or ``+-1/u_1^4``.

    Raises ``NotImplementedError`` when the leading coefficient needs a
    genuine contact transformation and :class:`QuadratureError` when the
    required quadrature has no closed form (the message carries the ODE).
    """
    if op.order != 5:
        raise TransformError("operator must be fifth order")
    if not is_translation_invariant(op):
        raise TransformError("operator must be translation-invariant")
    lead = op.leading
    hit = _is_target(lead, trials, tol, seed)
    if hit is not None:
        return NormalizationResult(Substitution.identity(), op, hit, ("already normalized",))
    order = diff_order(lead)
    if order != NEG_INFINITY and order > 1:
        raise NotImplementedError("leading coefficient depends on u_2 or higher; "
                                  "a genuine contact transformation is required")
    steps = []
    if order == 1:
        u1 = E.U(1)
        g = lead.inverse()
        coeffs = g.coefficients_in([E._resolve_var(u1)])
        if g.den or any(k[0] < 0 or k[0] > 4 for k in coeffs):
            raise NotImplementedError("leading coefficient is not of the form +-1/(a(u) u_1 + b(u))^4")
        c = [coeffs.get((k,), E.ZERO) for k in range(5)]
        if any(not _free_of_jets(x) for x in c):
            raise NotImplementedError("leading coefficient is not of the form +-1/(a(u) u_1 + b(u))^4")
        if c[0].is_zero():
            if any(not x.is_zero() for x in c[1:4]):
                raise NotImplementedError("leading coefficient is not of the form +-1/(a(u) u_1)^4")
            sub, target = _u4_branch(c[4])
            steps.append(f"u = Psi(v) with Psi' = ({c[4]})^(-1/6)")
        else:
            ratio = c[1] / (4 * c[0])
            if not (g - c[0] * (1 + ratio * u1) ** 4).is_zero():
                raise NotImplementedError("leading coefficient is not of the form +-1/(a(u) u_1 + b(u))^4")
            W = integrate_u(-ratio)
            shift = Substitution(Y + W, V)
            steps.append(f"x = y + W(v) with W' = {-ratio}")
            mid = pushforward_operator(op, shift, trials, tol, seed)
            scale, target = _scale_branch(mid.leading)
            steps.append(f"u = Psi(v) with Psi'^2 = +-({mid.leading})(Psi)")
            sub = shift.then(scale)
    else:
        sub, target = _scale_branch(lead)
        steps.append(f"u = Psi(v) with Psi'^2 = +-({lead})(Psi)")
    out = pushforward_operator(op, sub, trials, tol, seed)
    got = _is_target(out.leading, trials, tol, seed)
    if got is None:
        raise TransformError(f"normalization failed: leading coefficient became {out.leading}")
    return NormalizationResult(sub, out, got, tuple(steps))


def _free_of_jets(e: Expr) -> bool:
    for a in e.free_atoms():
        key = E.atom_key(a)
        if key[0] == "x" or (key[0] == "u" and key[1] > 0) or key[0] in ("w", "f"):
            return False
    return True
