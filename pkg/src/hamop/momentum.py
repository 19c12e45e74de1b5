"""The momentum problem ``D(delta_u P) = u_1``.

Verification of candidate densities, the residual system for the ansatz
``h = h(x, u)``, the momentum ODEs, a Taylor-series ODE solver with a
numeric shooting cross-check, and the decision procedure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import factorial

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from . import expr as E
from .catalog import schwarzian_s
from .diffop import DiffOp, compose, from_symmetrized, is_hamiltonian, total_derivative_n
from .diffop import apply as apply_op
from .expr import Expr
from .jetcalc import NEG_INFINITY, diff_order, euler_operator, is_translation_invariant
from .probe import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS, ZeroVerdict, zero_test
from .scalar import GaussQ, is_exact, to_scalar
from .symbridge import QuadratureError, from_sympy, integrate_u, to_sympy

__all__ = [
    "Outcome",
    "Witness",
    "TraceStep",
    "MomentumVerdict",
    "LinearODE",
    "SeriesSolution",
    "NotHamiltonianError",
    "ShapeError",
    "SingularPointError",
    "verify_momentum_density",
    "momentum_density_verdict",
    "momentum_residual_system",
    "momentum_ode_fifth",
    "momentum_ode_third",
    "solve_ode",
    "decide_momentum",
    "prop5_elimination",
    "polynomial_momentum_search",
]

U0 = E.U(0)
U1 = E.U(1)


class NotHamiltonianError(ValueError):
    pass


class ShapeError(ValueError):
    """Operator is not in the shape a procedure requires."""


class SingularPointError(ArithmeticError):
    pass


class Outcome(str, enum.Enum):
    YES = "YES"
    NO = "NO"
    UNKNOWN = "UNKNOWN"


class Witness(str, enum.Enum):
    NOT_TRANSLATION_INVARIANT = "NOT_TRANSLATION_INVARIANT"
    PROP5_CONTRADICTION = "PROP5_CONTRADICTION"
    INCONSISTENT_SYSTEM = "INCONSISTENT_SYSTEM"


@dataclass(frozen=True)
class TraceStep:
    step: str
    description: str
    expr: Expr | None = None

    def as_dict(self) -> dict:
        d = {"step": self.step, "description": self.description}
        if self.expr is not None:
            d["expr"] = self.expr.to_str()
        return d


# ---------------------------------------------------------------------------
# ODEs


def _u_only(e: Expr) -> bool:
    for a in e.free_atoms():
        key = E.atom_key(a)
        if key[0] == "x" or key[0] in ("w", "f") or (key[0] == "u" and key[1] > 0):
            return False
    return True


def _d_u(e: Expr, k: int = 1) -> Expr:
    for _ in range(k):
        e = E.diff_partial(e, U0)
    return e


@dataclass(frozen=True)
class LinearODE:
    """``sum_k coeffs[k] * y^(k) = rhs`` in the variable u."""

    coeffs: tuple
    rhs: Expr = E.ONE
    name: str = "h"

    def __post_init__(self):
        cs = tuple(c if isinstance(c, Expr) else E.const(c) for c in self.coeffs)
        while cs and cs[-1].is_zero():
            cs = cs[:-1]
        if not cs:
            raise ValueError("leading coefficient must be nonzero")
        object.__setattr__(self, "coeffs", cs)
        if not isinstance(self.rhs, Expr):
            object.__setattr__(self, "rhs", E.const(self.rhs))
        for c in cs + (self.rhs,):
            if not _u_only(c):
                raise ValueError("ODE coefficients must depend on u only")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def residual(self, y: Expr) -> Expr:
        acc = -self.rhs
        d = y
        for c in self.coeffs:
            if not c.is_zero():
                acc = acc + c * d
            d = _d_u(d)
        return acc

    def to_str(self) -> str:
        """Rendered as ``... - rhs = 0``."""
        parts = []
        for k in range(self.order, -1, -1):
            c = self.coeffs[k]
            if not c.is_zero():
                parts.append(_signed_term(c, self.name if k == 0 else f"{self.name}^({k})"))
        if not self.rhs.is_zero():
            parts.append(_signed_term(-self.rhs, ""))
        s = " ".join(parts).lstrip("+ ")
        if s.startswith("- "):
            s = "-" + s[2:]
        return f"{s} = 0"

    __str__ = to_str

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": [c.to_str() for c in self.coeffs],
            "rhs": self.rhs.to_str(),
            "equation": self.to_str(),
        }


def _signed_term(c: Expr, y: str) -> str:
    v = c.constant_value()
    if v is not None and not isinstance(v, GaussQ) and is_exact(v):
        sign = "-" if v < 0 else "+"
        mag = E.const(abs(v)).to_str()
        if not y:
            return f"{sign} {mag}"
        return f"{sign} {y}" if mag == "1" else f"{sign} {mag}*{y}"
    body = f"({c.to_str()})"
    return f"+ {body}*{y}" if y else f"+ {body}"


def momentum_ode_fifth(alpha, beta, sign: int = 1) -> LinearODE:
    """``+-h^(5) + 2a h''' + 3a' h'' + (3a'' + 2b) h' + (a''' + b') h = 1``."""
    a = alpha if isinstance(alpha, Expr) else E.const(alpha)
    b = beta if isinstance(beta, Expr) else E.const(beta)
    if not (_u_only(a) and _u_only(b)):
        raise ValueError("alpha and beta must depend on u only")
    return LinearODE((_d_u(a, 3) + _d_u(b), 3 * _d_u(a, 2) + 2 * b, 3 * _d_u(a), 2 * a,
                      E.ZERO, E.const(sign)), E.ONE, "h")


def momentum_ode_third(f, sign: int = 1) -> LinearODE:
    """``+-p'''' + 2f p'' + f' p' = 1`` for the density ``p(u)``."""
    f = f if isinstance(f, Expr) else E.const(f)
    if not _u_only(f):
        raise ValueError("f must depend on u only")
    return LinearODE((E.ZERO, _d_u(f), 2 * f, E.ZERO, E.const(sign)), E.ONE, "p")


# ---------------------------------------------------------------------------
# series solution


def _value(e: Expr, u0):
    v = E.substitute(e, {U0: E.const(u0)})
    c = v.constant_value()
    if c is not None:
        return c
    return complex(E.evaluate(v, E.JetPoint({})))


def _taylor(e: Expr, u0, n: int) -> list:
    out = []
    d = e
    for j in range(n + 1):
        try:
            v = _value(d, u0)
        except (E.EvaluationError, ZeroDivisionError) as exc:
            raise SingularPointError(f"coefficient {e} is singular at u = {u0}") from exc
        out.append(v / factorial(j) if is_exact(v) else complex(v) / factorial(j))
        if j < n:
            d = _d_u(d)
    return out


def _clean(v):
    if is_exact(v):
        return v
    z = complex(v)
    return z


@dataclass(frozen=True)
class SeriesSolution:
    u0: object
    coeffs: tuple
    ode: LinearODE
    exact: bool
    residual_valuation: int | None
    residual_max: float
    interval: float
    shooting_max_deviation: float | None

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def polynomial(self) -> Expr:
        t = U0 - E.const(self.u0)
        acc = E.ZERO
        for m, a in enumerate(self.coeffs):
            if a != 0:
                acc = acc + E.const(a) * t ** m
        return acc

    def terminating_degree(self) -> int | None:
        """Degree of the series if its tail coefficients vanish, else None."""
        nz = [m for m, a in enumerate(self.coeffs) if a != 0]
        return nz[-1] if nz else -1

    def as_dict(self) -> dict:
        return {
            "u0": E.const(self.u0).to_str(),
            "coefficients": [E.const(a).to_str() for a in self.coeffs],
            "polynomial": self.polynomial().to_str(),
            "exact": self.exact,
            "residual_valuation": self.residual_valuation,
            "residual_max": self.residual_max,
            "interval": self.interval,
            "shooting_max_deviation": self.shooting_max_deviation,
        }


def _numeric(e: Expr):
    cache: dict = {}

    def f(u: float) -> complex:
        p = E.JetPoint({E._resolve_var(U0): complex(u)})
        return complex(E.evaluate(e, p, cache={}))

    return f


def _shoot(ode: LinearODE, u0: complex, init: list, r: float, poly: Expr, npts: int = 21):
    n = ode.order
    cf = [_numeric(c) for c in ode.coeffs]
    rf = _numeric(ode.rhs)

    def rhs(t, y):
        top = rf(t) - sum(cf[k](t) * y[k] for k in range(n))
        return np.concatenate([y[1:], [top / cf[n](t)]])

    pf = _numeric(poly)
    y0 = np.array([complex(v) for v in init], dtype=complex)
    dev = 0.0
    for end in (u0 + r, u0 - r):
        ts = np.linspace(u0, end, npts)
        sol = solve_ivp(rhs, (u0, end), y0, method="DOP853", t_eval=ts, rtol=1e-12, atol=1e-14)
        if not sol.success:
            return None
        for t, yv in zip(sol.t, sol.y[0]):
            dev = max(dev, abs(yv - pf(t)))
    return float(dev)


def solve_ode(ode: LinearODE, u0=0, init=None, N: int = 12, r: float = 0.5,
              shoot: bool = True) -> SeriesSolution:
    """Degree-``N`` Taylor solution of the initial-value problem at ``u0``.

    ``init`` lists ``y(u0), y'(u0), ..., y^(n-1)(u0)``.
    """
    n = ode.order
    init = list(init) if init is not None else [0] * n
    if len(init) != n:
        raise ValueError(f"need {n} initial values, got {len(init)}")
    if N < n - 1:
        raise ValueError("N must be at least order - 1")
    u0 = to_scalar(u0)
    gam = [_taylor(c, u0, N) for c in ode.coeffs]
    rho = _taylor(ode.rhs, u0, N)
    if gam[n][0] == 0:
        raise SingularPointError(f"leading coefficient vanishes at u = {u0}")
    a = [to_scalar(v) / factorial(i) for i, v in enumerate(init)]
    for m in range(0, N - n + 1):
        s = rho[m]
        for k in range(n + 1):
            for j in range(m + 1):
                idx = m - j + k
                if k == n and j == 0:
                    continue
                if idx >= len(a) or gam[k][j] == 0:
                    continue
                s = s - gam[k][j] * a[idx] * (factorial(idx) // factorial(m - j))
        a.append(s / (gam[n][0] * (factorial(m + n) // factorial(m))))
    exact = all(is_exact(v) for v in a) and all(is_exact(v) for g in gam for v in g)
    if not exact:
        a = [complex(v) for v in a]
        if all(abs(v.imag) == 0 for v in a):
            a = [v.real for v in a]
    coeffs = tuple(_clean(v) for v in a[:N + 1])
    sol = SeriesSolution(u0, coeffs, ode, exact, None, 0.0, r, None)
    poly = sol.polynomial()
    res = ode.residual(poly)
    valuation = None
    if res.is_zero():
        valuation = None
    else:
        tc = _taylor(res, u0, N)
        nz = [j for j, v in enumerate(tc) if abs(complex(v)) > (0 if exact else 1e-12)]
        valuation = nz[0] if nz else N + 1
    rf = _numeric(res)
    u0c = complex(u0).real
    grid = np.linspace(u0c - r, u0c + r, 41)
    rmax = 0.0 if res.is_zero() else float(max(abs(rf(t)) for t in grid))
    dev = _shoot(ode, u0c, init, r, poly) if shoot else None
    return SeriesSolution(u0, coeffs, ode, exact, valuation, rmax, r, dev)


# ---------------------------------------------------------------------------
# densities and residual systems


def momentum_density_verdict(op: DiffOp, T: Expr, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                             seed: int = DEFAULT_SEED) -> ZeroVerdict:
    return zero_test(apply_op(op, euler_operator(T)) - U1, trials, tol, seed)


def verify_momentum_density(op: DiffOp, T: Expr, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                            seed: int = DEFAULT_SEED) -> bool:
    """True iff ``op(delta_u T) = u_1``."""
    return momentum_density_verdict(op, T, trials, tol, seed).is_zero


H_NAME = "h"


def _jet_atoms_above(e: Expr, lo: int = 1) -> list:
    ks = set()
    for a in e.free_atoms():
        key = E.atom_key(a)
        if key[0] == "u" and key[1] >= lo:
            ks.add(key[1])
    return sorted(ks)


@dataclass(frozen=True)
class Equation:
    monomial: dict
    expr: Expr

    def label(self) -> str:
        if not self.monomial:
            return "1"
        return "*".join(f"u_{k}" if e == 1 else f"u_{k}^{e}" for k, e in sorted(self.monomial.items()))

    def as_dict(self) -> dict:
        return {"monomial": self.label(), "equation": f"{self.expr.to_str()} = 0"}


def momentum_residual_system(op: DiffOp, h: Expr | None = None) -> list:
    """Coefficients of ``op(h(x,u)) - u_1`` in the monomials of ``u_1, u_2, ...``."""
    if op.is_zero() or op.order > 5:
        raise ShapeError("operator order must be between 0 and 5")
    if diff_order(op.leading) > 1:
        raise ShapeError("leading coefficient must have differential order <= 1")
    h = E.func(H_NAME, ("x", "u")) if h is None else h
    R = apply_op(op, h) - U1
    for f, _ in R.den:
        for m, _ in f:
            for a, _ in m:
                key = E.atom_key(a)
                if key[0] == "u" and key[1] >= 1:
                    raise ShapeError("residual has a non-monomial denominator in the jets")
    ks = _jet_atoms_above(R)
    aids = [E._resolve_var(E.U(k)) for k in ks]
    out = []
    for key, c in sorted(R.coefficients_in(aids).items()):
        if not c.is_zero():
            out.append(Equation({k: e for k, e in zip(ks, key) if e}, c))
    return out


def _h_atoms(e: Expr) -> list:
    return [a for a in e.free_atoms() if E.atom_key(a)[0] == "f" and E.atom_key(a)[1] == H_NAME]


def _find_inconsistency(system: list):
    """If one equation forces ``h_u = 0`` and another then becomes a nonzero constant, return both."""
    hu = E.func(H_NAME, ("x", "u"), (0, 1))
    hu_id = E._resolve_var(hu)
    forcing = None
    for eq in system:
        atoms = _h_atoms(eq.expr)
        if atoms == [hu_id] and E.diff_partial(eq.expr, hu) == eq.expr / hu:
            forcing = eq
            break
    if forcing is None:
        return None
    for eq in system:
        zeroed = {}
        for a in _h_atoms(eq.expr):
            if E.atom_key(a)[3][1] >= 1:
                zeroed[a] = E.ZERO
        r = E.substitute(eq.expr, zeroed) if zeroed else eq.expr
        if r.is_constant() and not r.is_zero():
            return forcing, eq, r
    return None


def _sympy_solve_linear(rows: list, rhs: list, nvars: int):
    M = sp.Matrix(rows)
    b = sp.Matrix(rhs)
    try:
        sol, params = M.gauss_jordan_solve(b)
    except ValueError:
        return None
    sol = sol.subs({p: 0 for p in params})
    return [from_sympy(v) for v in sol]


def polynomial_momentum_search(op: DiffOp, max_degree: int = 6):
    """Find ``h = sum a_k u^k`` with ``op(h) = u_1`` exactly; returns h or None."""
    cols = []
    for k in range(max_degree + 1):
        col = apply_op(op, U0 ** k)
        if col.flt:
            return None
        cols.append(col)
    target = U1
    den = None
    for c in cols + [target]:
        if c.is_zero():
            continue
        if den is None:
            den = c.den
        elif c.den != den:
            den = "mixed"
    if den == "mixed":
        common = E.ONE
        for c in cols:
            _, d = c.numerator_denominator()
            common = common * d
        cols = [c * common for c in cols]
        target = target * common
    monos = sorted({m for c in cols + [target] for m in c.num}, key=str)
    if not monos:
        return None
    rows = [[to_sympy(E.Expr({(): c.num.get(m, 0)})) if m in c.num else 0 for c in cols] for m in monos]
    rhs = [to_sympy(E.Expr({(): target.num[m]})) if m in target.num else 0 for m in monos]
    sol = _sympy_solve_linear(rows, rhs, len(cols))
    if sol is None:
        return None
    h = E.ZERO
    for k, a in enumerate(sol):
        h = h + a * U0 ** k
    if not (apply_op(op, h) - U1).is_zero():
        return None
    return h


def _density_from_h(h: Expr) -> Expr:
    """``T`` with ``dT/du = h`` for h depending on u only."""
    if all(E.atom_key(a)[0] in ("u", "I", "p") for a in h.free_atoms()) and not h.den:
        acc = E.ZERO
        for m, c in h.num.items():
            d = dict(m)
            k = d.get(E._resolve_var(U0), 0)
            if k < 0:
                break
            acc = acc + E.Expr({m: c}) * U0 / (k + 1)
        else:
            return acc
    return integrate_u(h)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class MomentumVerdict:
    outcome: Outcome
    density: Expr | None = None
    h: Expr | None = None
    ode: LinearODE | None = None
    witness: Witness | None = None
    trace: tuple = ()
    residual: Expr | None = None
    reason: str = ""
    family: str = ""
    notes: tuple = ()

    def as_dict(self) -> dict:
        d: dict = {"outcome": self.outcome.value}
        if self.family:
            d["family"] = self.family
        if self.density is not None:
            d["density"] = self.density.to_str()
        if self.h is not None:
            d["h"] = self.h.to_str()
        if self.ode is not None:
            d["ode"] = self.ode.as_dict()
        if self.witness is not None:
            d["witness"] = self.witness.value
        if self.trace:
            d["trace"] = [s.as_dict() for s in self.trace]
        if self.residual is not None:
            d["residual"] = self.residual.to_str()
        if self.reason:
            d["reason"] = self.reason
        if self.notes:
            d["notes"] = list(self.notes)
        return d


def _const_sign(e: Expr):
    c = e.constant_value()
    if c is None or isinstance(c, GaussQ) or not is_exact(c):
        return None
    if c == 1:
        return 1
    if c == -1:
        return -1
    return None


# -- fifth order, leading +-1 -------------------------------------------------


def _integrate_kappa(kappa: Expr, f: Expr) -> Expr:
    """Solve ``H_u = kappa H`` for ``kappa`` zero or ``r/(u + a(x))``."""
    if kappa.is_zero():
        return f
    inv = kappa.inverse()
    slope = _d_u(inv)
    if not slope.is_constant():
        raise ShapeError(f"cannot integrate h_u = ({kappa}) h")
    r = slope.inverse()
    a = r * inv - U0
    if not _d_u(a).is_zero():
        raise ShapeError(f"cannot integrate h_u = ({kappa}) h")
    rv = r.constant_value()
    z = U0 + a
    if rv.denominator == 1:
        return f * z ** int(rv)
    if rv.denominator == 2:
        return f * E.kernel("sqrt", z) ** int(rv.numerator)
    raise ShapeError(f"exponent {rv} not supported")


def prop5_elimination(op: DiffOp) -> list:
    """Replay the contradiction for a fifth-order operator with leading coefficient +-1."""
    if op.order != 5 or _const_sign(op.leading) is None:
        raise ShapeError("operator must be fifth order with leading coefficient +-1")
    trace = []
    h = E.func(H_NAME, ("x", "u"))
    hu = E.func(H_NAME, ("x", "u"), (0, 1))
    R = apply_op(op, h) - U1
    e5 = E.diff_partial(R, E.U(5))
    trace.append(TraceStep("u5", "coefficient of u_5 in D(h) - u_1", e5))
    c_hu = E.diff_partial(e5, hu)
    c_h = E.diff_partial(e5, h)
    if c_hu.is_zero() or not (e5 - c_hu * hu - c_h * h).is_zero():
        raise ShapeError("u_5 coefficient is not of the form A h_u + B h")
    kappa = -c_h / c_hu
    if _jet_atoms_above(kappa) or _h_atoms(kappa):
        raise ShapeError("u_5 relation depends on higher jets")
    trace.append(TraceStep("solve_hu", "h_u = kappa h", kappa))
    f = E.func("f", ("x",))
    H = _integrate_kappa(kappa, f)
    trace.append(TraceStep("ansatz", "h(x,u) with f = f(x)", H))
    R2 = apply_op(op, H) - U1
    e3 = E.diff_partial(R2, E.U(3))
    trace.append(TraceStep("u3", "coefficient of u_3 after substituting h", e3))
    rules: dict = {}
    if not e3.is_zero():
        orders = [E.atom_key(a)[3][0] for a in e3.free_atoms()
                  if E.atom_key(a)[0] == "f" and E.atom_key(a)[1] == "f"]
        top = max(orders)
        ftop = E.func("f", ("x",), (top,))
        co = E.diff_partial(e3, ftop)
        rest = E.substitute(e3, {ftop: E.ZERO})
        if not (co * ftop + rest - e3).is_zero():
            raise ShapeError("u_3 relation is not linear in the top derivative of f")
        rule = -rest / co
        if _jet_atoms_above(rule, 0):
            raise ShapeError("u_3 relation depends on u")
        trace.append(TraceStep("f_rule", f"d^{top}f/dx^{top} expressed through lower derivatives", rule))
        rules[top] = rule
        k = top
        while k < 5 + top + 2:
            nxt = E.substitute(E.total_derivative(rules[k]), {ftop: rule})
            k += 1
            rules[k] = nxt
    R3 = E.substitute(R2, {E.func("f", ("x",), (k,)): v for k, v in rules.items()}) if rules else R2
    trace.append(TraceStep("reduce", "residual D(h) - u_1 after substitution", R3))
    final = E.diff_partial(R3, U1)
    if not final.is_constant() or final.is_zero():
        raise ShapeError("elimination did not end in a constant residual")
    trace.append(TraceStep("contradiction", f"d/du_1 of the residual is {final}, i.e. 0 = 1", final))
    return trace


# -- fifth order, leading +-1/u_1^4 -------------------------------------------


def _extract_relation_coeffs(op: DiffOp):
    """Return ``(sign, alpha, beta)`` if op matches the 1/u_1^4 family exactly."""
    u1, u2, u3, u4, u5 = (E.U(k) for k in range(1, 6))
    lead = op.coeff(5) * u1 ** 4
    s = _const_sign(lead)
    if s is None:
        return None
    a = op.coeff(5) / 2
    da = total_derivative_n(a, 4)
    b = (op.coeff(3) - 10 * da[2]) / 2
    db = total_derivative_n(b, 2)
    c = (op.coeff(1) - 5 * da[4] - 3 * db[2]) / 2
    alpha = (2 * u1 ** 6 * b - s * (10 * u3 * u1 - 55 * u2 ** 2)) / (2 * u1 ** 4)
    if not _u_only(alpha):
        return None
    beta = (u1 ** 8 * c - (3 * u1 ** 6 * u2 * _d_u(alpha) + 2 * u1 ** 5 * u3 * alpha
                           - 6 * u1 ** 4 * u2 ** 2 * alpha)
            - s * (-3 * u1 ** 3 * u5 + 65 * u1 ** 2 * u2 * u4 + 50 * u1 ** 2 * u3 ** 2
                   - 615 * u1 * u2 ** 2 * u3 + 735 * u2 ** 4)) / u1 ** 8
    if not _u_only(beta):
        return None
    rebuilt = from_symmetrized([(a, 5), (b, 3), (c, 1)])
    if rebuilt != op:
        return None
    return s, alpha, beta


# -- third order --------------------------------------------------------------


def _conjugated_core() -> DiffOp:
    inv = DiffOp.mult(U1.inverse())
    return compose(compose(inv, DiffOp.D(3) + from_symmetrized([(schwarzian_s(), 1)])), inv)


def _first_order_sym(rem: DiffOp):
    """If ``rem = F o D + D o F`` return F, else None."""
    if any(k > 1 for k in rem.coeffs):
        return None
    F = rem.coeff(1) / 2
    if not (rem.coeff(0) - E.total_derivative(F)).is_zero():
        return None
    return F


def _yes_with_search(op, family, ode=None, notes=()):
    h = polynomial_momentum_search(op)
    if h is not None:
        return MomentumVerdict(Outcome.YES, density=_density_from_h(h), h=h, ode=ode, family=family,
                               notes=notes)
    return MomentumVerdict(Outcome.YES, ode=ode, family=family,
                           notes=notes + ("no polynomial solution of degree <= 6; see the ODE",))


def _decide_first_order(op: DiffOp) -> MomentumVerdict:
    fam = "first-order"
    h = polynomial_momentum_search(op)
    if h is not None:
        return MomentumVerdict(Outcome.YES, density=_density_from_h(h), h=h, family=fam)
    g = op.coeff(1)
    if diff_order(g) in (0, NEG_INFINITY) and (op.coeff(0) - E.total_derivative(g) / 2).is_zero():
        try:
            gs = to_sympy(g)
            us = sp.Symbol("u")
            inner = sp.integrate(1 / sp.sqrt(gs), us)
            hs = sp.simplify(inner / sp.sqrt(gs))
            if not hs.has(sp.Integral):
                hh = from_sympy(hs)
                T = integrate_u(hh)
                if verify_momentum_density(op, T):
                    return MomentumVerdict(Outcome.YES, density=T, h=hh, family=fam)
        except (QuadratureError, ValueError, TypeError, NotImplementedError):
            pass
    return MomentumVerdict(Outcome.YES, family=fam,
                           notes=("translation-invariant first-order operator; no closed-form density found",))


def _decide_third_order(op: DiffOp) -> MomentumVerdict:
    lead = op.leading
    s = _const_sign(lead * U1 ** 2)
    if s is not None:
        rem = op - s * _conjugated_core()
        f = _first_order_sym(rem)
        if f is not None and _u_only(f):
            ode = momentum_ode_third(f, s)
            return _yes_with_search(op, "mokhov3-conjugated", ode)
    s = _const_sign(lead)
    if s is not None:
        rem = s * op - DiffOp.D(3)
        B = _first_order_sym(rem)
        if B is not None and _u_only(B):
            dB = _d_u(B)
            if dB.is_zero():
                found = _find_inconsistency(momentum_residual_system(op))
                if found is not None:
                    forcing, eq, r = found
                    trace = (
                        TraceStep("force", f"coefficient of {forcing.label()} forces h_u = 0", forcing.expr),
                        TraceStep("contradiction",
                                  f"coefficient of {eq.label()} becomes {r} with h_u = 0, i.e. 0 = 1", r),
                    )
                    return MomentumVerdict(Outcome.NO, witness=Witness.INCONSISTENT_SYSTEM, trace=trace,
                                           residual=r, family="mokhov3-const")
            elif _d_u(dB).is_zero():
                return _yes_with_search(op, "mokhov3-linear")
    return MomentumVerdict(Outcome.UNKNOWN, reason="third-order operator not in a recognized normal form; "
                           "normalize it with a special contact transformation first")


def decide_momentum(op: DiffOp, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                    seed: int = DEFAULT_SEED, check_hamiltonian: bool = True) -> MomentumVerdict:
    """Decide whether a Hamiltonian operator has momentum."""
    if check_hamiltonian:
        rep = is_hamiltonian(op, trials, tol, seed)
        if not rep.hamiltonian:
            raise NotHamiltonianError("operator is not Hamiltonian"
                                      + ("" if rep.skew_adjoint else " (not skew-adjoint)"))
    ti = is_translation_invariant(op)
    if op.order == 5 and _const_sign(op.leading) is not None:
        try:
            trace = prop5_elimination(op)
            notes = () if ti else ("operator is also not translation-invariant",)
            return MomentumVerdict(Outcome.NO, witness=Witness.PROP5_CONTRADICTION, trace=tuple(trace),
                                   residual=trace[-1].expr, family="cooke5", notes=notes)
        except ShapeError as exc:
            if ti:
                return MomentumVerdict(Outcome.UNKNOWN, reason=f"leading coefficient +-1 but {exc}")
    if not ti:
        return MomentumVerdict(Outcome.NO, witness=Witness.NOT_TRANSLATION_INVARIANT,
                               reason="a coefficient depends explicitly on x")
    if op.order == 1:
        return _decide_first_order(op)
    if op.order == 3:
        return _decide_third_order(op)
    if op.order == 5:
        m = _extract_relation_coeffs(op)
        if m is not None:
            s, alpha, beta = m
            return _yes_with_search(op, "vodova5", momentum_ode_fifth(alpha, beta, s),
                                    notes=(f"alpha = {alpha}", f"beta = {beta}"))
        return MomentumVerdict(Outcome.UNKNOWN, reason="leading coefficient is neither +-1 nor +-1/u_1^4; "
                               "normalize it with a special contact transformation (transform command)")
    return MomentumVerdict(Outcome.UNKNOWN, reason=f"order {op.order} is not covered")
