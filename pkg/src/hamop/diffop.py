"""Differential operators ``sum_k p_k D_x^k`` in right-normal form.

Coefficients are :class:`~hamop.expr.Expr`; all operator algebra (Leibniz
composition, formal adjoint, the operator ``D_A f``) is exact.  The Jacobi
residual is assembled with formal test-function jets ``w1_k, w2_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

from . import expr as E
from .expr import Expr
from .probe import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS, ZeroKind, ZeroVerdict, zero_test

__all__ = [
    "DiffOp",
    "NEG_INFINITY",
    "from_symmetrized",
    "compose",
    "adjoint",
    "apply",
    "d_operator",
    "jacobi_residual",
    "is_skew_adjoint",
    "is_hamiltonian",
    "HamiltonianReport",
    "total_derivative_n",
]

NEG_INFINITY = float("-inf")


def _as_expr(c) -> Expr:
    return c if isinstance(c, Expr) else E.const(c)


def total_derivative_n(e: Expr, n: int) -> list:
    """``[e, D e, ..., D^n e]``."""
    out = [e]
    for _ in range(n):
        out.append(E.total_derivative(out[-1]))
    return out


class DiffOp:
    """Immutable operator ``sum_k coeffs[k] * D_x^k``; zero coefficients are dropped."""

    __slots__ = ("_c",)

    def __init__(self, coeffs=None):
        c: dict = {}
        if coeffs:
            items = coeffs.items() if isinstance(coeffs, dict) else coeffs
            for k, p in items:
                if isinstance(k, Expr) and not isinstance(p, Expr):
                    k, p = p, k
                k = int(k)
                if k < 0:
                    raise ValueError("powers must be non-negative")
                p = _as_expr(p)
                c[k] = c[k] + p if k in c else p
        self._c = {k: E.normalize(v) for k, v in sorted(c.items()) if not v.is_zero()}

    @classmethod
    def mult(cls, f) -> "DiffOp":
        return cls({0: _as_expr(f)})

    @classmethod
    def D(cls, k: int = 1) -> "DiffOp":
        return cls({k: E.ONE})

    @property
    def coeffs(self) -> dict:
        return dict(self._c)

    def coeff(self, k: int) -> Expr:
        return self._c.get(k, E.ZERO)

    def terms(self) -> list:
        """``[(power, coefficient)]`` from highest power down."""
        return sorted(self._c.items(), reverse=True)

    @property
    def order(self):
        return max(self._c) if self._c else NEG_INFINITY

    @property
    def leading(self) -> Expr:
        return self._c[max(self._c)] if self._c else E.ZERO

    def is_zero(self) -> bool:
        return not self._c

    def is_exact(self) -> bool:
        return all(p.is_exact() for p in self._c.values())

    def __add__(self, other) -> "DiffOp":
        if not isinstance(other, DiffOp):
            other = DiffOp.mult(_as_expr(other))
        out = dict(self._c)
        for k, p in other._c.items():
            out[k] = out[k] + p if k in out else p
        return DiffOp(out)

    def __neg__(self) -> "DiffOp":
        return DiffOp({k: -p for k, p in self._c.items()})

    __radd__ = __add__

    def __sub__(self, other) -> "DiffOp":
        if not isinstance(other, DiffOp):
            other = DiffOp.mult(_as_expr(other))
        return self + (-other)

    def __rsub__(self, other) -> "DiffOp":
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, DiffOp):
            return compose(self, other)
        f = _as_expr(other)
        return compose(self, DiffOp.mult(f))

    def __rmul__(self, other):
        f = _as_expr(other)
        return DiffOp({k: f * p for k, p in self._c.items()})

    def __call__(self, f) -> Expr:
        return apply(self, f)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiffOp):
            return NotImplemented
        return self._c == other._c

    def __hash__(self):
        return hash(tuple(self._c.items()))

    def __repr__(self):
        return f"DiffOp({self.to_str()})"

    def to_str(self) -> str:
        if not self._c:
            return "0"
        parts = []
        for k, p in self.terms():
            s = p.to_str()
            if k == 0:
                parts.append(f"({s})")
            else:
                d = "Dx" if k == 1 else f"Dx^{k}"
                parts.append(d if s == "1" else f"({s})*{d}")
        return " + ".join(parts)

    __str__ = to_str


def compose(A: DiffOp, B: DiffOp) -> DiffOp:
    """``A o B`` via ``D^i o q = sum_l C(i,l) D^l(q) D^(i-l)``."""
    if A.is_zero() or B.is_zero():
        return DiffOp()
    top = A.order
    out: dict = {}
    for j, q in B._c.items():
        dq = total_derivative_n(q, top)
        for i, p in A._c.items():
            for l in range(i + 1):
                if dq[l].is_zero():
                    continue
                term = p * dq[l]
                if l:
                    term = term.scale(comb(i, l))
                k = i - l + j
                out.setdefault(k, []).append(term)
    return DiffOp({k: _sum(v) for k, v in out.items()})


def _sum(xs) -> Expr:
    acc = E.ZERO
    for x in xs:
        acc = acc + x
    return acc


def adjoint(A: DiffOp) -> DiffOp:
    """Formal adjoint ``sum_k (-D)^k o p_k``."""
    out: dict = {}
    for k, p in A._c.items():
        dp = total_derivative_n(p, k)
        for l in range(k + 1):
            if dp[l].is_zero():
                continue
            c = comb(k, l) * (-1) ** k
            out.setdefault(k - l, []).append(dp[l].scale(c))
    return DiffOp({k: _sum(v) for k, v in out.items()})


def apply(A: DiffOp, f) -> Expr:
    """``sum_k p_k D^k(f)``."""
    f = _as_expr(f)
    if A.is_zero():
        return E.ZERO
    df = total_derivative_n(f, A.order)
    return _sum(p * df[k] for k, p in A._c.items() if not df[k].is_zero())


def from_symmetrized(parts) -> DiffOp:
    """Normal form of ``sum (p o D^k + D^k o p)``."""
    acc = DiffOp()
    for p, k in parts:
        p = _as_expr(p)
        acc = acc + DiffOp({k: p}) + compose(DiffOp.D(k), DiffOp.mult(p))
    return acc


def _jet_atoms(p: Expr) -> list:
    out = []
    for a in p.free_atoms():
        key = E.atom_key(a)
        if key[0] == "u":
            out.append((key[1], a))
    return out


def d_operator(A: DiffOp, f) -> DiffOp:
    """``D_A f = sum_{k,m} (dp_k/du_m) D^k(f) D^m``."""
    f = _as_expr(f)
    if A.is_zero():
        return DiffOp()
    df = total_derivative_n(f, A.order)
    out: dict = {}
    for k, p in A._c.items():
        if df[k].is_zero():
            continue
        for m, a in _jet_atoms(p):
            dp = E.diff_partial(p, a)
            if not dp.is_zero():
                out.setdefault(m, []).append(dp * df[k])
    return DiffOp({m: _sum(v) for m, v in out.items()})


def jacobi_residual(A: DiffOp, h1=None, h2=None) -> Expr:
    """Left side of the Jacobi criterion; formal test functions by default."""
    h1 = E.W(1, 0) if h1 is None else _as_expr(h1)
    h2 = E.W(2, 0) if h2 is None else _as_expr(h2)
    Ah1 = apply(A, h1)
    Ah2 = apply(A, h2)
    D1 = d_operator(A, h1)
    D2 = d_operator(A, h2)
    t1 = apply(D1, Ah2)
    t2 = apply(D2, Ah1)
    t3 = apply(A, apply(adjoint(D1), h2))
    return t1 - t2 + t3


def is_skew_adjoint(A: DiffOp) -> bool:
    return (adjoint(A) + A).is_zero()


@dataclass(frozen=True)
class HamiltonianReport:
    skew_adjoint: bool
    jacobi: ZeroVerdict
    residual_terms: int

    @property
    def hamiltonian(self) -> bool:
        return self.skew_adjoint and self.jacobi.is_zero

    @property
    def inconclusive(self) -> bool:
        return self.skew_adjoint and self.jacobi.kind is ZeroKind.INCONCLUSIVE

    @property
    def witness(self):
        return self.jacobi.witness

    def as_dict(self) -> dict:
        return {
            "hamiltonian": self.hamiltonian,
            "skew_adjoint": self.skew_adjoint,
            "jacobi": self.jacobi.as_dict(),
            "jacobi_scope": "criterion" if self.skew_adjoint else "diagnostic",
            "residual_terms": self.residual_terms,
        }


def is_hamiltonian(A: DiffOp, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                   seed: int = DEFAULT_SEED) -> HamiltonianReport:
    """Exact skew-adjointness check plus the Jacobi criterion.

    For non-skew operators the Jacobi verdict is still computed but only
    as a diagnostic; such operators are never reported Hamiltonian.
    """
    skew = is_skew_adjoint(A)
    res = jacobi_residual(A)
    verdict = zero_test(res, trials, tol, seed)
    return HamiltonianReport(skew, verdict, res.n_terms())
