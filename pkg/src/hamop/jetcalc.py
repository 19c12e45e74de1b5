"""Jet-space calculus: order, level, Euler operator, Frechet derivative, prolongation."""

from __future__ import annotations

from . import expr as E
from .diffop import NEG_INFINITY, DiffOp, total_derivative_n
from .expr import Expr, total_derivative

__all__ = [
    "NEG_INFINITY",
    "total_derivative",
    "total_derivative_n",
    "diff_order",
    "level",
    "euler_operator",
    "frechet_derivative",
    "prolong_apply",
    "is_translation_invariant",
]


def _u_atoms(e: Expr) -> dict:
    out = {}
    for a in e.free_atoms():
        key = E.atom_key(a)
        if key[0] == "u":
            out[key[1]] = a
    return out


def _depends_on_u(e: Expr) -> bool:
    for a in e.free_atoms():
        key = E.atom_key(a)
        if key[0] == "f" and "u" in key[2]:
            return True
    return False


def diff_order(e: Expr):
    """Largest ``m`` with ``de/du_m != 0``; ``NEG_INFINITY`` for quasiconstants."""
    us = _u_atoms(e)
    for m in sorted(us, reverse=True):
        if not E.diff_partial(e, us[m]).is_zero():
            return m
    if _depends_on_u(e) and not E.diff_partial(e, E.U(0)).is_zero():
        return 0
    return NEG_INFINITY


def level(op: DiffOp) -> int:
    """``max_j (j + ord p_j)``; the order when every coefficient is quasiconstant."""
    if op.is_zero():
        raise ValueError("level of the zero operator is undefined")
    best = NEG_INFINITY
    for j, p in op.coeffs.items():
        o = diff_order(p)
        if o != NEG_INFINITY:
            best = max(best, j + o)
    return op.order if best == NEG_INFINITY else int(best)


def _check_density(T: Expr) -> None:
    for a in T.free_atoms():
        if E.atom_key(a)[0] == "w":
            raise ValueError("density must not involve test-function jets")


def euler_operator(T: Expr) -> Expr:
    """Variational derivative ``sum_i (-D)^i (dT/du_i)``."""
    _check_density(T)
    n = diff_order(T)
    if n == NEG_INFINITY:
        return E.ZERO
    acc = E.ZERO
    for i in range(int(n) + 1):
        t = E.diff_partial(T, E.U(i))
        for _ in range(i):
            t = total_derivative(t)
        acc = acc - t if i % 2 else acc + t
    return acc


def frechet_derivative(f: Expr) -> DiffOp:
    """``D_f = sum_i (df/du_i) D^i``."""
    _check_density(f)
    n = diff_order(f)
    if n == NEG_INFINITY:
        return DiffOp()
    return DiffOp({i: E.diff_partial(f, E.U(i)) for i in range(int(n) + 1)})


def prolong_apply(h: Expr, e: Expr) -> Expr:
    """``pr v_h (e) = sum_i D^i(h) de/du_i``."""
    us = _u_atoms(e)
    if _depends_on_u(e):
        us.setdefault(0, E._resolve_var(E.U(0)))
    if not us:
        return E.ZERO
    dh = total_derivative_n(h, max(us))
    acc = E.ZERO
    for i, a in us.items():
        acc = acc + dh[i] * E.diff_partial(e, a)
    return acc


def is_translation_invariant(op: DiffOp) -> bool:
    return all(E.diff_partial(p, E.X).is_zero() for p in op.coeffs.values())
