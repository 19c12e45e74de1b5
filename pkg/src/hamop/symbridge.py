"""Conversion between :class:`Expr` and sympy, used only for quadrature."""

from __future__ import annotations

import sympy as sp

from . import expr as E
from .expr import Expr
from .scalar import GaussQ

__all__ = ["to_sympy", "from_sympy", "integrate_u", "QuadratureError"]


class QuadratureError(ValueError):
    """Antiderivative not expressible in the expression language."""


_KERNEL_TO_SP = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "ln": sp.log, "sqrt": sp.sqrt}
_SP_TO_KERNEL = {sp.sin: "sin", sp.cos: "cos", sp.exp: "exp", sp.log: "ln"}


def _sym(name: str) -> sp.Symbol:
    return sp.Symbol(name)


def _scalar(c):
    if isinstance(c, GaussQ):
        return sp.Rational(int(c.re.numerator), int(c.re.denominator)) + sp.I * sp.Rational(
            int(c.im.numerator), int(c.im.denominator))
    if isinstance(c, (complex, float)) or type(c).__name__ == "mpc":
        z = complex(c)
        return sp.Float(z.real) + (sp.I * sp.Float(z.imag) if z.imag else 0)
    return sp.Rational(int(c.numerator), int(c.denominator))


def _atom_to_sympy(aid: int):
    key = E.atom_key(aid)
    if key[0] == "I":
        return sp.I
    if key[0] == "k":
        return _KERNEL_TO_SP[key[1]](to_sympy(key[2]))
    if key[0] == "f":
        raise QuadratureError("unknown functions are not supported")
    return _sym(E.atom_name(aid))


def _poly_to_sympy(p: dict):
    terms = []
    for m, c in p.items():
        t = _scalar(c)
        for a, ex in m:
            t = t * _atom_to_sympy(a) ** ex
        terms.append(t)
    return sp.Add(*terms)


def to_sympy(e: Expr):
    num = _poly_to_sympy(e.num)
    if e.den:
        num = num / _poly_to_sympy(E._expand_den(e.den))
    return num


def _name_to_expr(name: str) -> Expr:
    from .parser import resolve_name

    return E.Expr._atom(resolve_name(name))


def from_sympy(s) -> Expr:
    """Translate a sympy expression built from + * ^, sin cos exp log and square roots."""
    s = sp.sympify(s)
    if s is sp.I:
        return E.I
    if s is sp.E:
        return E.kernel("exp", E.ONE)
    if s.is_Integer or s.is_Rational:
        return E.const(E.mpq(int(s.p), int(s.q)))
    if s.is_Float:
        return E.const(float(s))
    if s.is_Symbol:
        return _name_to_expr(s.name)
    if s.is_Add:
        acc = E.ZERO
        for a in s.args:
            acc = acc + from_sympy(a)
        return acc
    if s.is_Mul:
        acc = E.ONE
        for a in s.args:
            acc = acc * from_sympy(a)
        return acc
    if s.is_Pow:
        base, ex = s.args
        if ex.is_Integer:
            return from_sympy(base) ** int(ex)
        if ex.is_Rational and ex.q == 2:
            return E.kernel("sqrt", from_sympy(base)) ** int(ex.p)
        if ex.is_Rational or ex.free_symbols:
            return E.kernel("exp", from_sympy(ex) * E.kernel("ln", from_sympy(base)))
        raise QuadratureError(f"unsupported power {s}")
    if isinstance(s, sp.Function) and s.func in _SP_TO_KERNEL:
        return E.kernel(_SP_TO_KERNEL[s.func], from_sympy(s.args[0]))
    if isinstance(s, (sp.sinh, sp.cosh, sp.tanh, sp.tan)):
        return from_sympy(s.rewrite(sp.exp))
    if s.is_number:
        z = complex(s.evalf())
        return E.const(z if z.imag else z.real)
    raise QuadratureError(f"cannot express {s} in the expression language")


def integrate_u(e: Expr, var: str = "u") -> Expr:
    """Antiderivative in ``var`` via sympy; raises :class:`QuadratureError` on failure."""
    s = to_sympy(e)
    r = sp.integrate(s, _sym(var))
    if r.has(sp.Integral):
        raise QuadratureError(f"no closed-form antiderivative for {e}")
    return from_sympy(sp.simplify(r) if r.has(sp.Piecewise) else r)
