"""Symbolic expression kernel over jet coordinates.

Every :class:`Expr` is stored in canonical rational form::

    (Laurent polynomial in atoms) / (product of irreducible polynomial factors)

Atoms are the independent variable ``x``, jet variables ``u_k``, formal
test-function jets ``w^{(s)}_k``, named parameters, unknown-function
partials ``h_{x^i u^j}``, the imaginary unit ``I`` and analytic kernel
applications ``sin/cos/exp/ln/sqrt`` of a normalized argument.  Monomial
denominators (``1/u_1^4``) live as negative exponents, so the common case
never needs a polynomial gcd.  Non-monomial denominators are factored once
(sympy) and kept as a tuple of ``(factor, exponent)`` pairs.

Kernel applications are opaque: ``sin(u)^2 + cos(u)^2`` stays as written.
The only built-in relations are ``I^2 = -1`` and ``sqrt(A)^2 = A``.
"""

from __future__ import annotations

import cmath
import heapq
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import lru_cache

from gmpy2 import mpc, mpq, is_square, isqrt

from .scalar import GaussQ, is_exact, to_scalar

__all__ = [
    "Expr",
    "JetOrderError",
    "EvaluationError",
    "JetPoint",
    "KERNELS",
    "ZERO",
    "ONE",
    "I",
    "X",
    "U",
    "W",
    "param",
    "func",
    "kernel",
    "const",
    "normalize",
    "diff_partial",
    "substitute",
    "evaluate",
    "get_kmax",
    "set_kmax",
    "kmax",
]

KERNELS = ("sin", "cos", "exp", "ln", "sqrt")

_MPQ = type(mpq(0))
_MPC = type(mpc(0))


class JetOrderError(ValueError):
    """A jet index exceeded the configured maximum order."""


class EvaluationError(ArithmeticError):
    """Division by zero or a kernel domain error during evaluation."""


# ---------------------------------------------------------------------------
# jet-order bound

_KMAX = [24]


def get_kmax() -> int:
    return _KMAX[0]


def set_kmax(value: int) -> None:
    if value < 1:
        raise ValueError("kmax must be positive")
    _KMAX[0] = int(value)


@contextmanager
def kmax(value: int):
    old = get_kmax()
    set_kmax(value)
    try:
        yield
    finally:
        set_kmax(old)


def _check_order(k: int) -> None:
    if k > _KMAX[0]:
        raise JetOrderError(f"jet order {k} exceeds K_max={_KMAX[0]}")


# ---------------------------------------------------------------------------
# atom registry
#
# keys: ("I",) ("x",) ("u", k) ("w", s, k) ("p", name)
#       ("f", name, args, idx) ("k", kernel_name, arg_expr)

_lock = threading.RLock()
_ATOM_ID: dict = {}
_ATOM_KEY: list = []
_SQRT_ATOMS: set = set()
_KERNEL_ATOMS: set = set()


def _atom_id(key) -> int:
    aid = _ATOM_ID.get(key)
    if aid is not None:
        return aid
    with _lock:
        aid = _ATOM_ID.get(key)
        if aid is None:
            aid = len(_ATOM_KEY)
            _ATOM_KEY.append(key)
            _ATOM_ID[key] = aid
            if key[0] == "k":
                _KERNEL_ATOMS.add(aid)
                if key[1] == "sqrt":
                    _SQRT_ATOMS.add(aid)
    return aid


I_ID = _atom_id(("I",))
X_ID = _atom_id(("x",))
assert I_ID == 0


def atom_key(aid: int):
    return _ATOM_KEY[aid]


@lru_cache(maxsize=None)
def atom_sort_key(aid: int):
    key = _ATOM_KEY[aid]
    tag = key[0]
    if tag == "I":
        return (0,)
    if tag == "x":
        return (1,)
    if tag == "u":
        return (2, key[1])
    if tag == "w":
        return (3, key[1], key[2])
    if tag == "p":
        return (4, key[1])
    if tag == "f":
        return (5, key[1], key[2], key[3])
    return (6, key[1], key[2].to_str())


def atom_name(aid: int) -> str:
    key = _ATOM_KEY[aid]
    tag = key[0]
    if tag == "I":
        return "I"
    if tag == "x":
        return "x"
    if tag == "u":
        return "u" if key[1] == 0 else f"u_{key[1]}"
    if tag == "w":
        return f"w{key[1]}_{key[2]}"
    if tag == "p":
        return key[1]
    if tag == "f":
        _, name, args, idx = key
        suffix = "".join(a * n for a, n in zip(args, idx))
        return f"{name}_{suffix}" if suffix else name
    return f"{key[1]}({key[2].to_str()})"


# ---------------------------------------------------------------------------
# monomials: tuples of (atom_id, exponent) sorted by atom id


@lru_cache(maxsize=1 << 20)
def _mono_mul(a, b):
    """Product of two monomials; returns (monomial, sign) with I^2 = -1 folded in."""
    if not a:
        return b, 1
    if not b:
        return a, 1
    d = dict(a)
    for k, e in b:
        n = d.get(k, 0) + e
        if n:
            d[k] = n
        else:
            del d[k]
    sign = 1
    ie = d.get(I_ID)
    if ie is not None and ie != 1:
        r = ie % 4
        if r >= 2:
            sign = -1
        if r % 2:
            d[I_ID] = 1
        else:
            del d[I_ID]
    return tuple(sorted(d.items())), sign


def _mono_pow(m, k):
    d = {a: e * k for a, e in m}
    sign = 1
    ie = d.get(I_ID)
    if ie is not None and ie != 1:
        r = ie % 4
        if r >= 2:
            sign = -1
        if r % 2:
            d[I_ID] = 1
        else:
            del d[I_ID]
    return tuple(sorted(d.items())), sign


def _mono_div_atom(m, aid):
    """m / atom (exponent of aid decreased by one)."""
    out = []
    for a, e in m:
        if a == aid:
            if e != 1:
                out.append((a, e - 1))
        else:
            out.append((a, e))
    return tuple(out)


# ---------------------------------------------------------------------------
# raw polynomial helpers (dict: monomial -> coefficient)


def _padd_into(acc, p, scale=1):
    for m, c in p.items():
        if scale != 1:
            c = c * scale
        n = acc.get(m)
        if n is None:
            acc[m] = c
        else:
            s = n + c
            if s == 0:
                del acc[m]
            else:
                acc[m] = s
    return acc


def _pmul(a, b):
    if len(a) > len(b):
        a, b = b, a
    acc = {}
    get = acc.get
    for ma, ca in a.items():
        for mb, cb in b.items():
            m, s = _mono_mul(ma, mb)
            c = ca * cb if s == 1 else -(ca * cb)
            n = get(m)
            if n is None:
                acc[m] = c
            else:
                t = n + c
                if t == 0:
                    del acc[m]
                else:
                    acc[m] = t
    return acc


def _pmul_mono(p, mono, coeff=1):
    out = {}
    for m, c in p.items():
        mm, s = _mono_mul(m, mono)
        out[mm] = c * coeff if s == 1 else -(c * coeff)
    return out


def _ppow(p, k):
    result = {(): mpq(1)}
    base = p
    while k:
        if k & 1:
            result = _pmul(result, base)
        k >>= 1
        if k:
            base = _pmul(base, base)
    return result


def _is_float_poly(p) -> bool:
    for c in p.values():
        if isinstance(c, _MPC):
            return True
    return False


def _to_float_poly(p):
    return {m: mpc(c) for m, c in p.items()}


def _conj_poly(p):
    """Substitute I -> -I."""
    out = {}
    for m, c in p.items():
        if m and m[0][0] == I_ID and m[0][1] % 2:
            out[m] = -c
        else:
            out[m] = c
    return out


def _has_I(p) -> bool:
    for m in p:
        if m and m[0][0] == I_ID:
            return True
    return False


def _mono_content(p):
    """Componentwise minimum exponent over all monomials (a Laurent monomial)."""
    mins = None
    for m in p:
        d = dict(m)
        if mins is None:
            mins = d
            continue
        for a in set(mins) | set(d):
            mins[a] = min(mins.get(a, 0), d.get(a, 0))
    return tuple(sorted((a, e) for a, e in mins.items() if e != 0))


def _mono_inv(m):
    return tuple((a, -e) for a, e in m)


def _mono_display_key(m):
    return tuple((atom_sort_key(a), e) for a, e in m)


def _leading(p):
    return max(p, key=_mono_display_key)


def _freeze(p):
    return tuple(sorted(p.items(), key=lambda t: _mono_display_key(t[0])))


# exact division in the polynomial ring, lex order over atom sort keys


def _exact_divide(p, f):
    """Return q with p == q*f, or None. f: polynomial without monomial content."""
    if not p:
        return {}
    shift = _mono_content(p)
    if shift:
        p = _pmul_mono(p, _mono_inv(shift))
    atoms = sorted({a for m in p for a, _ in m} | {a for m in f for a, _ in m}, key=atom_sort_key)
    pos = {a: i for i, a in enumerate(atoms)}
    n = len(atoms)

    def vec(m):
        v = [0] * n
        for a, e in m:
            v[pos[a]] = e
        return v

    lt_f = max(f, key=lambda m: vec(m))
    lt_f_vec = vec(lt_f)
    lt_f_c = f[lt_f]
    # quick degree-per-atom filter
    for i, e in enumerate(lt_f_vec):
        if e > 0 and not any(dict(m).get(atoms[i], 0) >= e for m in p):
            return None
    r = dict(p)
    heap = [tuple(-e for e in vec(m)) for m in r]
    heapq.heapify(heap)
    key_to_mono = {tuple(vec(m)): m for m in r}
    q = {}
    inv_lt = _mono_inv(lt_f)
    while r:
        while True:
            if not heap:
                return None if r else q
            kneg = heapq.heappop(heap)
            k = tuple(-e for e in kneg)
            m = key_to_mono.get(k)
            if m is not None and m in r:
                break
        if any(a < b for a, b in zip(k, lt_f_vec)):
            return None
        c = r[m] / lt_f_c
        qm, s = _mono_mul(m, inv_lt)
        if s == -1:
            c = -c
        q[qm] = q.get(qm, 0) + c
        for fm, fc in f.items():
            mm, s2 = _mono_mul(qm, fm)
            t = c * fc if s2 == 1 else -(c * fc)
            old = r.get(mm)
            if old is None:
                r[mm] = -t
                kv = tuple(vec(mm))
                key_to_mono[kv] = mm
                heapq.heappush(heap, tuple(-e for e in kv))
            else:
                v = old - t
                if v == 0:
                    del r[mm]
                else:
                    r[mm] = v
    q = {m: c for m, c in q.items() if c != 0}
    if shift:
        q = _pmul_mono(q, shift)
    return q


# ---------------------------------------------------------------------------
# factorisation of denominators (sympy, cached)

_FACTOR_CACHE: dict = {}


def _normalize_factor(p):
    """Scale p so its leading coefficient is 1; return (unit, frozen factor)."""
    lm = _leading(p)
    lc = p[lm]
    q = {m: c / lc for m, c in p.items()}
    return lc, _freeze(q)


def _factor_primitive(p):
    """Factor a polynomial without monomial content.

    Returns (unit, [(frozen_factor, exp), ...]).
    """
    key = _freeze(p)
    hit = _FACTOR_CACHE.get(key)
    if hit is not None:
        return hit
    if _is_float_poly(p) or len(p) <= 1:
        unit, fac = _normalize_factor(p)
        res = (unit, [(fac, 1)] if len(p) > 1 else [])
        _FACTOR_CACHE[key] = res
        return res
    import sympy

    atoms = sorted({a for m in p for a, _ in m}, key=atom_sort_key)
    gens = sympy.symbols([f"_a{a}" for a in atoms])
    pos = {a: i for i, a in enumerate(atoms)}
    rep = {}
    for m, c in p.items():
        v = [0] * len(atoms)
        for a, e in m:
            v[pos[a]] = e
        rep[tuple(v)] = sympy.Rational(int(c.numerator), int(c.denominator))
    poly = sympy.Poly.from_dict(rep, *gens, domain="QQ")
    coeff, factors = poly.factor_list()
    unit = mpq(int(sympy.fraction(coeff)[0]), int(sympy.fraction(coeff)[1]))
    out = []
    for fp, e in factors:
        d = {}
        for exps, c in fp.terms():
            mono = tuple((atoms[i], ex) for i, ex in enumerate(exps) if ex)
            mono = tuple(sorted(mono))
            num, den = sympy.fraction(sympy.nsimplify(c))
            d[mono] = mpq(int(num), int(den))
        if len(d) == 1:
            # monomial factor cannot occur (no content), but constants can
            (mono, c), = d.items()
            if not mono:
                unit *= c ** e
                continue
        u, fac = _normalize_factor(d)
        unit *= u ** e
        out.append((fac, e))
    res = (unit, out)
    _FACTOR_CACHE[key] = res
    return res


# ---------------------------------------------------------------------------
# Expr


class Expr:
    """Immutable expression in canonical rational form."""

    __slots__ = ("num", "den", "flt", "_hash")

    def __init__(self, num, den=(), flt=None):
        self.num = num
        self.den = den
        self.flt = _is_float_poly(num) if flt is None else flt
        self._hash = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def _make(num, den=()):
        if not num:
            return ZERO
        flt = _is_float_poly(num)
        if den:
            den = list(den)
            changed = False
            for i, (f, e) in enumerate(den):
                fd = dict(f)
                while e > 0:
                    q = _exact_divide(num, fd)
                    if q is None:
                        break
                    num = q
                    e -= 1
                    changed = True
                den[i] = (f, e)
            if changed:
                den = [(f, e) for f, e in den if e > 0]
            den = tuple(sorted(den, key=lambda t: _factor_sort_key(t[0])))
        if _SQRT_ATOMS:
            red = _reduce_sqrt(num)
            if red is not None:
                return red / Expr(_expand_den(den), ()) if den else red
        return Expr(num, den, flt)

    @staticmethod
    def from_scalar(c):
        c = to_scalar(c)
        if isinstance(c, GaussQ):
            num = {}
            if c.re != 0:
                num[()] = c.re
            if c.im != 0:
                num[((I_ID, 1),)] = c.im
            return Expr(num, (), False)
        if c == 0:
            return ZERO
        if isinstance(c, complex):
            return Expr({(): mpc(c)}, (), True)
        return Expr({(): c}, (), False)

    @staticmethod
    def _atom(aid):
        return Expr({((aid, 1),): mpq(1)}, (), False)

    # -- basic predicates ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return not self.den and all(not m for m in self.num)

    def constant_value(self):
        """The scalar value if this is a constant (possibly exact complex)."""
        if self.den:
            return None
        if not self.num:
            return mpq(0)
        re = 0
        im = 0
        for m, c in self.num.items():
            if not m:
                re = c
            elif m == ((I_ID, 1),):
                im = c
            else:
                return None
        if isinstance(re, _MPC) or isinstance(im, _MPC):
            return complex(re) + 1j * complex(im)
        if im == 0:
            return mpq(re)
        return GaussQ(re, im)

    def is_exact(self) -> bool:
        """No floating scalars and no kernel atoms."""
        if self.flt:
            return False
        return not (self.atoms() & _KERNEL_ATOMS)

    def has_kernels(self) -> bool:
        return bool(self.atoms() & _KERNEL_ATOMS)

    def atoms(self) -> frozenset:
        s = set()
        for m in self.num:
            for a, _ in m:
                s.add(a)
        for f, _ in self.den:
            for m, _ in f:
                for a, _ in m:
                    s.add(a)
        return frozenset(s)

    def free_atoms(self) -> frozenset:
        """Atoms including those inside kernel arguments."""
        out = set()
        for a in self.atoms():
            out.add(a)
            key = _ATOM_KEY[a]
            if key[0] == "k":
                out |= key[2].free_atoms()
        return frozenset(out)

    def depends_on(self, aid: int) -> bool:
        return aid in self.free_atoms()

    def max_jet_order(self) -> int:
        """Largest k with u_k among the free atoms (-1 if none)."""
        best = -1
        for a in self.free_atoms():
            key = _ATOM_KEY[a]
            if key[0] == "u" and key[1] > best:
                best = key[1]
        return best

    def n_terms(self) -> int:
        return len(self.num)

    # -- arithmetic ----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Expr):
            return other
        return Expr.from_scalar(other)

    @staticmethod
    def _foreign(other) -> bool:
        """Operands such as operators that handle mixed arithmetic themselves."""
        return not isinstance(other, Expr) and hasattr(other, "coeffs")

    def __add__(self, other):
        if self._foreign(other):
            return NotImplemented
        o = self._coerce(other)
        if not o.num:
            return self
        if not self.num:
            return o
        a, b = self.num, o.num
        if self.flt != o.flt:
            a, b = _to_float_poly(a), _to_float_poly(b)
        if not self.den and not o.den:
            acc = dict(a)
            _padd_into(acc, b)
            if not acc:
                return ZERO
            return Expr._make(acc) if _SQRT_ATOMS else Expr(acc, (), self.flt or o.flt)
        d1 = dict(self.den)
        d2 = dict(o.den)
        common = dict(d1)
        for f, e in d2.items():
            common[f] = max(common.get(f, 0), e)
        na = a
        for f, e in common.items():
            k = e - d1.get(f, 0)
            if k:
                na = _pmul(na, _ppow(dict(f), k))
        nb = b
        for f, e in common.items():
            k = e - d2.get(f, 0)
            if k:
                nb = _pmul(nb, _ppow(dict(f), k))
        acc = dict(na)
        _padd_into(acc, nb)
        return Expr._make(acc, tuple(common.items()))

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self.num.items()}, self.den, self.flt)

    def __sub__(self, other):
        if self._foreign(other):
            return NotImplemented
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if self._foreign(other):
            return NotImplemented
        o = self._coerce(other)
        if not self.num or not o.num:
            return ZERO
        a, b = self.num, o.num
        if self.flt != o.flt:
            a, b = _to_float_poly(a), _to_float_poly(b)
        prod = _pmul(a, b)
        if not self.den and not o.den:
            if not prod:
                return ZERO
            if _SQRT_ATOMS:
                return Expr._make(prod)
            return Expr(prod, (), self.flt or o.flt)
        den = dict(self.den)
        for f, e in o.den:
            den[f] = den.get(f, 0) + e
        return Expr._make(prod, tuple(den.items()))

    __rmul__ = __mul__

    def scale(self, c):
        c = to_scalar(c)
        if c == 0:
            return ZERO
        if isinstance(c, GaussQ):
            return self * Expr.from_scalar(c)
        if isinstance(c, complex):
            c = mpc(c)
            return Expr({m: v * c for m, v in self.num.items()}, self.den, True)
        return Expr({m: v * c for m, v in self.num.items()}, self.den, self.flt)

    def inverse(self):
        if not self.num:
            raise ZeroDivisionError("inverse of zero expression")
        num = self.num
        extra = None
        if _has_I(num):
            conj = _conj_poly(num)
            extra = conj
            num = _pmul(num, conj)
            if _has_I(num):  # pragma: no cover - algebraically impossible
                raise ArithmeticError("failed to rationalize I")
        if len(num) == 1:
            (m, c), = num.items()
            inv_c = 1 / c
            new_num = {_mono_inv(m): inv_c}
            new_den = ()
        else:
            content = _mono_content(num)
            prim = _pmul_mono(num, _mono_inv(content)) if content else num
            unit, factors = _factor_primitive(prim)
            inv_u = 1 / unit
            new_num = {_mono_inv(content): inv_u}
            new_den = tuple(factors)
        if extra is not None:
            new_num = _pmul(new_num, extra)
        if self.den:
            new_num = _pmul(new_num, _expand_den(self.den))
        return Expr._make(new_num, new_den)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.is_constant():
            c = o.constant_value()
            if not isinstance(c, GaussQ):
                if c == 0:
                    raise ZeroDivisionError("division by zero expression")
                return self.scale(1 / c)
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k == 0:
            return ONE
        if k < 0:
            return self.inverse() ** (-k)
        if len(self.num) == 1 and not self.den:
            (m, c), = self.num.items()
            mm, s = _mono_pow(m, k)
            v = c ** k
            out = Expr({mm: v if s == 1 else -v}, (), self.flt)
            return Expr._make(out.num) if _SQRT_ATOMS else out
        result = ONE
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- comparison ------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, Expr):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (int, float, complex, _MPQ, _MPC, GaussQ)):
            return self == Expr.from_scalar(other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.num.items()), self.den))
        return self._hash

    def equals(self, other) -> bool:
        """Exact equality of canonical forms (difference normalizes to zero)."""
        return (self - other).is_zero()

    # -- structure ---------------------------------------------------------------

    def numerator_denominator(self):
        """Split into polynomial numerator and denominator Exprs.

        Negative exponents move to the denominator together with the
        non-monomial factors, giving a single quotient of two polynomials.
        """
        if not self.num:
            return ZERO, ONE
        content = _mono_content(self.num)
        neg = tuple((a, -e) for a, e in content if e < 0)
        num = _pmul_mono(self.num, neg) if neg else dict(self.num)
        den = {neg: mpq(1)}
        if self.den:
            den = _pmul(den, _expand_den(self.den))
        return Expr(num), Expr(den)

    def terms(self):
        """Iterate (coefficient, monomial Expr) over numerator terms (Laurent)."""
        for m, c in sorted(self.num.items(), key=lambda t: _mono_display_key(t[0]), reverse=True):
            yield c, Expr({m: mpq(1)}, (), False)

    def coefficients_in(self, aids):
        """Collect the numerator as a polynomial in the given atoms.

        Returns ``{exponent tuple: Expr coefficient}``; each coefficient
        keeps the full denominator.
        """
        aids = tuple(aids)
        groups: dict = {}
        for m, c in self.num.items():
            d = dict(m)
            key = tuple(d.pop(a, 0) for a in aids)
            rest = tuple(sorted(d.items()))
            groups.setdefault(key, {})[rest] = c
        out = {}
        for key, p in groups.items():
            out[key] = Expr._make(p, self.den) if self.den else Expr(p, (), None)
        return out

    def to_str(self) -> str:
        return _to_str(self)

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"Expr({self.to_str()})"


def _factor_sort_key(f):
    return tuple((_mono_display_key(m), str(c)) for m, c in f)


def _expand_den(den):
    acc = {(): mpq(1)}
    for f, e in den:
        acc = _pmul(acc, _ppow(dict(f), e))
    return acc


def _reduce_sqrt(num):
    """Rewrite sqrt(A)^e with e outside {0,1}; return Expr or None if unchanged."""
    dirty = False
    for m in num:
        for a, e in m:
            if a in _SQRT_ATOMS and (e < 0 or e > 1):
                dirty = True
                break
        if dirty:
            break
    if not dirty:
        return None
    clean = {}
    result = ZERO
    for m, c in num.items():
        rest = []
        extra = ONE
        hit = False
        for a, e in m:
            if a in _SQRT_ATOMS and (e < 0 or e > 1):
                q, r = divmod(e, 2)
                arg = _ATOM_KEY[a][2]
                extra = extra * (arg ** q)
                if r:
                    rest.append((a, 1))
                hit = True
            else:
                rest.append((a, e))
        if hit:
            result = result + Expr({tuple(rest): c}, (), None) * extra
        else:
            clean[m] = c
    if clean:
        result = result + Expr(clean, (), None)
    return result


ZERO = Expr({}, (), False)
ONE = Expr({(): mpq(1)}, (), False)
I = Expr._atom(I_ID)
X = Expr._atom(X_ID)


def const(c) -> Expr:
    return Expr.from_scalar(c)


def U(k: int = 0) -> Expr:
    if k < 0:
        raise ValueError("jet index must be non-negative")
    _check_order(k)
    return Expr._atom(_atom_id(("u", k)))


def W(s: int, k: int = 0) -> Expr:
    _check_order(k)
    return Expr._atom(_atom_id(("w", s, k)))


def param(name: str) -> Expr:
    return Expr._atom(_atom_id(("p", name)))


def func(name: str, args=("x", "u"), idx=None) -> Expr:
    """Unknown function symbol (partial derivative given by idx)."""
    args = tuple(args)
    if not set(args) <= {"x", "u"} or len(set(args)) != len(args):
        raise ValueError("unknown functions take arguments from {x, u}")
    idx = tuple(idx) if idx is not None else (0,) * len(args)
    return Expr._atom(_atom_id(("f", name, args, idx)))


def _exact_sqrt(c):
    if isinstance(c, _MPQ):
        n, d = c.numerator, c.denominator
        if n >= 0 and is_square(n) and is_square(d):
            return mpq(isqrt(n), isqrt(d))
        if n < 0 and is_square(-n) and is_square(d):
            return GaussQ(0, mpq(isqrt(-n), isqrt(d)))
    return None


def kernel(name: str, arg) -> Expr:
    if name not in KERNELS:
        raise ValueError(f"unknown kernel {name!r}")
    arg = arg if isinstance(arg, Expr) else const(arg)
    arg = normalize(arg)
    if arg.is_constant():
        c = arg.constant_value()
        if is_exact(c):
            if name == "sin" and c == 0:
                return ZERO
            if name == "cos" and c == 0:
                return ONE
            if name == "exp" and c == 0:
                return ONE
            if name == "ln" and c == 1:
                return ZERO
            if name == "sqrt":
                r = _exact_sqrt(c)
                if r is not None:
                    return const(r)
        elif isinstance(c, complex):
            return const(_eval_kernel(name, c))
    return Expr._atom(_atom_id(("k", name, arg)))


# ---------------------------------------------------------------------------
# derivations


def _kernel_outer_derivative(name, arg) -> Expr:
    if name == "sin":
        return kernel("cos", arg)
    if name == "cos":
        return -kernel("sin", arg)
    if name == "exp":
        return kernel("exp", arg)
    if name == "ln":
        return arg.inverse()
    if name == "sqrt":
        return kernel("sqrt", arg) / (2 * arg)
    raise ValueError(name)


def _apply_derivation(e: Expr, rule, cache=None) -> Expr:
    """Apply the derivation defined on atoms by ``rule(aid) -> Expr``."""
    if not e.num:
        return ZERO
    if cache is None:
        cache = {}

    def image(a):
        v = cache.get(a)
        if v is None:
            v = rule(a)
            cache[a] = v
        return v

    acc = {}
    slow = []
    for m, c in e.num.items():
        for a, ex in m:
            d = image(a)
            if not d.num:
                continue
            base = _mono_div_atom(m, a)
            coeff = c * ex
            if d.den or d.flt != e.flt:
                slow.append(Expr({base: coeff}, (), e.flt) * d)
                continue
            get = acc.get
            for dm, dc in d.num.items():
                mm, s = _mono_mul(base, dm)
                t = coeff * dc if s == 1 else -(coeff * dc)
                n = get(mm)
                if n is None:
                    acc[mm] = t
                else:
                    v = n + t
                    if v == 0:
                        del acc[mm]
                    else:
                        acc[mm] = v
    dnum = Expr._make(acc) if acc else ZERO
    for s in slow:
        dnum = dnum + s
    if not e.den:
        return dnum
    # quotient rule against the factored denominator
    base = Expr(e.num, (), e.flt)
    den_expr = Expr(_expand_den(e.den), (), e.flt)
    inv_den = ONE / den_expr
    result = dnum * inv_den
    for f, k in e.den:
        fe = Expr(dict(f), (), None)
        df = _apply_derivation(fe, rule, cache)
        if df.num:
            result = result - base * inv_den * df * k / fe
    return result


def _partial_rule(target: int):
    tkey = _ATOM_KEY[target]

    def rule(a):
        if a == target:
            return ONE
        key = _ATOM_KEY[a]
        tag = key[0]
        if tag == "k":
            arg = key[2]
            inner = diff_partial(arg, target)
            if not inner.num:
                return ZERO
            return _kernel_outer_derivative(key[1], arg) * inner
        if tag == "f":
            _, name, args, idx = key
            var = None
            if tkey == ("x",):
                var = "x"
            elif tkey == ("u", 0):
                var = "u"
            if var is None or var not in args:
                return ZERO
            j = args.index(var)
            new_idx = list(idx)
            new_idx[j] += 1
            return func(name, args, new_idx)
        return ZERO

    return rule


def _total_rule(a):
    key = _ATOM_KEY[a]
    tag = key[0]
    if tag == "x":
        return ONE
    if tag == "u":
        _check_order(key[1] + 1)
        return Expr._atom(_atom_id(("u", key[1] + 1)))
    if tag == "w":
        _check_order(key[2] + 1)
        return Expr._atom(_atom_id(("w", key[1], key[2] + 1)))
    if tag == "k":
        arg = key[2]
        inner = total_derivative(arg)
        if not inner.num:
            return ZERO
        return _kernel_outer_derivative(key[1], arg) * inner
    if tag == "f":
        _, name, args, idx = key
        out = ZERO
        for j, var in enumerate(args):
            new_idx = list(idx)
            new_idx[j] += 1
            term = func(name, args, new_idx)
            if var == "u":
                term = term * U(1)
            out = out + term
        return out
    return ZERO


_TD_CACHE: dict = {}


def total_derivative(e: Expr) -> Expr:
    """D_x applied to e (exact, canonical)."""
    if not e.num:
        return ZERO
    key = (e, _KMAX[0])  # a cached result must not bypass the jet-order bound
    hit = _TD_CACHE.get(key)
    if hit is not None:
        return hit
    r = _apply_derivation(e, _total_rule, {})
    if len(_TD_CACHE) > 20000:
        _TD_CACHE.clear()
    _TD_CACHE[key] = r
    return r


def _resolve_var(v) -> int:
    if isinstance(v, Expr):
        if len(v.num) == 1 and not v.den:
            (m, c), = v.num.items()
            if len(m) == 1 and m[0][1] == 1 and c == 1:
                return m[0][0]
        raise ValueError("variable must be a single atom")
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        from .parser import resolve_name

        return resolve_name(v)
    raise TypeError(f"cannot interpret {v!r} as a variable")


def _reaches_function(atoms, tkey) -> bool:
    """Whether an unknown-function atom takes the target (x or u) as an argument."""
    var = "x" if tkey == ("x",) else ("u" if tkey == ("u", 0) else None)
    if var is None:
        return False
    return any(_ATOM_KEY[a][0] == "f" and var in _ATOM_KEY[a][2] for a in atoms)


def diff_partial(e: Expr, v) -> Expr:
    """Exact partial derivative with respect to an atom."""
    aid = _resolve_var(v)
    atoms = e.free_atoms()
    if aid not in atoms and not _reaches_function(atoms, _ATOM_KEY[aid]):
        return ZERO
    return _apply_derivation(e, _partial_rule(aid), {})


# ---------------------------------------------------------------------------
# normalize / substitute


def normalize(e: Expr) -> Expr:
    """Canonical form; Exprs are kept canonical so this re-runs the reductions."""
    for a in e.atoms():
        key = _ATOM_KEY[a]
        if key[0] == "u":
            _check_order(key[1])
        elif key[0] == "w":
            _check_order(key[2])
    return Expr._make(dict(e.num), e.den)


def substitute(e: Expr, bindings) -> Expr:
    """Simultaneous substitution of atoms, followed by normalization."""
    table = {}
    for k, v in bindings.items():
        table[_resolve_var(k)] = v if isinstance(v, Expr) else const(v)
    return _substitute(e, table, {})


def _substitute(e, table, memo):
    if not e.num:
        return ZERO
    touched = e.free_atoms()
    if not any(a in table for a in touched):
        # unknown functions whose arguments are rebound still need checking
        return e

    def image(a):
        v = memo.get(a)
        if v is not None:
            return v
        if a in table:
            v = table[a]
        else:
            key = _ATOM_KEY[a]
            if key[0] == "k":
                v = kernel(key[1], _substitute(key[2], table, memo))
            elif key[0] == "f":
                bound = {"x": X_ID, "u": _atom_id(("u", 0))}
                if any(bound[arg] in table for arg in key[2]):
                    raise ValueError(
                        f"cannot substitute into arguments of unknown function {atom_name(a)}"
                    )
                v = Expr._atom(a)
            else:
                v = Expr._atom(a)
        memo[a] = v
        return v

    pow_memo = {}

    def power(a, k):
        key = (a, k)
        v = pow_memo.get(key)
        if v is None:
            v = image(a) ** k
            pow_memo[key] = v
        return v

    # group terms whose atoms are all untouched into one fast block
    plain = {}
    result = ZERO
    for m, c in e.num.items():
        if not any(a in table or a in _KERNEL_ATOMS or _ATOM_KEY[a][0] == "f" for a, _ in m):
            plain[m] = c
            continue
        keep = []
        t = ONE
        for a, k in m:
            img = image(a)
            if img.num == {((a, 1),): 1} and not img.den:
                keep.append((a, k))
            else:
                t = t * power(a, k)
        result = result + Expr({tuple(keep): c}, (), None) * t
    if plain:
        result = result + Expr(plain, (), None)
    if e.den:
        den = ONE
        for f, k in e.den:
            den = den * _substitute(Expr(dict(f), (), None), table, memo) ** k
        result = result / den
    return result


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class JetPoint:
    """Numeric assignment to atoms.

    ``values`` maps atom ids to scalars.  ``constraints`` records sampling
    constraints as ``(atom_id, min_abs)`` pairs.
    """

    values: dict = field(default_factory=dict)
    constraints: tuple = ()

    @classmethod
    def from_names(cls, **named):
        from .parser import resolve_name

        return cls({resolve_name(k): to_scalar(v) for k, v in named.items()})

    def get(self, aid):
        return self.values.get(aid)

    def named(self) -> dict:
        return {atom_name(a): v for a, v in sorted(self.values.items(), key=lambda t: atom_sort_key(t[0]))}

    def satisfies_constraints(self) -> bool:
        for aid, lo in self.constraints:
            v = self.values.get(aid)
            if v is not None and abs(complex(v)) < lo:
                return False
        return True


def _eval_kernel(name, v):
    if name == "ln":
        z = complex(v)
        if z.imag == 0 and z.real <= 0:
            raise EvaluationError("ln of nonpositive value")
        if z == 0:
            raise EvaluationError("ln of zero")
        return cmath.log(z)
    if name == "sqrt":
        if is_exact(v):
            r = _exact_sqrt(to_scalar(v))
            if r is not None:
                return r
        return cmath.sqrt(complex(v))
    if name == "sin":
        if is_exact(v) and v == 0:
            return mpq(0)
        return cmath.sin(complex(v))
    if name == "cos":
        if is_exact(v) and v == 0:
            return mpq(1)
        return cmath.cos(complex(v))
    if name == "exp":
        if is_exact(v) and v == 0:
            return mpq(1)
        return cmath.exp(complex(v))
    raise ValueError(name)


def _mixed(a, b, op):
    if isinstance(a, complex) or isinstance(b, complex):
        return op(complex(a), complex(b))
    return op(a, b)


def _spow(v, e):
    if isinstance(v, complex):
        if v == 0 and e < 0:
            raise EvaluationError("division by zero")
        return v ** e
    if e < 0 and v == 0:
        raise EvaluationError("division by zero")
    if isinstance(v, GaussQ):
        return v ** e
    return mpq(v) ** e


def _atom_value(aid, point, cache):
    v = cache.get(aid)
    if v is not None:
        return v
    key = _ATOM_KEY[aid]
    if key[0] == "I":
        v = GaussQ(0, 1)
    elif key[0] == "k":
        v = _eval_kernel(key[1], evaluate(key[2], point, cache))
    else:
        v = point.values.get(aid)
        if v is None:
            raise KeyError(f"no value for {atom_name(aid)}")
    cache[aid] = v
    return v


def _eval_poly(p, point, cache):
    total = mpq(0)
    for m, c in p.items():
        t = c
        for a, e in m:
            t = _mixed(t, _spow(_atom_value(a, point, cache), e), lambda x, y: x * y)
        total = _mixed(total, t, lambda x, y: x + y)
    return total


def evaluate(e: Expr, point: JetPoint, cache=None):
    """Evaluate at a JetPoint; exact when both are exact and kernel-free."""
    if cache is None:
        cache = {}
    num = _eval_poly(e.num, point, cache)
    if not e.den:
        return num
    den = _eval_poly(_expand_den(e.den), point, cache)
    if den == 0:
        raise EvaluationError("division by zero")
    return _mixed(num, den, lambda x, y: x / y)


# ---------------------------------------------------------------------------
# printing


def _mono_str(m):
    parts = []
    for a, e in sorted(m, key=lambda t: atom_sort_key(t[0])):
        name = atom_name(a)
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)


def _poly_str(p) -> str:
    from .scalar import scalar_str

    if not p:
        return "0"
    items = sorted(p.items(), key=lambda t: (sum(e for _, e in t[0]), _mono_display_key(t[0])), reverse=True)
    out = []
    for m, c in items:
        neg = False
        if isinstance(c, _MPC):
            z = complex(c)
            if z.imag == 0 and z.real < 0:
                neg = True
                z = -z
            cs = scalar_str(z)
        else:
            if c < 0:
                neg = True
                c = -c
            cs = scalar_str(c)
        ms = _mono_str(m)
        if ms:
            body = ms if (cs == "1") else f"{cs}*{ms}"
        else:
            body = cs
        if not out:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def _clear_fractions(n, d):
    """Scale numerator and denominator polynomials to integer coefficients."""
    from math import gcd

    coeffs = list(n.values()) + list(d.values())
    if any(isinstance(c, _MPC) for c in coeffs):
        return n, d
    lcm = 1
    for c in coeffs:
        q = int(c.denominator)
        lcm = lcm * q // gcd(lcm, q)
    n = {m: c * lcm for m, c in n.items()}
    d = {m: c * lcm for m, c in d.items()}
    g = 0
    for c in list(n.values()) + list(d.values()):
        g = gcd(g, int(c.numerator))
    if g > 1:
        n = {m: c / g for m, c in n.items()}
        d = {m: c / g for m, c in d.items()}
    return n, d


def _to_str(e: Expr) -> str:
    n, d = e.numerator_denominator()
    if d.num == {(): 1}:
        return _poly_str(n.num)
    nn, dd = _clear_fractions(n.num, d.num)
    if dd == {(): 1}:
        return _poly_str(nn)
    return f"({_poly_str(nn)})/({_poly_str(dd)})"
