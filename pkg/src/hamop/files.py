"""Operator and substitution files.

Operator file::

    # comment
    param a = 1/2
    param k
    kmax 30
    -1/4*u^2 Dx^5
    u_1 Dx^1 sym

A plain line ``c Dx^k`` contributes ``c o D^k``; a ``sym`` line contributes
``c o D^k + D^k o c``.  ``Dx`` alone means ``Dx^1``; a bare expression is
``Dx^0``.

Substitution file: two lines ``x = ...`` and ``u = ...`` in the new
coordinates ``y, v, v_k``.  Writing the left-hand sides as ``y`` and ``v``
swaps the roles of the letters: the right-hand sides are then read in
``x, u, u_k``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import expr as E
from .diffop import DiffOp, from_symmetrized
from .expr import Expr
from .parser import ParseError, parse
from .transform import Substitution

__all__ = [
    "OperatorFile",
    "Term",
    "parse_operator_file",
    "format_operator",
    "read_operator",
    "parse_substitution_file",
    "format_substitution",
]

_PARAM_RE = re.compile(r"^param\s+([A-Za-z_][A-Za-z0-9_]*)\s*(?:=\s*(.+))?$")
_KMAX_RE = re.compile(r"^kmax\s+(\d+)$")
_TERM_RE = re.compile(r"^(?P<coeff>.*?)\s*\bDx(?:\s*\^\s*(?P<k>\d+))?(?:\s+(?P<sym>sym))?\s*$")
_RESERVED = {"x", "u", "I", "Dx", "sym", "param", "kmax"} | set(E.KERNELS)


@dataclass(frozen=True)
class Term:
    coeff: str
    power: int
    symmetrized: bool = False


@dataclass
class OperatorFile:
    params: dict = field(default_factory=dict)  # name -> value Expr or None
    kmax: int | None = None
    terms: list = field(default_factory=list)
    operator: DiffOp | None = field(default=None, repr=False)


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _reraise(exc: ParseError, lineno: int, offset: int = 0):
    raise ParseError(exc.message, exc.column + offset, lineno) from exc


def parse_operator_file(text: str) -> OperatorFile:
    out = OperatorFile()
    parts: list = []
    kmax_cm = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        offset = len(raw) - len(raw.lstrip())
        m = _PARAM_RE.match(line)
        if m:
            name, val = m.group(1), m.group(2)
            if name in _RESERVED or re.fullmatch(r"u_?\d*|w\d+_\d+", name):
                raise ParseError(f"reserved name {name!r}", offset + 7, lineno)
            if name in out.params:
                raise ParseError(f"parameter {name!r} declared twice", offset + 7, lineno)
            value = None
            if val is not None:
                try:
                    value = parse(val, params=dict(out.params))
                except ParseError as exc:
                    _reraise(exc, lineno, offset + m.start(2))
                if not value.is_constant() and value.free_atoms() - {E.I_ID}:
                    raise ParseError(f"parameter {name!r} must have a numeric value", offset + m.start(2) + 1,
                                     lineno)
            out.params[name] = value
            continue
        m = _KMAX_RE.match(line)
        if m:
            if out.terms:
                raise ParseError("kmax must precede the operator terms", offset + 1, lineno)
            out.kmax = int(m.group(1))
            continue
        m = _TERM_RE.match(line)
        coeff, k, sym = (m.group("coeff"), int(m.group("k") or 1), bool(m.group("sym"))) if m else (line, 0, False)
        if not coeff:
            coeff = "1"
        out.terms.append(Term(coeff, k, sym))
        parts.append((coeff, k, sym, lineno, offset))
    if not parts:
        raise ParseError("operator file has no terms", 1, max(1, len(text.splitlines())))
    if out.kmax is not None:
        kmax_cm = E.kmax(out.kmax)
        kmax_cm.__enter__()
    try:
        op = DiffOp()
        for coeff, k, sym, lineno, offset in parts:
            try:
                c = parse(coeff, params=out.params)
            except ParseError as exc:
                _reraise(exc, lineno, offset)
            except E.JetOrderError as exc:
                raise ParseError(str(exc), offset + 1, lineno) from exc
            for a in c.free_atoms():
                if E.atom_key(a)[0] == "w":
                    raise ParseError("test-function jets are not allowed in operator files", offset + 1, lineno)
            op = op + (from_symmetrized([(c, k)]) if sym else DiffOp({k: c}))
    finally:
        if kmax_cm is not None:
            kmax_cm.__exit__(None, None, None)
    out.operator = op
    return out


def read_operator(path) -> tuple:
    """``(DiffOp, OperatorFile)`` read from ``path``."""
    with open(path, encoding="utf-8") as fh:
        f = parse_operator_file(fh.read())
    return f.operator, f


def _collect_params(op: DiffOp) -> list:
    names = set()
    for p in op.coeffs.values():
        for a in p.atoms():
            key = E.atom_key(a)
            if key[0] == "p":
                names.add(key[1])
            elif key[0] == "f":
                raise ValueError("operators with unknown functions cannot be written to a file")
            elif key[0] == "w":
                raise ValueError("operators with test-function jets cannot be written to a file")
    return sorted(names)


def format_operator(op: DiffOp, header: str | None = None, kmax: int | None = None) -> str:
    """Normal-form operator file; ``parse_operator_file`` reproduces ``op`` exactly."""
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"param {n}" for n in _collect_params(op))
    if kmax is not None:
        lines.append(f"kmax {kmax}")
    if op.is_zero():
        lines.append("0 Dx^0")
    for k, p in op.terms():
        lines.append(f"{p.to_str()} Dx^{k}")
    return "\n".join(lines) + "\n"


_V_RE = re.compile(r"^v(?:_?(\d+))?$")
_UU_RE = re.compile(r"^u(?:_?(\d+))?$")


def _swap_namespace(from_letters: str):
    """Resolve the new-coordinate letters onto the internal jet atoms."""
    jet_re = _V_RE if from_letters == "yv" else _UU_RE
    indep = "y" if from_letters == "yv" else "x"
    forbidden = {"x", "u"} if from_letters == "yv" else {"y", "v"}

    def ns(name):
        if name == indep:
            return E.X
        m = jet_re.match(name)
        if m:
            return E.U(int(m.group(1) or 0))
        if name in forbidden or (_UU_RE.match(name) if from_letters == "yv" else _V_RE.match(name)):
            raise ParseError(f"{name!r} is an old coordinate and cannot appear on a right-hand side")
        return None

    return ns


def parse_substitution_file(text: str, params=None) -> Substitution:
    rhs: dict = {}
    lhs_letters = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        offset = len(raw) - len(raw.lstrip())
        m = re.match(r"^([A-Za-z_]\w*)\s*=\s*(.*)$", line)
        if not m or m.group(1) not in ("x", "u", "y", "v"):
            raise ParseError("expected 'x = ...' or 'u = ...'", offset + 1, lineno)
        name = m.group(1)
        letters = "xu" if name in ("x", "u") else "yv"
        if lhs_letters is None:
            lhs_letters = letters
        elif letters != lhs_letters:
            raise ParseError("left-hand sides mix x/u with y/v", offset + 1, lineno)
        key = "x" if name in ("x", "y") else "u"
        if key in rhs:
            raise ParseError(f"{name!r} assigned twice", offset + 1, lineno)
        ns = _swap_namespace("yv" if letters == "xu" else "xu")
        try:
            rhs[key] = parse(m.group(2), params=params if params is not None else {}, namespace=ns)
        except ParseError as exc:
            _reraise(exc, lineno, offset + m.start(2))
        except E.JetOrderError as exc:
            raise ParseError(str(exc), offset + m.start(2) + 1, lineno) from exc
    if not rhs:
        raise ParseError("substitution file is empty", 1, 1)
    return Substitution(rhs.get("x"), rhs.get("u"))


def format_substitution(s: Substitution) -> str:
    def conv(e: Expr) -> str:
        text = e.to_str()
        return re.sub(r"\bu_(\d+)\b", r"v_\1", re.sub(r"\bu\b", "v", re.sub(r"\bx\b", "y", text)))

    return f"x = {conv(s.phi)}\nu = {conv(s.psi)}\n"
