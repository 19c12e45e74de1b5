"""Randomized zero testing of expressions.

Points are drawn per coordinate from ``[-2, -0.5] U [0.5, 2]``; each trial
has its own seed derived from ``(master_seed, trial_index)``, so the verdict
does not depend on evaluation order.  All trials are evaluated together
with numpy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .expr import Expr, JetPoint

__all__ = [
    "ZeroKind",
    "ZeroVerdict",
    "probabilistic_zero",
    "zero_test",
    "sample_point",
    "DEFAULT_TRIALS",
    "DEFAULT_TOL",
    "DEFAULT_SEED",
]

DEFAULT_TRIALS = 64
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 0xC0FFEE

_CHUNK = 16384


class ZeroKind(str, enum.Enum):
    EXACT_ZERO = "ExactZero"
    ZERO = "Zero"
    NONZERO = "NonZero"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ZeroVerdict:
    kind: ZeroKind
    trials: int = 0
    singular: int = 0
    max_residual: float = 0.0
    witness: dict | None = None
    exact: bool = False
    note: str = ""

    @property
    def is_zero(self) -> bool:
        return self.kind in (ZeroKind.EXACT_ZERO, ZeroKind.ZERO)

    @property
    def inconclusive(self) -> bool:
        return self.kind is ZeroKind.INCONCLUSIVE

    def as_dict(self) -> dict:
        out = {
            "verdict": self.kind.value,
            "trials": self.trials,
            "singular": self.singular,
            "max_residual": float(self.max_residual),
            "exact": self.exact,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.note:
            out["note"] = self.note
        return out


def _sample_atoms(e: Expr):
    out = []
    for a in e.free_atoms():
        tag = E.atom_key(a)[0]
        if tag in ("I", "k"):
            continue
        out.append(a)
    return sorted(out, key=E.atom_sort_key)


def _draw(seed: int, trial: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, trial]))
    mag = rng.uniform(0.5, 2.0, size=n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return mag * sign


def sample_point(e: Expr, seed: int, trial: int) -> JetPoint:
    """The JetPoint used for a given trial (same values as the vectorized probe)."""
    atoms = _sample_atoms(e)
    vals = _draw(seed, trial, len(atoms))
    constraints = tuple((a, 0.5) for a in atoms)
    return JetPoint({a: complex(v) for a, v in zip(atoms, vals)}, constraints)


class _Vectorized:
    """Evaluate expressions at many points at once (complex128)."""

    def __init__(self, values: dict, ntrials: int):
        self.values = values
        self.n = ntrials
        self.bad = np.zeros(ntrials, dtype=bool)

    def atom(self, aid):
        v = self.values.get(aid)
        if v is not None:
            return v
        key = E.atom_key(aid)
        if key[0] == "I":
            v = np.full(self.n, 1j)
        elif key[0] == "k":
            arg, _ = self.expr(key[2])
            name = key[1]
            with np.errstate(all="ignore"):
                if name == "sin":
                    v = np.sin(arg)
                elif name == "cos":
                    v = np.cos(arg)
                elif name == "exp":
                    v = np.exp(arg)
                elif name == "ln":
                    self.bad |= (arg.imag == 0) & (arg.real <= 0)
                    v = np.log(arg)
                elif name == "sqrt":
                    v = np.sqrt(arg)
                else:  # pragma: no cover
                    raise ValueError(name)
        else:
            raise KeyError(f"no value for {E.atom_name(aid)}")
        self.values[aid] = v
        return v

    def poly(self, p):
        """Return (sum, max |term|) over the polynomial's terms."""
        items = list(p.items())
        total = np.zeros(self.n, dtype=complex)
        scale = np.zeros(self.n)
        if not items:
            return total, scale
        atoms = sorted({a for m, _ in items for a, _ in m})
        for start in range(0, len(items), _CHUNK):
            chunk = items[start:start + _CHUNK]
            coeffs = np.array([complex(c) for _, c in chunk])
            acc = np.repeat(coeffs[:, None], self.n, axis=1)
            for a in atoms:
                exps = np.array([dict(m).get(a, 0) for m, _ in chunk])
                if not exps.any():
                    continue
                lo, hi = int(exps.min()), int(exps.max())
                base = self.atom(a)
                with np.errstate(all="ignore"):
                    table = np.stack([base ** k if k else np.ones(self.n, dtype=complex) for k in range(lo, hi + 1)])
                acc *= table[exps - lo]
            total += acc.sum(axis=0)
            scale = np.maximum(scale, np.abs(acc).max(axis=0))
        return total, scale

    def expr(self, e: Expr):
        num, scale = self.poly(e.num)
        if e.den:
            den, _ = self.poly(E._expand_den(e.den))
            with np.errstate(all="ignore"):
                small = np.abs(den) < 1e-300
                self.bad |= small
                den = np.where(small, 1.0, den)
                return num / den, scale / np.abs(den)
        return num, scale


def probabilistic_zero(e: Expr, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
                       seed: int = DEFAULT_SEED) -> ZeroVerdict:
    """Decide whether ``e`` vanishes identically, by exact form then sampling."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    e = E.normalize(e)
    if e.is_zero():
        return ZeroVerdict(ZeroKind.EXACT_ZERO, exact=True)
    atoms = _sample_atoms(e)
    draws = np.array([_draw(seed, t, len(atoms)) for t in range(trials)]).reshape(trials, len(atoms))
    values = {a: draws[:, i].astype(complex) for i, a in enumerate(atoms)}
    vec = _Vectorized(values, trials)
    val, scale = vec.expr(e)
    mag = np.abs(val)
    bad = vec.bad | ~np.isfinite(mag) | ~np.isfinite(scale)
    ratio = np.where(bad, 0.0, mag / (1.0 + np.where(bad, 0.0, scale)))
    n_bad = int(bad.sum())
    if n_bad == trials:
        return ZeroVerdict(ZeroKind.INCONCLUSIVE, trials=trials, singular=n_bad,
                           note="every trial point was singular")
    fails = np.nonzero((~bad) & (mag > tol * (1.0 + scale)))[0]
    max_res = float(ratio.max())
    if len(fails):
        t = int(fails[0])
        witness = {E.atom_name(a): float(draws[t, i]) for i, a in enumerate(atoms)}
        witness["|value|"] = float(mag[t])
        return ZeroVerdict(ZeroKind.NONZERO, trials=trials, singular=n_bad,
                           max_residual=max_res, witness=witness)
    return ZeroVerdict(ZeroKind.ZERO, trials=trials, singular=n_bad, max_residual=max_res)


def zero_test(e: Expr, trials: int = DEFAULT_TRIALS, tol: float = DEFAULT_TOL,
              seed: int = DEFAULT_SEED) -> ZeroVerdict:
    """Exact decision when possible, probe otherwise.

    A nonzero canonical form without floats or kernels is definitely
    nonzero; the probe is still run to report a witness point.
    """
    e = E.normalize(e)
    if e.is_zero():
        return ZeroVerdict(ZeroKind.EXACT_ZERO, exact=True)
    v = probabilistic_zero(e, trials, tol, seed)
    if e.is_exact():
        if v.kind is ZeroKind.NONZERO:
            return ZeroVerdict(ZeroKind.NONZERO, v.trials, v.singular, v.max_residual, v.witness, exact=True)
        return ZeroVerdict(ZeroKind.NONZERO, v.trials, v.singular, v.max_residual, None, exact=True,
                           note="canonical form is nonzero; no sampled witness exceeded tolerance")
    return v
