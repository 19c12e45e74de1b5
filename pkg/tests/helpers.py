"""Random differential functions for property tests."""

from __future__ import annotations

import random

from hamop import expr as E


def random_diff_function(rng: random.Random, max_order: int = 3, terms: int = 3, with_x: bool = True,
                         rational: bool = True, kernels: bool = False) -> E.Expr:
    atoms = [E.U(k) for k in range(max_order + 1)]
    if with_x:
        atoms.append(E.X)
    acc = E.ZERO
    for _ in range(terms):
        t = E.const(E.mpq(rng.randint(-5, 5) or 1, rng.randint(1, 4)))
        for _ in range(rng.randint(1, 3)):
            t = t * rng.choice(atoms) ** rng.randint(1, 3)
        acc = acc + t
    if kernels and rng.random() < 0.5:
        acc = acc + E.kernel(rng.choice(("sin", "cos", "exp")), rng.choice(atoms[:2]))
    if rational and rng.random() < 0.4:
        acc = acc / (rng.choice(atoms[1:max_order + 1] or atoms) ** 2 + 1)
    return acc
