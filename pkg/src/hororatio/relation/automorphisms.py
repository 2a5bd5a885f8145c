"""Finite-order inner automorphisms and the u_phi construction."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..boundary import BoundaryPrefix, CylinderFunction
from ..free_group import nonbacktracking_array

__all__ = [
    "InnerAutomorphismSpec",
    "PermutationAutomorphism",
    "random_automorphism",
    "u_phi",
]


class InnerAutomorphismSpec:
    """Rewrites the first ``order`` letters of a boundary point by a fixed bijection.

    The bijection acts on reduced words of length ``order`` and fixes the last
    letter, so images stay non-backtracking and the tail is untouched.
    """

    def __init__(self, rank: int, order: int, table: dict[tuple[int, ...], tuple[int, ...]]):
        if order < 1:
            raise ValueError("order must be at least 1")
        domain = {tuple(r) for r in nonbacktracking_array(rank, order).tolist()}
        if set(table) != domain:
            raise ValueError("table must be defined on every reduced word of length order")
        if set(table.values()) != domain:
            raise ValueError("table is not a bijection of reduced words")
        for w, img in table.items():
            if img[-1] != w[-1]:
                raise ValueError(f"image of {w} changes the last letter")
        self.rank = rank
        self.order = order
        self.table = dict(table)

    def __call__(self, xi: BoundaryPrefix) -> BoundaryPrefix:
        return xi.with_prefix(self.table[xi.letters(self.order)])

    def inverse(self) -> InnerAutomorphismSpec:
        return InnerAutomorphismSpec(
            self.rank, self.order, {img: w for w, img in self.table.items()}
        )

    def image_prefix(self, prefix: Sequence[int]) -> tuple[int, ...]:
        m = self.order
        return self.table[tuple(prefix[:m])] + tuple(prefix[m:])

    def __repr__(self) -> str:
        moved = sum(1 for w, img in self.table.items() if w != img)
        return f"InnerAutomorphismSpec(rank={self.rank}, order={self.order}, moved={moved})"


def random_automorphism(rank: int, order: int, rng: np.random.Generator) -> InnerAutomorphismSpec:
    """Independent random permutation of the words sharing each final letter."""
    words = [tuple(r) for r in nonbacktracking_array(rank, order).tolist()]
    table = {}
    for last in range(2 * rank):
        group = [w for w in words if w[-1] == last]
        perm = rng.permutation(len(group))
        for w, j in zip(group, perm):
            table[w] = group[j]
    return InnerAutomorphismSpec(rank, order, table)


class PermutationAutomorphism:
    """A point permutation of a finite model, with the order it claims."""

    def __init__(self, perm: Sequence[int], order: int):
        self.perm = list(perm)
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError("not a permutation")
        self.order = order

    def __call__(self, b: int) -> int:
        return self.perm[b]


def u_phi(u, phi, D: Callable | None = None):
    """u_phi(b) = u(b) - u(phi(b)) D(phi(b), b).

    For a cylinder function and a boundary automorphism the result is again a
    cylinder function (D is identically 1 there); otherwise a plain callable.
    """
    if isinstance(u, CylinderFunction) and isinstance(phi, InnerAutomorphismSpec) and D is None:
        depth = max(u.depth, phi.order)

        def f(prefix):
            return u.value(prefix) - u.value(phi.image_prefix(prefix))

        return CylinderFunction.from_callable(u.rank, depth, f)
    if D is None:
        raise ValueError("a Radon-Nikodym cocycle D is required for general u_phi")

    def value(b):
        pb = phi(b)
        return u(b) - u(pb) * D(pb, b)

    return value
