"""Finite measured equivalence relations with explicit windows.

These are the exact substrate for the ratio and maximal-function audits:
every class, window and weight is listed, so sums can be enumerated and
conditional expectations computed directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .automorphisms import PermutationAutomorphism
from .sequences import SubsetFunctionSeq, accumulate

__all__ = [
    "FiniteModel",
    "FiniteModelSequence",
    "oracle_conditional_expectation",
    "random_hierarchical_model",
    "interval_surrogate",
    "skew_product_model",
]


@dataclass
class FiniteModel:
    """Points ``0..P-1`` with masses, classes, and windows ``windows[n][b]``.

    Indices beyond the last level reuse the last level.
    """

    weights: list
    classes: list[tuple[int, ...]]
    windows: list[list[tuple[int, ...]]]
    labels: Optional[list] = None

    def __post_init__(self) -> None:
        P = len(self.weights)
        if any(not w > 0 for w in self.weights):
            raise ValueError("point masses must be positive")
        seen = sorted(b for c in self.classes for b in c)
        if seen != list(range(P)):
            raise ValueError("classes must partition the points")
        self._class_of = {b: i for i, c in enumerate(self.classes) for b in c}
        for level in self.windows:
            if len(level) != P:
                raise ValueError("each level needs one window per point")
            for b, win in enumerate(level):
                if any(self._class_of[p] != self._class_of[b] for p in win):
                    raise ValueError(f"window of {b} leaves its class")

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def top(self) -> int:
        return len(self.windows) - 1

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Rational) for w in self.weights)

    def window(self, b: int, n: int) -> tuple[int, ...]:
        return self.windows[min(n, self.top)][b]

    def class_of(self, b: int) -> tuple[int, ...]:
        return self.classes[self._class_of[b]]

    def D(self, b2: int, b: int):
        w = self.weights
        if isinstance(w[b2], Rational) and isinstance(w[b], Rational):
            return Fraction(w[b2]) / Fraction(w[b])
        return w[b2] / w[b]

    def sequence(self) -> FiniteModelSequence:
        return FiniteModelSequence(self)

    def preimage_count(self, b: int, n: int) -> int:
        return sum(1 for b2 in range(self.size) if b in self.window(b2, n))

    @classmethod
    def from_sequence(
        cls,
        F: SubsetFunctionSeq,
        points: Sequence,
        mass: Callable,
        n_levels: int,
        *,
        check_weights: bool = True,
    ) -> FiniteModel:
        """Materialise ``F`` on a finite closed set of points.

        The classes are read off the windows at the top level.  With
        ``check_weights`` the sequence's weights must equal mass ratios.
        """
        index = {p: i for i, p in enumerate(points)}
        weights = [mass(p) for p in points]
        windows = []
        for n in range(n_levels + 1):
            level = []
            for i, p in enumerate(points):
                win = []
                for q, d in F.members(p, n):
                    if q not in index:
                        raise ValueError(f"window of {p!r} leaves the point set")
                    j = index[q]
                    if check_weights:
                        ratio = (
                            Fraction(weights[j]) / Fraction(weights[i])
                            if isinstance(d, Rational)
                            else weights[j] / weights[i]
                        )
                        if (isinstance(d, Rational) and ratio != d) or (
                            not isinstance(d, Rational) and abs(ratio - d) > 1e-12 * abs(d)
                        ):
                            raise ValueError(f"weight of {q!r} in window of {p!r} is not a mass ratio")
                    win.append(j)
                level.append(tuple(sorted(win)))
            windows.append(level)
        classes = sorted({w for w in windows[-1]})
        return cls(weights, classes, windows, labels=list(points))


class FiniteModelSequence(SubsetFunctionSeq):
    """The windows of a finite model with D(b', b) = w(b') / w(b)."""

    def __init__(self, model: FiniteModel):
        self.model = model
        self.exact = model.exact

    def members(self, b, n):
        m = self.model
        return [(p, m.D(p, b)) for p in m.window(b, n)]


def oracle_conditional_expectation(model: FiniteModel, u: Sequence, v: Sequence) -> list:
    """Class-wise weighted mean of u/v under the measure v dnu, one value per point."""
    if any(not x > 0 for x in v):
        raise ValueError("v must be strictly positive")
    w = model.weights
    out: list[Any] = [None] * model.size
    for cls in model.classes:
        num = accumulate(u[b] * w[b] for b in cls)
        den = accumulate(v[b] * w[b] for b in cls)
        val = Fraction(num) / Fraction(den) if isinstance(num, Rational) and isinstance(den, Rational) else num / den
        for b in cls:
            out[b] = val
    return out


# random models


def _random_mass(rng: np.random.Generator, exact: bool):
    if exact:
        return Fraction(int(rng.integers(1, 10)), int(rng.integers(1, 10)))
    return float(rng.uniform(0.1, 2.0))


def random_hierarchical_model(
    rng: np.random.Generator,
    n_points: int,
    *,
    max_classes: int = 4,
    exact: bool = False,
) -> FiniteModel:
    """Nested partitions refining a random class partition.

    Level 0 is singletons; each level merges random groups of the previous
    blocks until every class is a single block.  Windows of nested
    partitions are anchored and equal-or-disjoint by construction.
    """
    n_classes = int(rng.integers(1, min(max_classes, n_points) + 1))
    labels = rng.permutation(np.arange(n_points) % n_classes)
    classes = [tuple(int(b) for b in np.flatnonzero(labels == c)) for c in range(n_classes)]
    blocks = {c: [(b,) for b in cls] for c, cls in enumerate(classes)}
    levels = []
    while True:
        levels.append([blk for c in blocks for blk in blocks[c]])
        if all(len(bs) == 1 for bs in blocks.values()):
            break
        for c, bs in blocks.items():
            if len(bs) == 1:
                continue
            order = rng.permutation(len(bs))
            merged, i = [], 0
            while i < len(bs):
                k = int(rng.integers(2, 4))
                group = [bs[j] for j in order[i : i + k]]
                merged.append(tuple(sorted(p for blk in group for p in blk)))
                i += k
            blocks[c] = merged
    windows = []
    for level in levels:
        win = [None] * n_points
        for blk in level:
            for b in blk:
                win[b] = blk
        windows.append(win)
    weights = [_random_mass(rng, exact) for _ in range(n_points)]
    return FiniteModel(weights, sorted(classes), windows)


def block_automorphism(model: FiniteModel, rng: np.random.Generator) -> PermutationAutomorphism:
    """Permute the points inside one window of a nested model.

    The permutation fixes every window from the chosen level on, so its
    order is that level.
    """
    n = int(rng.integers(1, model.top + 1)) if model.top else 0
    blocks = sorted(set(model.windows[n]), key=len, reverse=True)
    blk = blocks[int(rng.integers(0, len(blocks)))]
    perm = list(range(model.size))
    shuffled = list(rng.permutation(list(blk)))
    for src, dst in zip(blk, shuffled):
        perm[src] = int(dst)
    return PermutationAutomorphism(perm, n)


def interval_surrogate(length: int, n_levels: int) -> FiniteModel:
    """Cyclic stand-in for the shift on the integers with windows {k, ..., k+n}."""
    if n_levels >= length:
        raise ValueError("windows must stay shorter than the cycle")
    windows = [
        [tuple(sorted((k + j) % length for j in range(n + 1))) for k in range(length)]
        for n in range(n_levels + 1)
    ]
    return FiniteModel([Fraction(1)] * length, [tuple(range(length))], windows)


def skew_product_model(model: FiniteModel, action, h: Sequence) -> FiniteModel:
    """The skew product of ``model`` by a finite action along a coboundary cocycle.

    ``alpha(b', b) = h[b'] h[b]^-1``, so the window of ``(b, x)`` is
    ``{(b', h[b'] h[b]^-1 x) : b' in F_n(b)}`` and the mass of ``(b, x)`` is
    ``w(b) lambda(x)``.  Point ``(b, x)`` gets index ``b * k + x``.
    """
    k = action.size
    image = [[action.apply(g, x) for x in range(k)] for g in h]
    back = [[action.apply(~g, x) for x in range(k)] for g in h]
    weights = [w * lam for w in model.weights for lam in action.weights]
    if not all(isinstance(w, Rational) for w in model.weights):
        weights = [float(w) for w in weights]

    def lift(win, b, x):
        y = back[b][x]
        return tuple(sorted(b2 * k + image[b2][y] for b2 in win))

    windows = [
        [lift(level[b], b, x) for b in range(model.size) for x in range(k)]
        for level in model.windows
    ]
    classes = sorted(set(windows[-1]))
    labels = [(b, x) for b in range(model.size) for x in range(k)]
    return FiniteModel(weights, classes, windows, labels=labels)
