"""Subset-function sequences, weighted sums, ratio series and skew products."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import fsum
from numbers import Rational
from typing import Any, Callable, Sequence

import numpy as np

from ..boundary import (
    BoundaryPrefix,
    CylinderFunction,
    horoball,
    horoball_block,
    sum_block,
    tail_cocycle,
)
from ..free_group import ReducedWord, nonbacktracking_array

__all__ = [
    "SubsetFunctionSeq",
    "FunctionSequence",
    "HoroballSequence",
    "SkewSequence",
    "RatioRecord",
    "RatioSeries",
    "RatioDegeneracyError",
    "CocycleAuditError",
    "CapabilityError",
    "accumulate",
    "weighted_sum",
    "ratio_series",
    "skew_extend",
]


class RatioDegeneracyError(ZeroDivisionError):
    def __init__(self, point, n: int):
        super().__init__(f"denominator vanishes at point {point!r}, n={n}")
        self.point = point
        self.n = n


class CocycleAuditError(ValueError):
    pass


class CapabilityError(RuntimeError):
    pass


def accumulate(terms) -> Any:
    """Exact sum when every term is rational, otherwise a compensated float sum."""
    terms = list(terms)
    if all(isinstance(t, Rational) for t in terms):
        return sum(terms, 0)
    return fsum(float(t) for t in terms)


class SubsetFunctionSeq:
    """A sequence n -> F_n(b) of finite windows inside the class of b.

    ``members(b, n)`` returns ``(b', D(b', b))`` pairs.  Subclasses set
    ``exact`` when every weight is an int or Fraction.
    """

    exact: bool = False
    enumerable: bool = True

    def members(self, b, n: int) -> list[tuple[Any, Any]]:
        raise NotImplementedError

    def window(self, b, n: int) -> set:
        return {p for p, _ in self.members(b, n)}

    def contains(self, b, n: int, p) -> bool:
        return p in self.window(b, n)

    def compare_windows(self, b, b2, n: int) -> tuple[bool, bool]:
        """(equal, intersecting) for the windows of ``b`` and ``b2`` at ``n``."""
        s, s2 = self.window(b, n), self.window(b2, n)
        return s == s2, bool(s & s2)

    def weighted_sum(self, u: Callable, b, n: int, *, positive: bool = False):
        if not self.enumerable:
            raise CapabilityError(f"{type(self).__name__} cannot enumerate windows")
        terms = []
        for p, d in self.members(b, n):
            val = u(p)
            if positive and not val > 0:
                raise ValueError(f"function is not strictly positive at {p!r}")
            terms.append(val * d)
        return accumulate(terms)


class FunctionSequence(SubsetFunctionSeq):
    """Wrap an evaluator ``(b, n) -> [(b', D(b', b)), ...]``."""

    def __init__(self, evaluator: Callable, *, exact: bool = False, name: str = ""):
        self._evaluator = evaluator
        self.exact = exact
        self.name = name

    def members(self, b, n):
        return list(self._evaluator(b, n))


@lru_cache(maxsize=64)
def _prefix_codes(rank: int, n: int, excluded: int) -> np.ndarray:
    block = nonbacktracking_array(rank, n, excluded).astype(np.int64)
    codes = np.zeros(len(block), dtype=np.int64)
    for j in range(n):
        codes = codes * (2 * rank) + block[:, j]
    codes.setflags(write=False)
    return codes


class HoroballSequence(SubsetFunctionSeq):
    """The horoballs B_n(xi): points agreeing with xi beyond coordinate n.

    The Markov measure is invariant under the tail relation, so every weight
    is exactly 1.  With ``shell=True`` only members at distance exactly 2n
    are kept (the sphere variant; exploratory only).
    """

    exact = True

    def __init__(self, rank: int, *, shell: bool = False):
        self.rank = rank
        self.shell = shell

    def _block(self, xi: BoundaryPrefix, n: int) -> np.ndarray:
        block = horoball_block(xi, n)
        if self.shell and n > 0:
            block = block[block[:, -1] != xi.letter(n - 1)]
        return block

    def members(self, xi: BoundaryPrefix, n: int):
        return [(xi.with_prefix(row), 1) for row in self._block(xi, n).tolist()]

    def window_codes(self, xi: BoundaryPrefix, n: int, depth: int) -> np.ndarray:
        """Sorted integer codes of the first ``depth >= n`` letters of each member."""
        width = 2 * self.rank
        if self.shell:
            block = self._block(xi, n).astype(np.int64)
            codes = np.zeros(len(block), dtype=np.int64)
            for j in range(n):
                codes = codes * width + block[:, j]
        else:
            # rows come in lexicographic order, so the codes are already sorted
            codes = _prefix_codes(self.rank, n, xi.letter(n) ^ 1)
        tail = 0
        for c in xi.letters(depth, start=n):
            tail = tail * width + c
        return np.sort(codes * width ** (depth - n) + tail)

    def _code_depth(self, *points) -> int:
        depth = max(len(p.head) for p in points)
        if (2 * self.rank) ** max(depth, 1) >= 2**62:
            raise CapabilityError("window too deep for integer codes")
        return depth

    def contains(self, xi, n, p):
        if not xi.tail_equivalent(p):
            return False
        depth = max(n, self._code_depth(xi, p))
        codes = self.window_codes(xi, n, depth)
        width = 2 * self.rank
        code = 0
        for c in p.letters(depth):
            code = code * width + c
        i = np.searchsorted(codes, code)
        return bool(i < len(codes) and codes[i] == code)

    def compare_windows(self, xi, eta, n):
        # points with different tails never coincide, so such windows are disjoint
        if not xi.tail_equivalent(eta):
            return False, False
        depth = max(n, self._code_depth(xi, eta))
        a = self.window_codes(xi, n, depth)
        b = self.window_codes(eta, n, depth)
        if np.array_equal(a, b):
            return True, len(a) > 0
        return False, len(np.intersect1d(a, b, assume_unique=True)) > 0

    def members_with_cocycle(self, xi: BoundaryPrefix, n: int):
        """``(eta, g)`` pairs with ``g eta = xi``."""
        if self.shell:
            keep = {tuple(r) for r in self._block(xi, n).tolist()}
            return [(eta, g) for eta, g in horoball(xi, n).members if eta.letters(n) in keep]
        return horoball(xi, n).members

    def cocycle(self, eta: BoundaryPrefix, xi: BoundaryPrefix) -> ReducedWord:
        return tail_cocycle(eta, xi)

    def weighted_sum(self, u, xi, n, *, positive: bool = False):
        if isinstance(u, CylinderFunction):
            values = u.on_block(self._block(xi, n), xi)
            if positive and not (values > 0).all():
                raise ValueError("function is not strictly positive on the window")
            return sum_block(values)
        return super().weighted_sum(u, xi, n, positive=positive)


class SkewSequence(SubsetFunctionSeq):
    """F^alpha_n(b, x) = {(b', alpha(b', b) x) : b' in F_n(b)}.

    The weight of ``(b', x')`` is ``D(b', b) * rn(alpha(b', b), x)`` where
    ``rn(g, x)`` is the derivative of the fibre measure under ``g`` at ``x``.
    Measure-preserving fibres therefore keep the base weights.
    """

    def __init__(self, base: SubsetFunctionSeq, alpha: Callable, action, *, audit: int = 3):
        self.base = base
        self.alpha = alpha
        self.action = action
        self.exact = base.exact and getattr(action, "exact", False)
        self._audit = audit

    def _audit_cocycle(self, b, pts: Sequence) -> None:
        pts = list(pts[: self._audit + 1])
        for i in range(len(pts) - 1):
            b1, b2 = pts[i], pts[i + 1]
            lhs = self.alpha(b1, b2) * self.alpha(b2, b)
            if lhs != self.alpha(b1, b):
                raise CocycleAuditError(
                    f"alpha(b1,b2) alpha(b2,b) != alpha(b1,b) for b={b!r}, b1={b1!r}, b2={b2!r}"
                )

    def members(self, point, n):
        b, x = point
        base = self.base.members(b, n)
        if self._audit:
            self._audit_cocycle(b, [p for p, _ in base])
        out = []
        for b2, d in base:
            g = self.alpha(b2, b)
            out.append(((b2, self.action.apply(g, x)), d * self.action.rn(g, x)))
        return out

    def lift(self, phi):
        """Lift a base inner automorphism to the skew product."""
        alpha, action = self.alpha, self.action

        def lifted(point):
            b, x = point
            b2 = phi(b)
            return (b2, action.apply(alpha(b2, b), x))

        lifted.order = getattr(phi, "order", 0)
        return lifted


def skew_extend(F: SubsetFunctionSeq, alpha: Callable, action) -> SkewSequence:
    return SkewSequence(F, alpha, action)


def weighted_sum(F: SubsetFunctionSeq, u: Callable, b, n: int):
    """SUM_n[u](b) = sum over b' in F_n(b) of u(b') D(b', b)."""
    return F.weighted_sum(u, b, n)


@dataclass(frozen=True)
class RatioRecord:
    n: int
    sum_u: Any
    sum_v: Any
    ratio: Any
    running_max: Any


@dataclass
class RatioSeries:
    point: Any
    records: list[RatioRecord] = field(default_factory=list)

    @property
    def ratios(self) -> list:
        return [r.ratio for r in self.records]

    @property
    def maximal(self):
        return self.records[-1].running_max if self.records else None

    def __len__(self) -> int:
        return len(self.records)


def _divide(a, b):
    if isinstance(a, Rational) and isinstance(b, Rational):
        return Fraction(a) / Fraction(b)
    return float(a) / float(b)


def ratio_series(
    F: SubsetFunctionSeq, u: Callable, v: Callable, b, n_max: int
) -> RatioSeries:
    """RATIO_n[u, v](b) for n = 0..n_max together with the running maximum of |RATIO_n|."""
    series = RatioSeries(b)
    best = None
    for n in range(n_max + 1):
        su = F.weighted_sum(u, b, n)
        sv = F.weighted_sum(v, b, n, positive=True)
        if sv == 0:
            raise RatioDegeneracyError(b, n)
        r = _divide(su, sv)
        best = abs(r) if best is None else max(best, abs(r))
        series.records.append(RatioRecord(n, su, sv, r, best))
    return series
