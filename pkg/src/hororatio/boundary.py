"""The boundary of the free group, its Markov measure and the boundary action.

A boundary point is a finite ``head`` of letters followed by the letters of a
shared, lazily drawn :class:`TailSource`, read from index ``len(head) + shift``
onward.  Letter ``i`` of the point is therefore ``head[i]`` for
``i < len(head)`` and ``source[i + shift]`` otherwise.

Two points built on the same source are tail equivalent exactly when their
shifts agree, and acting by ``g`` moves the shift by ``2k - |g|``, which is
also the exponent of the Radon-Nikodym derivative.  Points on different
sources are treated as not tail equivalent (a null event under the Markov
measure).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import fsum
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .free_group import (
    ReducedWord,
    letter_token,
    nonbacktracking_array,
    parse_letter,
)

__all__ = [
    "TailSource",
    "BoundaryPrefix",
    "Cylinder",
    "CylinderFunction",
    "HorosphericalBall",
    "ActResult",
    "DegeneratePairError",
    "cylinder_measure",
    "sample_boundary",
    "act",
    "busemann",
    "common_prefix_length",
    "horosphere_contains",
    "horoball",
    "horoball_block",
    "tail_cocycle",
    "geodesic_J",
    "rn_value",
]

_SCAN_LIMIT = 4096


class DegeneratePairError(ValueError):
    pass


class TailSource:
    """Seeded Markov letter stream, extended on demand.

    The first letter is uniform over the ``2r`` letters (or over ``2r - 1`` if
    ``exclude`` is given), each later letter is uniform over the ``2r - 1``
    letters that do not backtrack.  Letter ``i`` depends only on the seed, so
    extending in one step or in many gives the same letters.

    Not safe for concurrent extension; pre-extend before sharing.
    """

    __slots__ = ("rank", "seed", "exclude", "_letters", "_rng")

    def __init__(self, rank: int, seed: int, exclude: Optional[int] = None):
        if rank < 1:
            raise ValueError("rank must be positive")
        self.rank = int(rank)
        self.seed = int(seed)
        self.exclude = exclude
        self._letters: list[int] = []
        self._rng = random.Random(self.seed)

    @property
    def key(self) -> tuple:
        return (self.rank, self.seed, self.exclude)

    def __len__(self) -> int:
        return len(self._letters)

    def extend(self, n: int) -> None:
        letters = self._letters
        rng = self._rng
        width = 2 * self.rank
        while len(letters) < n:
            if letters:
                forbidden = letters[-1] ^ 1
            else:
                forbidden = self.exclude
            if forbidden is None:
                letters.append(rng.randrange(width))
            else:
                j = rng.randrange(width - 1)
                letters.append(j if j < forbidden else j + 1)

    def letter(self, i: int) -> int:
        if i >= len(self._letters):
            self.extend(i + 1)
        return self._letters[i]

    def span(self, start: int, stop: int) -> tuple[int, ...]:
        if stop > len(self._letters):
            self.extend(stop)
        return tuple(self._letters[start:stop])

    def __repr__(self) -> str:
        return f"TailSource(rank={self.rank}, seed={self.seed}, exclude={self.exclude})"


class BoundaryPrefix:
    """A point of the boundary: explicit head plus a lawful seeded tail."""

    __slots__ = ("rank", "head", "source", "shift")

    def __init__(
        self,
        head: Sequence[int],
        source: TailSource,
        shift: int,
        *,
        _trusted: bool = False,
    ):
        head = tuple(head)
        if not _trusted:
            if len(head) + shift < 0:
                raise ValueError("tail would start before the beginning of its source")
            width = 2 * source.rank
            for i, c in enumerate(head):
                if not 0 <= c < width:
                    raise ValueError(f"letter code {c} out of range")
                if i and c == head[i - 1] ^ 1:
                    raise ValueError("head backtracks")
            if head and head[-1] ^ 1 == source.letter(len(head) + shift):
                raise ValueError("head backtracks into its tail")
        # canonical form: drop trailing head letters already supplied by the tail
        while head and len(head) - 1 + shift >= 0 and head[-1] == source.letter(
            len(head) - 1 + shift
        ):
            head = head[:-1]
        self.rank = source.rank
        self.head = head
        self.source = source
        self.shift = int(shift)

    @classmethod
    def from_prefix(
        cls, rank: int, prefix: Sequence[int], seed: int
    ) -> BoundaryPrefix:
        """A point starting with ``prefix``, continued by a seeded lawful tail."""
        prefix = tuple(prefix)
        exclude = prefix[-1] ^ 1 if prefix else None
        return cls(prefix, TailSource(rank, seed, exclude), -len(prefix))

    @classmethod
    def parse(cls, text: str, rank: int, seed: int) -> BoundaryPrefix:
        text = text.strip()
        letters = () if text in ("", "e") else tuple(parse_letter(t, rank) for t in text.split("."))
        return cls.from_prefix(rank, letters, seed)

    # letters

    def letter(self, i: int) -> int:
        if i < len(self.head):
            return self.head[i]
        return self.source.letter(i + self.shift)

    def __getitem__(self, i: int) -> int:
        if i < 0:
            raise IndexError("boundary points are infinite to the right only")
        return self.letter(i)

    def letters(self, n: int, start: int = 0) -> tuple[int, ...]:
        """Letters ``start .. n-1`` (0-based)."""
        h = len(self.head)
        if n <= h:
            return self.head[start:n]
        tail = self.source.span(max(start, h) + self.shift, n + self.shift)
        return self.head[start:] + tail if start < h else tail

    def materialize(self, depth: int) -> BoundaryPrefix:
        if depth > len(self.head):
            self.source.extend(depth + self.shift)
        return self

    @property
    def depth(self) -> int:
        """Number of letters available without drawing from the source."""
        return max(len(self.head), len(self.source) - self.shift)

    # identity

    def _key(self) -> tuple:
        return (self.source.key, self.shift, self.head)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BoundaryPrefix) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def tail_equivalent(self, other: BoundaryPrefix) -> bool:
        return self.source.key == other.source.key and self.shift == other.shift

    def agreement_depth(self, other: BoundaryPrefix) -> int:
        """Smallest N with both points equal at every coordinate beyond N."""
        if not self.tail_equivalent(other):
            raise ValueError("points are not tail equivalent")
        n = max(len(self.head), len(other.head))
        while n > 0 and self.letter(n - 1) == other.letter(n - 1):
            n -= 1
        return n

    def with_prefix(self, prefix: Sequence[int]) -> BoundaryPrefix:
        """Replace the first ``len(prefix)`` letters, keeping everything after."""
        head = tuple(prefix) + self.head[len(prefix):]
        return BoundaryPrefix(head, self.source, self.shift, _trusted=True)

    def to_text(self, depth: Optional[int] = None) -> str:
        depth = self.depth if depth is None else depth
        if depth == 0:
            return "e"
        return ".".join(letter_token(c) for c in self.letters(depth))

    def __repr__(self) -> str:
        d = max(len(self.head) + 2, 6)
        return f"BoundaryPrefix({self.to_text(d)}...; seed={self.source.seed}, shift={self.shift})"


def sample_boundary(rank: int, seed: int, depth: int = 0) -> BoundaryPrefix:
    """A Markov-distributed boundary point, deterministic in ``seed``."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    return BoundaryPrefix((), TailSource(rank, seed), 0, _trusted=True).materialize(depth)


# cylinders and the Markov measure


@dataclass(frozen=True)
class Cylinder:
    rank: int
    prefix: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.prefix)

    def contains(self, xi: BoundaryPrefix) -> bool:
        return xi.letters(self.depth) == self.prefix

    def __str__(self) -> str:
        body = ".".join(letter_token(c) for c in self.prefix) or "e"
        return f"{body}@{self.rank}"

    @classmethod
    def parse(cls, text: str) -> Cylinder:
        body, _, rank = text.partition("@")
        rank = int(rank)
        body = body.strip()
        prefix = () if body in ("", "e") else tuple(parse_letter(t, rank) for t in body.split("."))
        return cls(rank, prefix)


def _is_nonbacktracking(letters: Sequence[int]) -> bool:
    return all(letters[i + 1] != letters[i] ^ 1 for i in range(len(letters) - 1))


def cylinder_measure(c: Cylinder) -> Fraction:
    """Exact Markov measure (2r)^-1 (2r-1)^-(n-1) of a depth-n cylinder."""
    if not _is_nonbacktracking(c.prefix):
        raise ValueError(f"cylinder prefix {c.prefix} backtracks")
    n = c.depth
    if n == 0:
        return Fraction(1)
    return Fraction(1, 2 * c.rank * (2 * c.rank - 1) ** (n - 1))


# the boundary action


class ActResult(NamedTuple):
    point: BoundaryPrefix
    k: int
    rn_exponent: int


def act(g: ReducedWord, xi: BoundaryPrefix) -> ActResult:
    """Apply ``g`` to ``xi`` by concatenation and cancellation.

    ``k`` is the number of cancelled letters and ``rn_exponent = 2k - |g|``,
    the exponent of (2r-1) in the derivative of the measure under ``g`` at ``xi``.
    """
    if g.rank != xi.rank:
        raise ValueError("rank mismatch")
    t = g.letters
    n = len(t)
    k = 0
    while k < n and xi.letter(k) ^ 1 == t[n - 1 - k]:
        k += 1
    head = t[: n - k] + (xi.head[k:] if k < len(xi.head) else ())
    point = BoundaryPrefix(head, xi.source, xi.shift + 2 * k - n, _trusted=True)
    return ActResult(point, k, 2 * k - n)


def rn_value(rank: int, exponent: int) -> Fraction:
    return Fraction(2 * rank - 1) ** exponent


def common_prefix_length(g: ReducedWord, xi: BoundaryPrefix) -> int:
    t = g.letters
    i = 0
    while i < len(t) and t[i] == xi.letter(i):
        i += 1
    return i


def busemann(g: ReducedWord, xi: BoundaryPrefix) -> int:
    """Horospherical level of the vertex ``g`` relative to ``xi``; 0 at ``e``."""
    return len(g) - 2 * common_prefix_length(g, xi)


def horosphere_contains(g: ReducedWord, xi: BoundaryPrefix) -> bool:
    return busemann(g, xi) == 0


# horoballs


@dataclass
class HorosphericalBall:
    center: BoundaryPrefix
    n: int
    members: list[tuple[BoundaryPrefix, ReducedWord]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def points(self) -> list[BoundaryPrefix]:
        return [eta for eta, _ in self.members]

    def point_set(self) -> frozenset[BoundaryPrefix]:
        return frozenset(eta for eta, _ in self.members)


def horoball_block(xi: BoundaryPrefix, n: int) -> np.ndarray:
    """First ``n`` letters of every member of the n-th horoball, one row each."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return nonbacktracking_array(xi.rank, n, xi.letter(n) ^ 1)


def horoball(xi: BoundaryPrefix, n: int) -> HorosphericalBall:
    """Points agreeing with ``xi`` beyond coordinate ``n``.

    Each member ``eta`` is paired with ``g`` such that ``g eta = xi``.
    """
    rows = horoball_block(xi, n)
    rank = xi.rank
    xi_n = xi.letters(n)
    members = []
    for row in rows.tolist():
        eta = xi.with_prefix(row)
        back = [c ^ 1 for c in reversed(row)]
        g = ReducedWord.from_letters(rank, xi_n + tuple(back))
        members.append((eta, g))
    return HorosphericalBall(xi, n, members)


def tail_cocycle(
    xi: BoundaryPrefix, eta: BoundaryPrefix, agreement_depth: Optional[int] = None
) -> ReducedWord:
    """The element ``g`` with ``g eta = xi`` for tail-equivalent points."""
    if not xi.tail_equivalent(eta):
        raise ValueError("points are not tail equivalent")
    top = max(len(xi.head), len(eta.head))
    if agreement_depth is None:
        agreement_depth = top
    elif agreement_depth < 0 or any(
        xi.letter(i) != eta.letter(i) for i in range(agreement_depth, top)
    ):
        raise ValueError(f"points disagree beyond depth {agreement_depth}")
    n = agreement_depth
    back = [c ^ 1 for c in reversed(eta.letters(n))]
    return ReducedWord.from_letters(xi.rank, xi.letters(n) + tuple(back))


def _first_disagreement(b: BoundaryPrefix, c: BoundaryPrefix) -> int:
    if b._key() == c._key():
        raise DegeneratePairError("b and c are the same boundary point")
    limit = max(len(b.head), len(c.head)) if b.tail_equivalent(c) else _SCAN_LIMIT
    for i in range(limit):
        if b.letter(i) != c.letter(i):
            return i
    raise DegeneratePairError(f"b and c agree on the first {limit} letters")


def geodesic_J(b: BoundaryPrefix, c: BoundaryPrefix, window: int) -> dict[int, int]:
    """Step letters of the geodesic from ``b`` to ``c``, normalised at the horosphere of ``c``.

    ``gamma(0)`` is the vertex of the geodesic at horospherical level 0
    relative to ``c``; the result maps ``n`` in ``[-window, window)`` to
    the letter ``gamma(n)^-1 gamma(n+1)``.
    """
    if window < 0:
        raise ValueError("window must be non-negative")
    if b.rank != c.rank:
        raise ValueError("rank mismatch")
    m = _first_disagreement(b, c)
    out = {}
    for n in range(-window, window):
        if n >= m:
            out[n] = c.letter(n)
        else:
            out[n] = b.letter(2 * m - n - 1) ^ 1
    return out


# functions on the boundary


class CylinderFunction:
    """A function of the first ``depth`` letters of a boundary point.

    Values live in a dense table indexed by the base-2r code of the prefix.
    Integer tables sum exactly; float tables are summed with ``math.fsum``.
    """

    def __init__(self, rank: int, depth: int, table: np.ndarray):
        width = 2 * rank
        table = np.asarray(table)
        if table.shape != (width**depth,):
            raise ValueError(f"table must have shape ({width ** depth},)")
        self.rank = rank
        self.depth = depth
        self.table = table
        self._powers = width ** np.arange(depth - 1, -1, -1, dtype=np.int64)

    @classmethod
    def constant(cls, rank: int, value=1) -> CylinderFunction:
        return cls(rank, 0, np.array([value]))

    @classmethod
    def indicator(cls, rank: int, prefix: Sequence[int]) -> CylinderFunction:
        return cls.from_values(rank, len(prefix), {tuple(prefix): 1}, default=0)

    @classmethod
    def from_values(cls, rank: int, depth: int, values: dict, default=0) -> CylinderFunction:
        width = 2 * rank
        vals = list(values.values()) + [default]
        if all(isinstance(v, (int, np.integer)) for v in vals):
            dtype = np.int64
        elif all(isinstance(v, (int, float, np.integer, np.floating)) for v in vals):
            dtype = np.float64
        else:
            dtype = object
        table = np.full(width**depth, default, dtype=dtype)
        for prefix, v in values.items():
            if len(prefix) != depth:
                raise ValueError("prefix length must equal depth")
            table[_code(prefix, width)] = v
        return cls(rank, depth, table)

    @classmethod
    def from_callable(cls, rank: int, depth: int, f) -> CylinderFunction:
        rows = nonbacktracking_array(rank, depth).tolist()
        return cls.from_values(rank, depth, {tuple(r): f(tuple(r)) for r in rows})

    def value(self, prefix: Sequence[int]):
        return _scalar(self.table[_code(prefix[: self.depth], 2 * self.rank)])

    def __call__(self, xi: BoundaryPrefix):
        return _scalar(self.table[_code(xi.letters(self.depth), 2 * self.rank)])

    def on_block(self, block: np.ndarray, xi: BoundaryPrefix) -> np.ndarray:
        """Values at the horoball members whose first letters are ``block``."""
        n = block.shape[1]
        d = self.depth
        if d <= n:
            prefixes = block[:, :d]
        else:
            tail = np.array(xi.letters(d, start=n), dtype=block.dtype)
            prefixes = np.concatenate(
                [block, np.broadcast_to(tail, (block.shape[0], d - n))], axis=1
            )
        codes = prefixes.astype(np.int64) @ self._powers if d else np.zeros(len(block), np.int64)
        return self.table[codes]

    def integral(self) -> Fraction:
        """Exact Markov integral (float table entries are converted exactly)."""
        if self.depth == 0:
            return Fraction(_scalar(self.table[0]))
        width = 2 * self.rank
        total = sum(
            Fraction(_scalar(self.table[_code(row, width)]))
            for row in nonbacktracking_array(self.rank, self.depth).tolist()
        )
        return total / (width * (width - 1) ** (self.depth - 1))

    def is_exact(self) -> bool:
        return self.table.dtype != np.float64


def _code(prefix: Iterable[int], width: int) -> int:
    code = 0
    for c in prefix:
        code = code * width + c
    return code


def _scalar(v):
    return v.item() if isinstance(v, np.generic) else v


def sum_block(values: np.ndarray):
    """Exact sum for integer/object arrays, compensated sum for floats."""
    if values.dtype == np.float64:
        return fsum(values.tolist())
    if values.dtype == object:
        return sum(values.tolist(), 0)
    return int(values.sum())
