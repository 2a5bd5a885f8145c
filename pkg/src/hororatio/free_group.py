"""Reduced-word arithmetic for the free group of rank r.

Letters are small integers: generator ``a_i`` is ``2*(i-1)`` and its inverse
is ``2*(i-1) + 1``, so inverting a letter flips the low bit.  Words are kept
in freely reduced form at all times.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ReducedWord",
    "inverse_letter",
    "letter_token",
    "parse_letter",
    "reduce_letters",
    "multiply",
    "inverse",
    "distance",
    "enumerate_nonbacktracking",
    "nonbacktracking_array",
    "sphere_size",
    "words_up_to",
]


def inverse_letter(code: int) -> int:
    return code ^ 1


def letter_token(code: int) -> str:
    i = code // 2 + 1
    return f"A{i}" if code & 1 else f"a{i}"


def parse_letter(token: str, rank: int) -> int:
    token = token.strip()
    if len(token) < 2 or token[0] not in "aA" or not token[1:].isdigit():
        raise ValueError(f"bad letter token {token!r}")
    i = int(token[1:])
    if not 1 <= i <= rank:
        raise ValueError(f"generator index {i} out of range for rank {rank}")
    return 2 * (i - 1) + (token[0] == "A")


def reduce_letters(letters: Iterable[int]) -> tuple[int, ...]:
    """Free reduction by a single left-to-right stack pass."""
    out: list[int] = []
    for c in letters:
        if out and out[-1] == c ^ 1:
            out.pop()
        else:
            out.append(c)
    return tuple(out)


def _check_rank(rank: int) -> None:
    if not isinstance(rank, (int, np.integer)) or rank < 1:
        raise ValueError(f"rank must be a positive integer, got {rank!r}")


@dataclass(frozen=True, slots=True)
class ReducedWord:
    """An element of the free group, stored as its reduced letter sequence."""

    rank: int
    letters: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        _check_rank(self.rank)
        n = 2 * self.rank
        prev = None
        for c in self.letters:
            if not 0 <= c < n:
                raise ValueError(f"letter code {c} out of range for rank {self.rank}")
            if prev is not None and c == prev ^ 1:
                raise ValueError(f"word {self.letters} is not reduced")
            prev = c

    @classmethod
    def identity(cls, rank: int) -> ReducedWord:
        return cls(rank, ())

    @classmethod
    def from_letters(cls, rank: int, letters: Iterable[int]) -> ReducedWord:
        """Reduce an arbitrary letter sequence."""
        return cls(rank, reduce_letters(letters))

    @classmethod
    def parse(cls, text: str, rank: int) -> ReducedWord:
        text = text.strip()
        if text in ("", "e"):
            return cls(rank, ())
        return cls.from_letters(rank, (parse_letter(t, rank) for t in text.split(".")))

    @classmethod
    def generator(cls, i: int, rank: int, power: int = 1) -> ReducedWord:
        c = 2 * (i - 1) + (power < 0)
        return cls(rank, (c,) * abs(power))

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: ReducedWord) -> ReducedWord:
        return multiply(self, other)

    def __invert__(self) -> ReducedWord:
        return inverse(self)

    def __str__(self) -> str:
        if not self.letters:
            return "e"
        return ".".join(letter_token(c) for c in self.letters)

    def __repr__(self) -> str:
        return f"ReducedWord({self})"

    def is_identity(self) -> bool:
        return not self.letters


def multiply(g: ReducedWord, h: ReducedWord) -> ReducedWord:
    if g.rank != h.rank:
        raise ValueError(f"rank mismatch: {g.rank} vs {h.rank}")
    a, b = g.letters, h.letters
    k = 0
    m = min(len(a), len(b))
    while k < m and a[-1 - k] == b[k] ^ 1:
        k += 1
    return ReducedWord(g.rank, a[: len(a) - k] + b[k:])


def inverse(g: ReducedWord) -> ReducedWord:
    return ReducedWord(g.rank, tuple(c ^ 1 for c in reversed(g.letters)))


def distance(g: ReducedWord, h: ReducedWord) -> int:
    """Word metric d(g, h) = |g^-1 h|."""
    return len(multiply(inverse(g), h))


def sphere_size(rank: int, n: int) -> int:
    return 1 if n == 0 else 2 * rank * (2 * rank - 1) ** (n - 1)


@lru_cache(maxsize=64)
def _nonbacktracking_cached(rank: int, n: int) -> np.ndarray:
    width = 2 * rank
    rows = np.zeros((1, 0), dtype=np.int8)
    letters = np.arange(width, dtype=np.int8)
    for _ in range(n):
        k = rows.shape[0]
        ext = np.concatenate(
            [np.repeat(rows, width, axis=0), np.tile(letters, k)[:, None]], axis=1
        )
        if rows.shape[1]:
            keep = ext[:, -1] != (ext[:, -2] ^ 1)
            ext = ext[keep]
        rows = ext
    rows.setflags(write=False)
    return rows


def nonbacktracking_array(
    rank: int, n: int, last_letter_excluded: Optional[int] = None
) -> np.ndarray:
    """All reduced words of length ``n`` as rows of an int8 array.

    Rows are in lexicographic order of letter codes.  The returned array is
    read-only and may be shared between calls.
    """
    _check_rank(rank)
    if n < 0:
        raise ValueError("n must be non-negative")
    rows = _nonbacktracking_cached(int(rank), int(n))
    if last_letter_excluded is None or n == 0:
        return rows
    out = rows[rows[:, -1] != last_letter_excluded]
    out.setflags(write=False)
    return out


def enumerate_nonbacktracking(
    rank: int, n: int, last_letter_excluded: Optional[int] = None
) -> list[ReducedWord]:
    rows = nonbacktracking_array(rank, n, last_letter_excluded)
    return [ReducedWord(rank, tuple(int(c) for c in row)) for row in rows]


def words_up_to(rank: int, n: int) -> list[ReducedWord]:
    """Every reduced word with |g| <= n, shortest first."""
    out: list[ReducedWord] = []
    for k in range(n + 1):
        out.extend(enumerate_nonbacktracking(rank, k))
    return out


def as_word(rank: int, letters: Sequence[int]) -> ReducedWord:
    return ReducedWord(rank, tuple(int(c) for c in letters))
