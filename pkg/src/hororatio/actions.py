"""Non-singular actions of the free group, pluggable into skew products.

``rn(g, x)`` is the derivative of the reference measure under ``g`` at ``x``,
i.e. lambda(g dx) / lambda(dx).  With this orientation a measure-preserving
action has ``rn == 1`` and skew-product weights multiply base weights by
``rn(alpha(b', b), x)``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from .boundary import act, rn_value, sample_boundary
from .free_group import ReducedWord, nonbacktracking_array
from .kvfile import parse_kv

__all__ = [
    "DomainError",
    "NonSingularAction",
    "TrivialAction",
    "So3SphereAction",
    "SanovPlaneAction",
    "BoundaryPairAction",
    "FiniteAction",
    "registry_get",
    "registered_actions",
    "apply_word",
    "sample_point",
    "load_finite_action",
    "word_matrices",
]


class DomainError(ValueError):
    pass


class NonSingularAction:
    """Base class: subclasses define generator maps and their derivatives."""

    name = "abstract"
    rank: Optional[int] = None
    tolerance = 0.0
    exact = False
    measure_preserving = False
    probability = False
    sampler = ""

    def apply_letter(self, c: int, x):
        raise NotImplementedError

    def rn_letter(self, c: int, x):
        return 1

    def check_domain(self, x) -> None:
        pass

    def _check_word(self, g: ReducedWord) -> None:
        if self.rank is not None and g.rank != self.rank:
            raise ValueError(f"{self.name} needs words of rank {self.rank}, got {g.rank}")

    def apply(self, g: ReducedWord, x):
        self._check_word(g)
        self.check_domain(x)
        for c in reversed(g.letters):
            x = self.apply_letter(c, x)
        return x

    def rn(self, g: ReducedWord, x):
        self._check_word(g)
        self.check_domain(x)
        total = 1
        for c in reversed(g.letters):
            total = total * self.rn_letter(c, x)
            x = self.apply_letter(c, x)
        return total

    def sample_point(self, seed: int) -> tuple[Any, Any]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<action {self.name}>"


class TrivialAction(NonSingularAction):
    name = "trivial"
    exact = True
    measure_preserving = True
    probability = True
    sampler = "the single point 0"

    def __init__(self, rank: Optional[int] = None):
        self.rank = rank

    def apply_letter(self, c, x):
        return x

    def apply(self, g, x):
        return x

    def rn(self, g, x):
        return 1

    def sample_point(self, seed):
        return 0, 1


def _rotation_pair() -> tuple[np.ndarray, np.ndarray]:
    a = np.array([[3, -4, 0], [4, 3, 0], [0, 0, 5]], dtype=np.int64)
    b = np.array([[5, 0, 0], [0, 3, -4], [0, 4, 3]], dtype=np.int64)
    return a, b


class So3SphereAction(NonSingularAction):
    """Rotations by arccos(3/5) about the z and x axes acting on the unit sphere.

    Letter matrices are ``M / 5`` for the integer matrices in
    :meth:`integer_matrices`; inverses are transposes.  The reference measure
    is normalised surface area.
    """

    name = "so3_sphere"
    rank = 2
    tolerance = 1e-12
    measure_preserving = True
    probability = True
    sampler = "uniform on the sphere (normalised Gaussian), weight 1"

    def __init__(self):
        a, b = _rotation_pair()
        self.matrices = [a / 5.0, a.T / 5.0, b / 5.0, b.T / 5.0]

    @staticmethod
    def integer_matrices() -> list[np.ndarray]:
        a, b = _rotation_pair()
        return [a, a.T.copy(), b, b.T.copy()]

    def apply_letter(self, c, x):
        return self.matrices[c] @ x

    def apply(self, g, x):
        self._check_word(g)
        x = np.asarray(x, dtype=float)
        for c in reversed(g.letters):
            x = self.matrices[c] @ x
        return x

    def rn(self, g, x):
        return 1

    def sample_point(self, seed):
        z = np.random.default_rng(seed).standard_normal(3)
        return z / np.linalg.norm(z), 1.0

    def sample_points(self, seed, size):
        z = np.random.default_rng(seed).standard_normal((size, 3))
        return z / np.linalg.norm(z, axis=1, keepdims=True), np.ones(size)


class SanovPlaneAction(NonSingularAction):
    """The Sanov pair [[1,2],[0,1]], [[1,0],[2,1]] acting linearly on R^2 minus 0.

    Area is invariant and infinite; points are sampled from a standard
    Gaussian and reweighted by the inverse density, so weighted averages
    estimate area integrals.
    """

    name = "sanov_plane"
    rank = 2
    tolerance = 1e-10
    measure_preserving = True
    sampler = "standard Gaussian, weight 2*pi*exp(|x|^2/2)"

    def __init__(self):
        self.int_matrices = [
            np.array([[1, 2], [0, 1]], dtype=np.int64),
            np.array([[1, -2], [0, 1]], dtype=np.int64),
            np.array([[1, 0], [2, 1]], dtype=np.int64),
            np.array([[1, 0], [-2, 1]], dtype=np.int64),
        ]
        self.matrices = [m.astype(float) for m in self.int_matrices]

    def check_domain(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (2,):
            raise DomainError("sanov_plane points are 2-vectors")
        if not x.any():
            raise DomainError("the origin is not in the punctured plane")

    def apply_letter(self, c, x):
        return self.matrices[c] @ x

    def apply(self, g, x):
        self._check_word(g)
        self.check_domain(x)
        x = np.asarray(x, dtype=float)
        for c in reversed(g.letters):
            x = self.matrices[c] @ x
        return x

    def rn(self, g, x):
        self.check_domain(x)
        return 1

    @staticmethod
    def _weight(z: np.ndarray):
        return 2 * math.pi * np.exp(0.5 * np.sum(z * z, axis=-1))

    def sample_point(self, seed):
        z = np.random.default_rng(seed).standard_normal(2)
        return z, float(self._weight(z))

    def sample_points(self, seed, size):
        z = np.random.default_rng(seed).standard_normal((size, 2))
        return z, self._weight(z)


class BoundaryPairAction(NonSingularAction):
    """The free group acting on a second copy of its boundary."""

    name = "boundary_pair"
    exact = True
    probability = True
    sampler = "Markov measure on the boundary, weight 1"

    def __init__(self, rank: int = 2):
        self.rank = rank

    def apply_letter(self, c, x):
        return act(ReducedWord(self.rank, (c,)), x).point

    def apply(self, g, x):
        self._check_word(g)
        return act(g, x).point

    def rn(self, g, x):
        self._check_word(g)
        return rn_value(self.rank, act(g, x).rn_exponent)

    def rn_exponent(self, g, x) -> int:
        return act(g, x).rn_exponent

    def sample_point(self, seed):
        return sample_boundary(self.rank, seed), 1


class FiniteAction(NonSingularAction):
    """Permutation action on ``0..k-1`` with point masses ``weights``.

    ``rn(g, x) = weights[g x] / weights[x]`` exactly.
    """

    name = "finite_model"
    exact = True
    sampler = "uniform point, weight k * lambda(x)"

    def __init__(self, weights: Sequence, generators: Sequence[Sequence[int]]):
        k = len(weights)
        self.weights = [Fraction(w) for w in weights]
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        perms = []
        for p in generators:
            p = [int(i) for i in p]
            if sorted(p) != list(range(k)):
                raise ValueError(f"generator image {p} is not a permutation of 0..{k - 1}")
            inv = [0] * k
            for i, j in enumerate(p):
                inv[j] = i
            perms.extend([p, inv])
        self.rank = len(generators)
        self.size = k
        self._perms = perms
        self.measure_preserving = all(
            self.weights[p[x]] == self.weights[x] for p in perms for x in range(k)
        )
        total = sum(self.weights)
        self.probability = total == 1

    def check_domain(self, x):
        if not (isinstance(x, (int, np.integer)) and 0 <= x < self.size):
            raise DomainError(f"{x!r} is not a point of the finite space")

    def apply_letter(self, c, x):
        return self._perms[c][x]

    def rn_letter(self, c, x):
        return self.weights[self._perms[c][x]] / self.weights[x]

    def rn(self, g, x):
        self._check_word(g)
        self.check_domain(x)
        return self.weights[self.apply(g, x)] / self.weights[x]

    def sample_point(self, seed):
        x = int(np.random.default_rng(seed).integers(self.size))
        return x, self.size * self.weights[x]

    def even_orbits(self) -> list[frozenset[int]]:
        """Orbits of the index-2 subgroup of even-length words."""
        parent = list(range(self.size))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for s in self._perms:
            for t in self._perms:
                for x in range(self.size):
                    a, b = find(x), find(s[t[x]])
                    if a != b:
                        parent[a] = b
        groups: dict[int, set] = {}
        for x in range(self.size):
            groups.setdefault(find(x), set()).add(x)
        return [frozenset(g) for g in groups.values()]

    @classmethod
    def from_text(cls, text: str) -> FiniteAction:
        kv = parse_kv(text)
        k = int(kv.pop("points"))
        weights = [Fraction(t) for t in kv.pop("weights").replace(",", " ").split()]
        if len(weights) != k:
            raise ValueError(f"expected {k} weights, got {len(weights)}")
        gens = []
        i = 1
        while f"a{i}" in kv:
            gens.append([int(t) for t in kv.pop(f"a{i}").replace(",", " ").split()])
            i += 1
        if kv:
            raise ValueError(f"unknown keys in finite action file: {sorted(kv)}")
        if not gens:
            raise ValueError("finite action needs at least generator a1")
        return cls(weights, gens)

    def to_text(self) -> str:
        lines = [f"points = {self.size}", "weights = " + " ".join(str(w) for w in self.weights)]
        for i in range(self.rank):
            lines.append(f"a{i + 1} = " + " ".join(str(j) for j in self._perms[2 * i]))
        return "\n".join(lines) + "\n"


def word_matrices(letter_mats: Sequence[np.ndarray], length: int) -> np.ndarray:
    """Products ``M[w_1] ... M[w_L]`` for every reduced word of one length.

    Rows follow :func:`nonbacktracking_array` order.  Integer inputs stay
    exact as long as the entries fit in int64.
    """
    mats = np.stack([np.asarray(m) for m in letter_mats])
    width = len(mats)
    d = mats.shape[1]
    cur = np.broadcast_to(np.eye(d, dtype=mats.dtype), (1, d, d))
    prev = nonbacktracking_array(width // 2, 0)
    for L in range(1, length + 1):
        ext = np.repeat(cur, width, axis=0) @ np.tile(mats, (len(cur), 1, 1))
        if L > 1:
            last = np.repeat(prev[:, -1], width)
            keep = np.tile(np.arange(width), len(prev)) != (last ^ 1)
            ext = ext[keep]
        cur = ext
        prev = nonbacktracking_array(width // 2, L)
    return cur


def load_finite_action(path: Union[str, Path]) -> FiniteAction:
    return FiniteAction.from_text(Path(path).read_text(encoding="utf-8"))


_REGISTRY: dict[str, Callable[..., NonSingularAction]] = {
    "trivial": TrivialAction,
    "so3_sphere": So3SphereAction,
    "sanov_plane": SanovPlaneAction,
    "boundary_pair": BoundaryPairAction,
    "finite_model": lambda spec=None, path=None: (
        spec if isinstance(spec, FiniteAction) else load_finite_action(path)
    ),
}


def registered_actions() -> list[str]:
    return sorted(_REGISTRY)


def registry_get(name: str, **params) -> NonSingularAction:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown action {name!r}; known: {registered_actions()}") from None
    return factory(**params)


def apply_word(A: NonSingularAction, g: ReducedWord, x):
    return A.apply(g, x)


def sample_point(A: NonSingularAction, seed: int):
    return A.sample_point(seed)
