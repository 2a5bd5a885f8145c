import math
import random
from fractions import Fraction

import numpy as np
import pytest

from hororatio.actions import (
    BoundaryPairAction,
    DomainError,
    FiniteAction,
    SanovPlaneAction,
    So3SphereAction,
    TrivialAction,
    apply_word,
    load_finite_action,
    registered_actions,
    registry_get,
    sample_point,
    word_matrices,
)
from hororatio.boundary import Cylinder, act, cylinder_measure, rn_value, sample_boundary
from hororatio.free_group import ReducedWord, reduce_letters


def random_word(rank, length, rng):
    letters = []
    while len(letters) < length:
        c = rng.randrange(2 * rank)
        if not letters or c != letters[-1] ^ 1:
            letters.append(c)
    return ReducedWord(rank, tuple(letters))


def random_finite(rng, k=5, rank=2):
    perms = [rng.sample(range(k), k) for _ in range(rank)]
    weights = [Fraction(rng.randint(1, 9), rng.randint(1, 9)) for _ in range(k)]
    return FiniteAction(weights, perms)


def instances():
    rng = random.Random(0)
    return [
        (TrivialAction(2), 0),
        (So3SphereAction(), np.array([0.6, 0.0, 0.8])),
        (SanovPlaneAction(), np.array([0.3, -1.7])),
        (BoundaryPairAction(2), sample_boundary(2, 77)),
        (random_finite(rng), 3),
    ]


def close(a, b, tol):
    if isinstance(a, np.ndarray):
        return np.max(np.abs(a - b)) <= tol * max(1.0, np.max(np.abs(b)))
    return a == b


def test_registry():
    assert registered_actions() == ["boundary_pair", "finite_model", "sanov_plane", "so3_sphere", "trivial"]
    assert isinstance(registry_get("so3_sphere"), So3SphereAction)
    assert registry_get("boundary_pair", rank=3).rank == 3
    with pytest.raises(KeyError):
        registry_get("torus")


def test_trivial():
    A = TrivialAction()
    g = ReducedWord.parse("a1.A2.a3", 3)
    assert A.apply(g, 0) == 0 and A.rn(g, 0) == 1
    assert sample_point(A, 5) == (0, 1)


def test_identity_word_is_identity():
    for A, x in instances():
        e = ReducedWord.identity(2)
        out = apply_word(A, e, x)
        assert np.array_equal(out, x) if isinstance(x, np.ndarray) else out == x
        assert A.rn(e, x) == 1


@pytest.mark.parametrize("index", range(5))
def test_homomorphism_and_rn_cocycle(index):
    A, x = instances()[index]
    rng = random.Random(index)
    tol = A.tolerance
    for _ in range(200):
        g, h = random_word(2, rng.randrange(6), rng), random_word(2, rng.randrange(6), rng)
        hx = A.apply(h, x)
        assert close(A.apply(g * h, x), A.apply(g, hx), max(tol, 1e-10))
        lhs, rhs = A.rn(g * h, x), A.rn(g, hx) * A.rn(h, x)
        if A.exact:
            assert lhs == rhs
        else:
            assert abs(lhs - rhs) <= 1e-10


@pytest.mark.parametrize("index", range(5))
def test_round_trip(index):
    A, x = instances()[index]
    rng = random.Random(10 + index)
    for _ in range(200):
        g = random_word(2, rng.randrange(11), rng)
        back = A.apply(~g, A.apply(g, x))
        if isinstance(x, np.ndarray):
            assert np.max(np.abs(back - x)) <= 1e-10
        else:
            assert back == x


def test_so3_norm_preserved():
    A = So3SphereAction()
    rng = random.Random(1)
    x, _ = A.sample_point(3)
    for _ in range(300):
        g = random_word(2, rng.randrange(21), rng)
        assert abs(np.linalg.norm(A.apply(g, x)) - 1) <= 1e-12


def test_finite_rn_inverse_identity():
    rng = random.Random(2)
    for _ in range(50):
        A = random_finite(rng, k=rng.randrange(1, 7))
        for _ in range(20):
            g = random_word(2, rng.randrange(8), rng)
            x = rng.randrange(A.size)
            assert A.rn(g, x) * A.rn(~g, A.apply(g, x)) == 1
            assert isinstance(A.rn(g, x), Fraction)


def test_finite_domain_and_validation():
    A = FiniteAction([1, 2], [[1, 0]])
    with pytest.raises(DomainError):
        A.apply(ReducedWord.identity(1), 2)
    with pytest.raises(ValueError):
        FiniteAction([1, 2], [[0, 0]])
    with pytest.raises(ValueError):
        FiniteAction([1, 0], [[0, 1]])
    assert not A.measure_preserving
    assert FiniteAction([3, 3], [[1, 0]]).measure_preserving


def test_finite_file_round_trip(tmp_path):
    path = tmp_path / "act.txt"
    path.write_text("# three points\npoints = 3\nweights = 1, 2, 1/2\na1 = 1 2 0\na2 = 0 2 1\n")
    A = load_finite_action(path)
    assert A.size == 3 and A.rank == 2
    assert A.weights == [1, 2, Fraction(1, 2)]
    assert A.apply(ReducedWord.parse("a1", 2), 0) == 1
    assert A.apply(ReducedWord.parse("A2", 2), 2) == 1
    path2 = tmp_path / "again.txt"
    path2.write_text(A.to_text())
    assert load_finite_action(path2).to_text() == A.to_text()
    assert registry_get("finite_model", path=path).weights == A.weights
    path.write_text("points = 3\nweights = 1 2\na1 = 1 2 0\n")
    with pytest.raises(ValueError):
        load_finite_action(path)
    path.write_text("points = 2\nweights = 1 2\na1 = 1 0\nb = 3\n")
    with pytest.raises(ValueError):
        load_finite_action(path)


def test_even_orbits():
    A = FiniteAction([1] * 4, [[1, 0, 3, 2], [0, 1, 3, 2]])
    assert sorted(sorted(o) for o in A.even_orbits()) == [[0, 1], [2], [3]]


def test_sanov_domain_and_rn():
    A = SanovPlaneAction()
    g = ReducedWord.parse("a1.A2", 2)
    with pytest.raises(DomainError):
        A.apply(g, np.zeros(2))
    with pytest.raises(DomainError):
        apply_word(A, ReducedWord.identity(2), np.array([0.0, 0.0]))
    assert A.rn(g, np.array([1.0, 2.0])) == 1
    for m in A.int_matrices:
        assert round(np.linalg.det(m)) == 1


def test_boundary_pair_rn_formula():
    A = BoundaryPairAction(2)
    rng = random.Random(3)
    for i in range(10_000):
        g = random_word(2, rng.randrange(7), rng)
        xi = sample_boundary(2, i)
        res = act(g, xi)
        assert A.rn(g, xi) == rn_value(2, res.rn_exponent) == Fraction(3) ** (2 * res.k - len(g))
        assert A.apply(g, xi) == res.point
    # one spot check against the cylinder-ratio oracle
    xi = sample_boundary(2, 1)
    g = ReducedWord.parse("a1.a2.A1", 2)
    prefix = xi.letters(4)
    image = reduce_letters(g.letters + prefix)
    ratio = cylinder_measure(Cylinder(2, image)) / cylinder_measure(Cylinder(2, prefix))
    assert A.rn(g, xi) == ratio


def _freeness_violations(mats, scale, length):
    d = mats[0].shape[0]
    bad = 0
    for L in range(1, length + 1):
        W = word_matrices(mats, L)
        ident = np.eye(d, dtype=np.int64) * scale**L
        bad += int(np.all(W == ident, axis=(1, 2)).sum())
    return bad


def test_so3_pair_is_free_to_length_12():
    A = So3SphereAction()
    assert _freeness_violations(A.integer_matrices(), 5, 12) == 0
    x0 = np.array([0.3, 0.5, math.sqrt(1 - 0.34)])
    for L in range(1, 13):
        W = word_matrices(A.integer_matrices(), L) / 5.0**L
        assert np.min(np.linalg.norm(W @ x0 - x0, axis=1)) > 1e-6


def test_sanov_pair_is_free_to_length_12():
    A = SanovPlaneAction()
    assert _freeness_violations(A.int_matrices, 1, 12) == 0


def test_word_matrices_match_apply():
    A = SanovPlaneAction()
    from hororatio.free_group import nonbacktracking_array

    rows = nonbacktracking_array(2, 5)
    W = word_matrices(A.int_matrices, 5)
    x = np.array([1.0, -2.0])
    for i in range(0, len(rows), 37):
        g = ReducedWord(2, tuple(int(c) for c in rows[i]))
        assert np.array_equal(W[i] @ x, A.apply(g, x))


def test_so3_sampler_harmonic_mean():
    A = So3SphereAction()
    xs = np.array([A.sample_point(seed)[0] for seed in range(100_000)])
    assert np.allclose(np.linalg.norm(xs, axis=1), 1)
    mean = xs.mean(axis=0)
    se = xs.std(axis=0) / math.sqrt(len(xs))
    assert np.all(np.abs(mean) <= 3 * se)
    assert A.sample_point(9)[0].tolist() == A.sample_point(9)[0].tolist()


def test_sanov_sampler_disk_area():
    A = SanovPlaneAction()
    z, w = A.sample_points(2024, 1_000_000)
    area = float(np.mean(w * (np.sum(z * z, axis=1) <= 1)))
    assert abs(area - math.pi) <= 0.02 * math.pi
    x, weight = A.sample_point(4)
    assert weight == pytest.approx(2 * math.pi * math.exp(0.5 * float(x @ x)))


def test_finite_sampler_weights_estimate_mass():
    A = FiniteAction([Fraction(1, 2), 3, Fraction(1, 4)], [[1, 2, 0]])
    total = sum(A.sample_point(s)[1] for s in range(20_000)) / 20_000
    assert abs(float(total) - float(sum(A.weights))) < 0.1
