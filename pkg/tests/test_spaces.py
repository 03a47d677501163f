import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarselab.spaces import (
    BinaryTreeSpace,
    CapExceeded,
    FreeGroupSpace,
    LatticeSpace,
    ModelMismatch,
    enumerate_reduced_words,
    is_reduced,
    reduce_word,
    word_inverse,
    word_metric_bfs_oracle,
    word_multiply,
    space_from_config,
)

Z1 = LatticeSpace(1)
Z2 = LatticeSpace(2)
N1 = LatticeSpace(1, signed=False)
N2 = LatticeSpace(2, signed=False)
F2 = FreeGroupSpace()
T2 = BinaryTreeSpace()

letters = st.sampled_from("aAbB")
raw_words = st.text(alphabet="aAbB", max_size=24)


# ---------------------------------------------------------------------------
# free reduction


def test_reduce_word_examples():
    assert reduce_word("aAb") == "b"
    assert reduce_word("abBA") == ""
    assert reduce_word("aabBA") == "a"


def test_reduce_word_invalid_letter():
    with pytest.raises(ValueError, match="invalid letter"):
        reduce_word("axb")


def _reduce_random_order(word: str, rng: random.Random) -> str:
    # oracle: cancel any adjacent inverse pair in random order until none
    chars = list(word)
    inv = {"a": "A", "A": "a", "b": "B", "B": "b"}
    while True:
        pairs = [
            i for i in range(len(chars) - 1) if chars[i + 1] == inv[chars[i]]
        ]
        if not pairs:
            return "".join(chars)
        i = rng.choice(pairs)
        del chars[i : i + 2]


@given(raw_words, st.integers(0, 2**30))
@settings(max_examples=200)
def test_reduce_word_matches_random_order_oracle(word, seed):
    assert reduce_word(word) == _reduce_random_order(word, random.Random(seed))


@given(raw_words)
def test_reduce_word_idempotent(word):
    reduced = reduce_word(word)
    assert reduce_word(reduced) == reduced
    assert is_reduced(reduced)


@given(raw_words)
def test_word_inverse_cancels(word):
    w = reduce_word(word)
    assert word_multiply(w, word_inverse(w)) == ""
    assert word_multiply(word_inverse(w), w) == ""


@given(raw_words, raw_words, raw_words)
@settings(max_examples=100)
def test_word_multiply_associative(u, v, w):
    u, v, w = reduce_word(u), reduce_word(v), reduce_word(w)
    assert word_multiply(word_multiply(u, v), w) == word_multiply(u, word_multiply(v, w))


def test_enumerate_reduced_words_counts():
    assert sorted(enumerate_reduced_words(0)) == [""]
    assert len(list(enumerate_reduced_words(1))) == 4
    assert len(list(enumerate_reduced_words(3))) == 4 * 3 * 3
    assert all(is_reduced(w) for w in enumerate_reduced_words(4))


# ---------------------------------------------------------------------------
# distances


def test_distance_examples():
    assert Z2.distance((0, 0), (3, 4)) == 7
    assert F2.distance("", "abA") == 3
    # parent relation in the tree: bits are LSB first
    assert T2.distance((1, 1, 0), (1, 1)) == 1


def test_tree_distance_against_bfs():
    oracle = word_metric_bfs_oracle(T2, 8)
    v, w = (1, 1, 0), (1, 1)
    assert oracle[v] == 3 and oracle[w] == 2
    # d(v, w) = depth(v) + depth(w) - 2 lcp through the root formula
    assert T2.distance(v, w) == 1


def test_closed_ball_examples():
    assert Z1.closed_ball((0,), 2) == [(-2,), (-1,), (0,), (1,), (2,)]
    assert len(F2.closed_ball("", 2)) == 17
    assert T2.closed_ball((), 1) == [(), (0,), (1,)]


def test_bfs_oracle_examples():
    table = word_metric_bfs_oracle(Z2, 3)
    assert table[(1, 2)] == 3
    assert len(word_metric_bfs_oracle(F2, 3)) == 53
    assert word_metric_bfs_oracle(N1, 2) == {(0,): 0, (1,): 1, (2,): 2}


@pytest.mark.parametrize("space,r", [(Z2, 8), (N2, 8), (F2, 8), (T2, 8)])
def test_distance_agrees_with_bfs_oracle_radius_8(space, r):
    oracle = word_metric_bfs_oracle(space, r)
    base = space.basepoint
    for p, d in oracle.items():
        assert space.distance(base, p) == d


def test_closed_ball_matches_oracle_and_is_monotone():
    for space in (Z2, F2, T2, N2):
        oracle = word_metric_bfs_oracle(space, 5)
        prev = set()
        for r in range(6):
            ball = set(space.closed_ball(space.basepoint, r))
            assert ball == {p for p, d in oracle.items() if d <= r}
            assert prev <= ball
            prev = ball


def test_closed_ball_negative_radius_and_cap():
    with pytest.raises(ValueError):
        Z1.closed_ball((0,), -1)
    tiny = LatticeSpace(2, cap=10)
    with pytest.raises(CapExceeded):
        tiny.closed_ball((0, 0), 100)


# ---------------------------------------------------------------------------
# metric axioms on >= 10^4 sampled triples per model


def _sample_points(space, rng, count):
    if isinstance(space, LatticeSpace):
        lo = 0 if not space.signed else -50
        return [
            tuple(rng.randint(lo, 50) for _ in range(space.rank))
            for _ in range(count)
        ]
    if isinstance(space, FreeGroupSpace):
        out = []
        for _ in range(count):
            w = ""
            for _ in range(rng.randint(0, 12)):
                choices = [c for c in "aAbB" if not w or c != word_inverse(w[-1])]
                w += rng.choice(choices)
            out.append(w)
        return out
    out = []
    for _ in range(count):
        out.append(tuple(rng.randint(0, 1) for _ in range(rng.randint(0, 14))))
    return out


@pytest.mark.parametrize("space", [Z2, N2, F2, T2], ids=["Z2", "N2", "F2", "T2"])
def test_metric_axioms_mass_sample(space):
    rng = random.Random(7)
    pts = _sample_points(space, rng, 400)
    triples = [(rng.randrange(400), rng.randrange(400), rng.randrange(400))
               for _ in range(10_000)]
    dmat = space.pairwise(pts, pts)
    assert (dmat >= 0).all()
    assert (dmat == dmat.T).all()
    for i, j, k in triples:
        assert dmat[i, k] <= dmat[i, j] + dmat[j, k]
        assert (dmat[i, j] == 0) == (pts[i] == pts[j])


@pytest.mark.parametrize("space", [Z2, F2], ids=["Z2", "F2"])
def test_left_invariance(space):
    rng = random.Random(11)
    pts = _sample_points(space, rng, 64)
    for _ in range(200):
        g, p, q = (pts[rng.randrange(64)] for _ in range(3))
        if isinstance(space, LatticeSpace):
            gp = tuple(a + b for a, b in zip(g, p))
            gq = tuple(a + b for a, b in zip(g, q))
        else:
            gp, gq = word_multiply(g, p), word_multiply(g, q)
        assert space.distance(gp, gq) == space.distance(p, q)


@pytest.mark.parametrize("space", [Z2, N2, F2, T2], ids=["Z2", "N2", "F2", "T2"])
def test_pairwise_and_paired_match_scalar(space):
    rng = random.Random(3)
    pts = _sample_points(space, rng, 40)
    qts = _sample_points(space, rng, 40)
    mat = space.pairwise(pts, qts)
    vec = space.paired(pts, qts)
    for i in range(40):
        assert vec[i] == space.distance(pts[i], qts[i])
        for j in range(0, 40, 7):
            assert mat[i, j] == space.distance(pts[i], qts[j])


# ---------------------------------------------------------------------------
# model validation and custom generating sets


def test_validate_rejects_model_mismatch():
    with pytest.raises(ModelMismatch):
        Z2.distance((0, 0), (1, 2, 3))
    with pytest.raises(ModelMismatch):
        Z2.validate((0.5, 1))
    with pytest.raises(ModelMismatch):
        N1.validate((-1,))
    with pytest.raises(ModelMismatch):
        F2.validate("aA")
    with pytest.raises(ModelMismatch):
        T2.validate((0, 2))


def test_n_lattice_is_restriction_of_z_metric():
    assert N2.distance((0, 0), (2, 3)) == Z2.distance((0, 0), (2, 3)) == 5
    ball = N2.closed_ball((0, 0), 2)
    assert all(min(p) >= 0 for p in ball)
    assert len(ball) == 6  # l1 ball of radius 2 meeting the quadrant


def test_custom_lattice_generators_match_bfs():
    sp = LatticeSpace(1, generators=((2,), (3,)))
    oracle = word_metric_bfs_oracle(sp, 4)
    for p, d in oracle.items():
        assert sp.distance((0,), p) == d
    assert sp.distance((0,), (1,)) == 2  # 3 - 2


def test_custom_free_group_generators_match_bfs():
    sp = FreeGroupSpace(generators=("ab", "a"))
    oracle = word_metric_bfs_oracle(sp, 4)
    for p, d in oracle.items():
        assert sp.distance("", p) == d
    assert sp.distance("", "b") == 2  # b = a^-1 (ab)


@given(st.integers(-40, 40), st.integers(-40, 40), st.integers(-40, 40),
       st.integers(-40, 40))
def test_lattice_distance_is_l1(x0, y0, x1, y1):
    assert Z2.distance((x0, y0), (x1, y1)) == abs(x1 - x0) + abs(y1 - y0)


# ---------------------------------------------------------------------------
# config parsing


def test_space_from_config():
    assert space_from_config({"space": "Z^2"}).rank == 2
    assert space_from_config({"space": "N^3"}).signed is False
    assert isinstance(space_from_config({"space": "F2"}), FreeGroupSpace)
    assert isinstance(space_from_config({"space": "tree"}), BinaryTreeSpace)
    sp = space_from_config({"space": "Z^1", "generators": "2, 3"})
    assert sp.moves == ((-3,), (-2,), (2,), (3,))
    with pytest.raises(ValueError, match="unknown space"):
        space_from_config({"space": "hyperbolic"})
    with pytest.raises(ValueError, match="space"):
        space_from_config({})
