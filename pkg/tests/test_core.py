import itertools

import numpy as np
import pytest

from committee_select.core import (
    BinaryOutcomeMatrix,
    Committee,
    QueryLedger,
    RankingProfile,
    RivalWeights,
    best_rank,
    competition_ranks,
    is_competition_ranking,
    n_committees,
    pad_to_size,
)


@pytest.mark.parametrize(
    "S, k, m, expected",
    [
        ({2}, 3, 5, (0, 1, 2)),
        ({0, 1, 2}, 3, 3, (0, 1, 2)),
        ({4}, 2, 5, (0, 4)),
        ((), 2, 4, (0, 1)),
    ],
)
def test_pad_to_size(S, k, m, expected):
    out = pad_to_size(S, k, m)
    assert out.members == expected
    assert out.target_size == k


def test_pad_is_idempotent_and_keeps_members(rng):
    for _ in range(50):
        m = int(rng.integers(1, 9))
        k = int(rng.integers(0, m + 1))
        S = rng.choice(m, size=int(rng.integers(0, k + 1)), replace=False)
        once = pad_to_size(S, k, m)
        assert set(S) <= set(once.members)
        assert pad_to_size(once, k, m) == once


@pytest.mark.parametrize("S, k, m", [((0, 1, 2), 2, 5), ((0,), 4, 3), ((7,), 2, 5)])
def test_pad_rejects_bad_sizes(S, k, m):
    with pytest.raises(ValueError):
        pad_to_size(S, k, m)


def test_committee_is_sorted_and_rejects_duplicates():
    assert Committee((3, 1)).members == (1, 3)
    with pytest.raises(ValueError):
        Committee((1, 1))
    with pytest.raises(ValueError):
        Committee((0, 1, 2), target_size=2)
    assert Committee((0, 1)).is_proper(3)
    assert not Committee((0, 1, 2)).is_proper(3)
    assert Committee((0,)).union([2]).members == (0, 2)
    assert Committee((0, 2)).labels(("a", "b", "c")) == ["a", "c"]


@pytest.mark.parametrize(
    "row, S, expected",
    [
        ([1, 2, 3, 4], {2, 3}, 3),
        ([3, 1, 4, 2], set(), 5),
        ([1, 1, 3, 3], {2}, 3),
        ([1, 1, 3, 3], {0, 3}, 1),
    ],
)
def test_best_rank(row, S, expected):
    assert best_rank(row, S) == expected


def test_best_rank_is_antitone_in_the_committee():
    m = 5
    for perm in itertools.permutations(range(1, m + 1)):
        row = np.array(perm)
        for mask in range(1 << m):
            S = [c for c in range(m) if mask >> c & 1]
            for c in range(m):
                if c not in S:
                    assert best_rank(row, S + [c]) <= best_rank(row, S)


@pytest.mark.parametrize(
    "row, ok",
    [
        ([1, 2, 3], True),
        ([3, 1, 2], True),
        ([1, 1, 3, 3], True),
        ([2, 2, 1], True),
        ([1, 1, 2], False),
        ([1, 3, 3, 2], True),
        ([1, 2, 2, 3], False),
        ([0, 1, 2], False),
        ([1, 2, 2, 2, 4], False),
    ],
)
def test_is_competition_ranking(row, ok):
    assert is_competition_ranking(row) is ok


def test_every_permutation_is_a_competition_ranking():
    for perm in itertools.permutations(range(1, 6)):
        assert is_competition_ranking(perm)


@pytest.mark.parametrize(
    "scores, ranks",
    [
        ([5, 5, 2], [1, 1, 3]),
        ([0.1, 0.9, 0.5], [3, 1, 2]),
        ([7, 7, 7], [1, 1, 1]),
    ],
)
def test_competition_ranks(scores, ranks):
    col = np.array(scores, dtype=float)[:, None]
    assert competition_ranks(col)[:, 0].tolist() == ranks


def test_binary_matrix_validation_and_rates():
    M = BinaryOutcomeMatrix(np.array([[1, 0, 1, 0], [0, 1, 0, 0], [1, 1, 0, 0]]))
    assert (M.m, M.n) == (3, 4)
    assert M.coverage([0]) == 0.5
    assert M.coverage([0, 1]) == 0.75
    assert M.miss_rate([0, 1]) == 0.25
    assert M.rescue_rate(1, [0]) == 0.5
    assert M.coverage([]) == 0.0
    with pytest.raises(ValueError):
        BinaryOutcomeMatrix(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        M.bits[0, 0] = 0


def test_ranking_profile_validation():
    P = RankingProfile.from_orders([[1, 0, 3, 2], [1, 3, 2, 0]], weights=[2 / 3, 1 / 3])
    assert P.ranks[0].tolist() == [2, 1, 4, 3]
    assert P.strict
    with pytest.raises(ValueError):
        RankingProfile(np.array([[1, 1, 2]]))
    with pytest.raises(ValueError):
        RankingProfile(np.array([[1, 2, 3]]), weights=np.array([0.9]))
    weak = RankingProfile(np.array([[1, 1, 3]]))
    assert not weak.strict


def test_rows_renormalize_weights():
    P = RankingProfile(np.array([[1, 2], [2, 1], [1, 2]]), weights=np.array([0.5, 0.25, 0.25]))
    sub = P.rows([1, 2])
    assert np.allclose(sub.weights, [0.5, 0.5])


def test_rival_weights():
    assert np.allclose(RivalWeights.uniform(4).probs, 0.25)
    assert RivalWeights.point(3, 1).probs.tolist() == [0, 1, 0]
    with pytest.raises(ValueError):
        RivalWeights(np.array([0.5, 0.4]))


def test_ledger_counts_and_merges():
    a = QueryLedger()
    a.charge("cand", 3)
    a.charge("eval")
    a.charge("draw", 2)
    before = a.snapshot()
    a.charge("rank", 5)
    assert a.total == 9
    assert a.since(before).as_dict() == {"q_cand": 0, "q_eval": 0, "q_rank": 5, "draws": 0}
    b = QueryLedger()
    b.merge(a)
    assert b.as_dict() == a.as_dict()
    with pytest.raises(ValueError):
        a.charge("bogus")
    with pytest.raises(ValueError):
        a.charge("cand", -1)


def test_n_committees():
    assert n_committees(5, 2) == 10
    assert n_committees(3, 0) == 1
