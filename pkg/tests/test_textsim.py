import random
from functools import lru_cache

import pytest

from dlearn import textsim
from dlearn.textsim import (GAP_EXTEND, GAP_OPEN, MATCH_SCORE, MISMATCH_SCORE,
                            build_similarity_index, combined_similarity,
                            length_similarity, swg_similarity)


def swg_reference(a: str, b: str) -> float:
    """Independent top-down scorer: best alignment score over all local
    alignment paths, tracked through explicit match/gap states."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0

    @lru_cache(maxsize=None)
    def best_ending_at(i, j, state):
        # best score of an alignment whose last column is at (i, j) in the
        # given state: 0 = substitution, 1 = gap in b, 2 = gap in a
        if state == 0:
            sub = MATCH_SCORE if a[i] == b[j] else MISMATCH_SCORE
            prev = 0.0
            if i > 0 and j > 0:
                prev = max(0.0, *(best_ending_at(i - 1, j - 1, s) for s in range(3)))
            return prev + sub
        if state == 1:
            if i == 0:
                return float("-inf")
            opened = max(best_ending_at(i - 1, j, 0), best_ending_at(i - 1, j, 2))
            extended = best_ending_at(i - 1, j, 1)
            return max(opened + GAP_OPEN, extended + GAP_EXTEND)
        if j == 0:
            return float("-inf")
        opened = max(best_ending_at(i, j - 1, 0), best_ending_at(i, j - 1, 1))
        extended = best_ending_at(i, j - 1, 2)
        return max(opened + GAP_OPEN, extended + GAP_EXTEND)

    best = 0.0
    for i in range(len(a)):
        for j in range(len(b)):
            best = max(best, best_ending_at(i, j, 0))
    return min(1.0, best / (MATCH_SCORE * min(len(a), len(b))))


def test_length_similarity_values():
    assert length_similarity("Superbad", "Superbad (2007)") == pytest.approx(8 / 15, abs=1e-12)
    assert length_similarity("abc", "abc") == 1.0
    assert length_similarity("", "x") == 0.0
    assert length_similarity("", "") == 1.0


def test_swg_identity_and_disjoint():
    assert swg_similarity("Superbad", "Superbad") == 1.0
    assert swg_similarity("abc", "xyz") == 0.0
    assert swg_similarity("", "") == 1.0
    assert swg_similarity("", "x") == 0.0


def test_swg_frozen_reference_values():
    # value confirmed by the independent reference scorer: the shorter string
    # aligns exactly as a prefix, so the normalized score is 1.0
    assert swg_reference("Superbad", "Superbad (2007)") == pytest.approx(1.0)
    assert swg_similarity("Superbad", "Superbad (2007)") == pytest.approx(1.0, abs=1e-12)
    for pair in [("kitten", "sitting"), ("abcdef", "abdf"), ("Star Wars", "Star Trek"),
                 ("aab", "ab"), ("xaxbxc", "abc")]:
        assert swg_similarity(*pair) == pytest.approx(swg_reference(*pair), abs=1e-9)


def test_combined_values():
    assert combined_similarity("same", "same") == 1.0
    assert combined_similarity("abc", "xyz") == pytest.approx(0.5)
    expect = (1.0 + 8 / 15) / 2
    assert combined_similarity("Superbad", "Superbad (2007)") == pytest.approx(expect, abs=1e-12)


def test_symmetry_and_range_random_pairs():
    rng = random.Random(11)
    alphabet = "abcdefgh ()0123"
    for _ in range(1000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        for fn in (length_similarity, swg_similarity, combined_similarity):
            s_ab, s_ba = fn(a, b), fn(b, a)
            assert abs(s_ab - s_ba) <= 1e-12
            assert 0.0 <= s_ab <= 1.0
    for _ in range(50):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 10)))
        assert combined_similarity(s, s) == 1.0


def test_build_index_movie_pairs(movie_db, movie_mds, movie_examples):
    idx = build_similarity_index(movie_db, list(movie_examples.values()), movie_mds,
                                 k_m=2, threshold=0.5)
    pair = (("highGrossing", "title"), ("movies", "title"))
    assert ("Superbad (2007)", pytest.approx((1.0 + 8 / 15) / 2)) == idx.entries[pair]["Superbad"][0]


def test_build_index_threshold_above_one(movie_db, movie_mds, movie_examples):
    idx = build_similarity_index(movie_db, list(movie_examples.values()), movie_mds,
                                 k_m=2, threshold=1.001)
    assert idx.entries == {}


def test_build_index_truncation(movie_db, movie_mds, movie_examples):
    idx = build_similarity_index(movie_db, list(movie_examples.values()), movie_mds,
                                 k_m=1, threshold=0.1)
    for table in idx.entries.values():
        for matches in table.values():
            assert len(matches) <= 1
            for _, score in matches:
                assert score >= 0.1


def test_index_lists_sorted_and_thresholded(movie_db, movie_mds, movie_examples):
    idx = build_similarity_index(movie_db, list(movie_examples.values()), movie_mds,
                                 k_m=5, threshold=0.3)
    for table in idx.entries.values():
        for matches in table.values():
            scores = [s for _, s in matches]
            assert scores == sorted(scores, reverse=True)
            assert all(s >= 0.3 for s in scores)


def test_index_symmetric_lookup():
    pair = (("t", "v"), ("a", "x"))
    idx = textsim.SimilarityIndex(k_m=3, threshold=0.0,
                                  entries={pair: {"p": [("q", 0.9)]}})
    assert [(m, s) for m, s, _ in idx.matches("a", "x", "p")] == [("q", 0.9)]
    assert [(m, s) for m, s, _ in idx.matches("t", "v", "q")] == [("p", 0.9)]
    assert idx.matches("a", "x", "zzz") == []
    assert idx.covers("a", "x") and idx.covers("t", "v")
    assert not idx.covers("a", "k")
