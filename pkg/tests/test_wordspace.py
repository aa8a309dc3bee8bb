"""
Word enumeration: coverage, ordering and products against naive recomputation.
"""
import itertools

import numpy as np
import pytest

from selfaffine.errors import BudgetError, DomainError
from selfaffine.maps import MatrixTuple
from selfaffine.wordspace import (
    check_budget,
    iter_shard_blocks,
    prefix_length,
    shard_range,
    visit_level,
    word_digits,
    word_from_rank,
    word_product,
)


def naive(maps, word):
    p = np.eye(maps.shape[1])
    for i in word:
        p = p @ maps[i - 1]
    return p


@pytest.fixture
def maps3(rng):
    return MatrixTuple(rng.standard_normal((3, 2, 2)) * 0.5 + np.eye(2))


class TestWords:
    def test_word_product_order(self):
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        b = np.array([[1.0, 0.0], [1.0, 1.0]])
        t = MatrixTuple([a, b])
        np.testing.assert_array_equal(word_product(t, "12"), a @ b)
        np.testing.assert_array_equal(word_product(t, [2, 1, 1]), b @ a @ a)

    def test_bad_symbol(self, maps3):
        with pytest.raises(DomainError):
            word_product(maps3, [4])
        with pytest.raises(DomainError):
            word_product(maps3, [])

    def test_rank_roundtrip(self):
        words = list(itertools.product(range(1, 4), repeat=4))
        for r, w in enumerate(words):
            assert word_from_rank(r, 4, 3) == w
        np.testing.assert_array_equal(word_digits(0, len(words), 4, 3) + 1, np.array(words))

    def test_budget(self):
        assert check_budget(4, 10) == 4**10
        with pytest.raises(BudgetError, match="--budget"):
            check_budget(4, 10, budget=1000)


class TestSharding:
    def test_prefix_length(self):
        assert [prefix_length(3, s) for s in (1, 2, 3, 4, 9, 10)] == [0, 1, 1, 2, 2, 3]

    @pytest.mark.parametrize("shards", [1, 2, 3, 5, 7, 16])
    def test_ranges_partition_every_level(self, shards):
        for level in range(1, 6):
            bounds = [shard_range(level, s, shards, 3) for s in range(shards)]
            assert bounds[0][0] == 0 and bounds[-1][1] == 3**level
            for (lo, hi), (lo2, _) in zip(bounds, bounds[1:]):
                assert hi == lo2 and lo <= hi

    @pytest.mark.parametrize("shards,chunk", [(1, 1 << 16), (2, 9), (4, 3), (5, 1)])
    def test_blocks_cover_all_words_once(self, maps3, shards, chunk):
        n = 5
        seen = {m: [] for m in range(1, n + 1)}
        for shard in range(shards):
            for blk in iter_shard_blocks(maps3, n, shard, shards, chunk=chunk):
                words = word_digits(blk.start, len(blk.products), blk.level, 3) + 1
                for w, p in zip(words, blk.products):
                    seen[blk.level].append(tuple(w))
                    np.testing.assert_allclose(p, naive(maps3.maps, w), rtol=1e-13, atol=1e-15)
        for m in range(1, n + 1):
            assert seen[m] == list(itertools.product(range(1, 4), repeat=m))

    def test_level_filter(self, maps3):
        levels = {blk.level for blk in iter_shard_blocks(maps3, 4, levels=(2, 4))}
        assert levels == {2, 4}

    def test_visit_level(self, maps3):
        visits = []
        summary = visit_level(maps3, 4, visits.append, shards=4)
        assert summary.visits == 81 and sum(summary.per_shard) == 81
        assert [v.word for v in visits] == list(itertools.product(range(1, 4), repeat=4))
        assert [v.shard for v in visits] == sorted(v.shard for v in visits)
        for v in visits[::7]:
            np.testing.assert_allclose(v.product, naive(maps3.maps, v.word), rtol=1e-13)

    def test_visit_budget(self, maps3):
        with pytest.raises(BudgetError):
            visit_level(maps3, 8, lambda v: None, budget=100)

    def test_large_level_count(self):
        t = MatrixTuple(np.array([np.eye(2) / 2] * 4))
        total = sum(len(b.products) for b in iter_shard_blocks(t, 10, levels=(10,)))
        assert total == 4**10
