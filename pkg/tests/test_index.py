import numpy as np
import pytest

from lader.embed import EmbeddingMatrix
from lader.errors import FormatError
from lader.index import (FlatIndex, ScoredList, batch_search, load_index,
                         save_index, search)


def naive_topk(matrix: EmbeddingMatrix, query, k):
    """Reference oracle: full float64 sort by (-score, id)."""
    scores = matrix.data.astype(np.float64) @ np.asarray(query, np.float64)
    ranked = sorted(zip(matrix.ids, scores), key=lambda p: (-p[1], p[0]))
    return ranked[:min(k, len(matrix))]


def make_index(rows, dim, seed=0):
    rng = np.random.default_rng(seed)
    m = EmbeddingMatrix(ids=[f"v{i:05d}" for i in range(rows)],
                        data=rng.standard_normal((rows, dim)).astype(np.float32),
                        dim=dim)
    return FlatIndex(matrix=m)


class TestSearch:
    def test_dominant_coordinate(self):
        m = EmbeddingMatrix(ids=["e1", "e2"],
                            data=np.array([[1, 0], [0, 1]], np.float32), dim=2)
        result = search(FlatIndex(matrix=m), [1.0, 0.1], k=1)
        assert result.entries == (("e1", 1.0),)

    def test_full_ordering(self):
        m = EmbeddingMatrix(ids=["e1", "e2"],
                            data=np.array([[1, 0], [0, 1]], np.float32), dim=2)
        result = search(FlatIndex(matrix=m), [1.0, 0.1], k=2)
        assert result.entries == (("e1", 1.0), ("e2", pytest.approx(0.1)))

    def test_k_larger_than_index_returns_all(self):
        index = make_index(5, 4)
        assert len(search(index, np.ones(4), k=100)) == 5

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="dim"):
            search(make_index(3, 4), np.ones(5), k=1)

    def test_k_below_one(self):
        with pytest.raises(ValueError):
            search(make_index(3, 4), np.ones(4), k=0)

    def test_empty_index(self):
        index = FlatIndex(matrix=EmbeddingMatrix(ids=[], data=np.empty((0, 4)), dim=4))
        assert search(index, np.ones(4), k=3).entries == ()

    def test_matches_naive_oracle(self):
        """1,000 random rows, 100 queries: identical ids to a full-sort oracle."""
        index = make_index(1000, 16, seed=1)
        rng = np.random.default_rng(2)
        for _ in range(100):
            q = rng.standard_normal(16)
            got = search(index, q, k=10)
            want = naive_topk(index.matrix, q, 10)
            assert got.ids() == [i for i, _ in want]
            np.testing.assert_allclose(got.scores(), [s for _, s in want], rtol=1e-12)

    def test_prefix_property(self):
        index = make_index(200, 8, seed=3)
        q = np.random.default_rng(4).standard_normal(8)
        for k in (1, 5, 20, 50):
            assert search(index, q, k).entries == search(index, q, k + 1).entries[:k]

    def test_tie_break_ascending_id(self):
        data = np.array([[1, 0], [1, 0], [1, 0], [0, 1]], np.float32)
        m = EmbeddingMatrix(ids=["c", "a", "b", "z"], data=data, dim=2)
        result = search(FlatIndex(matrix=m), [1.0, 0.0], k=2)
        assert result.ids() == ["a", "b"]

    def test_repeat_searches_identical(self):
        index = make_index(300, 8, seed=5)
        q = np.random.default_rng(6).standard_normal(8)
        assert search(index, q, 25).entries == search(index, q, 25).entries


class TestBatchSearch:
    def test_singleton_matches_search(self):
        index = make_index(50, 8, seed=7)
        queries = make_index(1, 8, seed=8).matrix
        assert batch_search(index, queries, 5) == [search(index, queries.data[0], 5)]

    def test_empty_batch(self):
        index = make_index(10, 4)
        queries = EmbeddingMatrix(ids=[], data=np.empty((0, 4)), dim=4)
        assert batch_search(index, queries, 5) == []

    def test_parallel_equals_sequential(self):
        index = make_index(400, 8, seed=9)
        queries = make_index(100, 8, seed=10).matrix
        assert batch_search(index, queries, 10, threads=4) == \
            batch_search(index, queries, 10, threads=1)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            batch_search(make_index(5, 4), make_index(2, 8).matrix, 3)


class TestPersistence:
    def test_round_trip_search_identical(self, tmp_path):
        index = make_index(100, 8, seed=11)
        q = np.random.default_rng(12).standard_normal(8)
        before = search(index, q, 20)
        save_index(index, tmp_path / "i.lidx")
        after = search(load_index(tmp_path / "i.lidx"), q, 20)
        assert before == after

    def test_deep_search_regression_after_reload(self, tmp_path):
        index = make_index(1200, 16, seed=13)
        q = np.random.default_rng(14).standard_normal(16)
        before = search(index, q, 1000)
        save_index(index, tmp_path / "deep.lidx")
        after = search(load_index(tmp_path / "deep.lidx"), q, 1000)
        assert before == after

    def test_wrong_magic(self, tmp_path):
        (tmp_path / "bad.lidx").write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(FormatError, match="magic"):
            load_index(tmp_path / "bad.lidx")

    def test_truncated_index(self, tmp_path):
        (tmp_path / "short.lidx").write_bytes(b"LI")
        with pytest.raises(FormatError):
            load_index(tmp_path / "short.lidx")


class TestScoredList:
    def test_ranked_sorts_and_breaks_ties(self):
        sl = ScoredList.ranked([("b", 1.0), ("a", 1.0), ("c", 2.0)])
        assert sl.ids() == ["c", "a", "b"]

    def test_top_truncates(self):
        sl = ScoredList.ranked([("a", 3.0), ("b", 2.0), ("c", 1.0)])
        assert sl.top(2).ids() == ["a", "b"]
