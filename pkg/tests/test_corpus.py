import random

import pytest

from lader import corpus
from lader.corpus import (ClickLog, ClickRecord, Document, Query, Triple,
                          group_of, subsample_queries)
from lader.errors import ParseError, ValidationError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestDocuments:
    def test_load_basic(self, tmp_path):
        p = write(tmp_path / "docs.jsonl",
                  '{"id":"d1","title":"aspirin","abstract":"acid"}\n')
        docs = corpus.load_documents(p)
        assert docs == [Document(id="d1", title="aspirin", abstract="acid")]

    def test_empty_file(self, tmp_path):
        assert corpus.load_documents(write(tmp_path / "d.jsonl", "")) == []

    def test_duplicate_id(self, tmp_path):
        p = write(tmp_path / "d.jsonl",
                  '{"id":"d1","title":"a","abstract":""}\n'
                  '{"id":"d1","title":"b","abstract":""}\n')
        with pytest.raises(ValidationError, match="duplicate"):
            corpus.load_documents(p)

    def test_malformed_line_reports_lineno(self, tmp_path):
        p = write(tmp_path / "d.jsonl",
                  '{"id":"d1","title":"a","abstract":""}\n{not json\n')
        with pytest.raises(ParseError, match=":2"):
            corpus.load_documents(p)

    def test_id_with_whitespace_rejected(self):
        with pytest.raises(ValidationError):
            Document(id="d 1", title="x")

    def test_text_joins_title_abstract(self):
        assert Document(id="d1", title="a", abstract="b").text == "a b"
        assert Document(id="d1", title="a", abstract="").text == "a"


class TestClickLog:
    def test_aggregation_sums(self, tmp_path):
        p = write(tmp_path / "log.tsv", "q1\td1\t3\t10\nq1\td1\t1\t5\n")
        log = corpus.load_click_log(p)
        assert log.records == (ClickRecord("q1", "d1", 4, 15),)

    def test_zero_clicks_not_in_rel(self, tmp_path):
        p = write(tmp_path / "log.tsv", "q1\td1\t0\t10\nq1\td2\t1\t4\n")
        log = corpus.load_click_log(p)
        assert log.rel == {"q1": frozenset({"d2"})}

    def test_clicks_above_impressions_rejected(self, tmp_path):
        p = write(tmp_path / "log.tsv", "q1\td1\t2\t1\n")
        with pytest.raises(ValidationError, match="exceed"):
            corpus.load_click_log(p)

    def test_non_integer_counts(self, tmp_path):
        p = write(tmp_path / "log.tsv", "q1\td1\ttwo\t10\n")
        with pytest.raises(ParseError, match=":1"):
            corpus.load_click_log(p)

    def test_aggregation_order_independent(self, tmp_path):
        rows = [f"q{i % 5}\td{i % 7}\t1\t3" for i in range(40)]
        a = corpus.load_click_log(write(tmp_path / "a.tsv", "\n".join(rows) + "\n"))
        shuffled = rows[:]
        random.Random(0).shuffle(shuffled)
        b = corpus.load_click_log(write(tmp_path / "b.tsv", "\n".join(shuffled) + "\n"))
        assert a == b

    def test_rel_matches_clicked_records(self, tmp_path):
        rows = ["q1\td1\t0\t5", "q1\td2\t2\t5", "q2\td1\t1\t1"]
        log = corpus.load_click_log(write(tmp_path / "l.tsv", "\n".join(rows) + "\n"))
        expected = {}
        for r in log.records:
            if r.clicks >= 1:
                expected.setdefault(r.query_id, set()).add(r.doc_id)
        assert {q: set(d) for q, d in log.rel.items()} == expected

    def test_frequencies_count_distinct_records(self, tmp_path):
        p = write(tmp_path / "l.tsv", "q1\td1\t1\t2\nq1\td2\t0\t2\nq2\td1\t1\t1\n")
        assert corpus.load_click_log(p).frequencies() == {"q1": 2, "q2": 1}


class TestQueries:
    def test_frequency_column(self, tmp_path):
        p = write(tmp_path / "q.tsv", "q1\theart attack\t50\n")
        assert corpus.load_queries(p) == [Query("q1", "heart attack", 50)]

    def test_frequency_from_log_fallback(self, tmp_path):
        log = ClickLog(records=(ClickRecord("q1", "d1", 1, 2),
                                ClickRecord("q1", "d2", 1, 2)))
        p = write(tmp_path / "q.tsv", "q1\theart\nq2\tvalve\n")
        queries = corpus.load_queries(p, log=log)
        assert [q.frequency for q in queries] == [2, 0]

    def test_duplicate_query_id(self, tmp_path):
        p = write(tmp_path / "q.tsv", "q1\ta\nq1\tb\n")
        with pytest.raises(ValidationError, match="duplicate"):
            corpus.load_queries(p)

    def test_bad_frequency(self, tmp_path):
        p = write(tmp_path / "q.tsv", "q1\ta\tmany\n")
        with pytest.raises(ParseError):
            corpus.load_queries(p)

    def test_empty_text_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            corpus.load_queries(write(tmp_path / "q.tsv", "q1\t\t3\n"))


class TestTriples:
    def test_load(self, tmp_path):
        p = write(tmp_path / "t.tsv", "q1\td1\td2\n")
        assert corpus.load_triples(p) == [Triple("q1", "d1", "d2")]

    def test_pos_equals_neg_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            corpus.load_triples(write(tmp_path / "t.tsv", "q1\td1\td1\n"))


class TestGroupOf:
    @pytest.mark.parametrize("freq,expected", [
        (45, "HEAD"), (100, "HEAD"),
        (6, "TORSO"), (44, "TORSO"), (20, "TORSO"),
        (5, "TAIL"), (0, "TAIL"),
    ])
    def test_boundaries(self, freq, expected):
        assert group_of(freq) == expected

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            group_of(-1)

    def test_partitions_all_frequencies(self):
        """Every frequency maps to exactly one group."""
        for f in range(0, 200):
            assert sum(group_of(f) == g for g in corpus.GROUPS) == 1


class TestSubsample:
    @staticmethod
    def make_log(n_queries=100):
        return ClickLog(records=tuple(
            ClickRecord(f"q{i:03d}", f"d{j}", 1, 2)
            for i in range(n_queries) for j in range(3)
        ))

    def test_full_proportion_is_identity(self):
        log = self.make_log()
        assert subsample_queries(log, 1.0, seed=0) == log

    def test_zero_proportion_is_empty(self):
        assert subsample_queries(self.make_log(), 0.0, seed=0).records == ()

    def test_seeded_sample_is_stable(self):
        log = self.make_log(100)
        a = subsample_queries(log, 0.5, seed=11)
        b = subsample_queries(log, 0.5, seed=11)
        assert set(a.query_ids()) == set(b.query_ids())
        assert len(a.query_ids()) == 50

    def test_out_of_range_proportion(self):
        with pytest.raises(ValueError):
            subsample_queries(self.make_log(), 1.5, seed=0)

    def test_samples_nest_as_proportion_grows(self):
        log = self.make_log(60)
        kept = [set(subsample_queries(log, p, seed=5).query_ids())
                for p in (0.2, 0.5, 0.9)]
        assert kept[0] <= kept[1] <= kept[2]


class TestWriters:
    def test_round_trips(self, tmp_path):
        docs = [Document("d1", "title one", "abs"), Document("d2", "title two")]
        queries = [Query("q1", "text here", 7)]
        log = ClickLog(records=(ClickRecord("q1", "d1", 2, 9),))
        corpus.write_documents(docs, tmp_path / "d.jsonl")
        corpus.write_queries(queries, tmp_path / "q.tsv")
        corpus.write_click_log(log, tmp_path / "l.tsv")
        assert corpus.load_documents(tmp_path / "d.jsonl") == docs
        assert corpus.load_queries(tmp_path / "q.tsv") == queries
        assert corpus.load_click_log(tmp_path / "l.tsv") == log
