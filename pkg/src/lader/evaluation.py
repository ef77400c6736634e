"""Relevance judgments from click logs and ranking metrics.

Two judgment flavors: RAW gives every clicked document grade 1; DCTR grades
by clicks divided by impressions and keeps zero-click entries at grade 0
(judged but non-relevant). NDCG uses linear gain by default, matching
fractional click-through grades; exponential gain is available via the
``gain`` argument.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping

from .corpus import ClickLog, GROUPS, TAIL
from .errors import ParseError, ValidationError
from .index import ScoredList

OVERALL = "ALL"
METRICS = ("ndcg@10", "mrr", "mrr@10", "recall@10", "recall@1000")

RunFile = dict[str, ScoredList]


@dataclass
class Qrels:
    judgments: dict[str, dict[str, float]]

    def relevant(self, query_id: str) -> set[str]:
        return {d for d, g in self.judgments.get(query_id, {}).items() if g > 0}

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.judgments


def build_raw_qrels(log: ClickLog) -> Qrels:
    """Binary judgments: grade 1 for every document with at least one click."""
    judgments: dict[str, dict[str, float]] = {}
    for r in log.records:
        if r.clicks >= 1:
            judgments.setdefault(r.query_id, {})[r.doc_id] = 1.0
    return Qrels(judgments=judgments)


def build_dctr_qrels(log: ClickLog) -> Qrels:
    """Graded judgments: clicks / impressions, zero-click entries kept at 0."""
    judgments: dict[str, dict[str, float]] = {}
    for r in log.records:
        judgments.setdefault(r.query_id, {})[r.doc_id] = r.clicks / r.impressions
    return Qrels(judgments=judgments)


def _gain(grade: float, gain: str) -> float:
    if gain == "linear":
        return grade
    if gain == "exponential":
        return 2.0 ** grade - 1.0
    raise ValueError(f"unknown gain {gain!r}")


def ndcg_at_k(run: ScoredList, judged: Mapping[str, float], k: int,
              gain: str = "linear") -> float:
    """Normalized DCG at cutoff ``k``; 0.0 when nothing relevant is judged."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dcg = 0.0
    for i, (doc_id, _) in enumerate(run.entries[:k], start=1):
        dcg += _gain(judged.get(doc_id, 0.0), gain) / math.log2(i + 1)
    ideal = sorted(judged.values(), reverse=True)[:k]
    idcg = 0.0
    for i, grade in enumerate(ideal, start=1):
        idcg += _gain(grade, gain) / math.log2(i + 1)
    return dcg / idcg if idcg > 0 else 0.0


def mrr(run: ScoredList, judged: Mapping[str, float], cutoff: int | None = None) -> float:
    """Reciprocal rank of the first document with grade > 0; 0.0 if none."""
    entries = run.entries if cutoff is None else run.entries[:cutoff]
    for rank, (doc_id, _) in enumerate(entries, start=1):
        if judged.get(doc_id, 0.0) > 0:
            return 1.0 / rank
    return 0.0


def recall_at_k(run: ScoredList, judged: Mapping[str, float], k: int) -> float:
    """Fraction of relevant documents retrieved in the top k; 0.0 if none judged relevant."""
    relevant = {d for d, g in judged.items() if g > 0}
    if not relevant:
        return 0.0
    hits = sum(1 for doc_id, _ in run.entries[:k] if doc_id in relevant)
    return hits / len(relevant)


@dataclass
class MetricTable:
    """Per-group metric means plus the queries each mean covers."""

    rows: list[tuple[str, str, float, int]] = field(default_factory=list)
    unjudged: list[str] = field(default_factory=list)

    def value(self, group: str, metric: str) -> float:
        for g, m, v, _ in self.rows:
            if g == group and m == metric:
                return v
        raise KeyError((group, metric))

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["group", "metric", "value", "n_queries"])
            for group, metric, value, n in self.rows:
                writer.writerow([group, metric, f"{value:.6f}", n])


def evaluate(run: Mapping[str, ScoredList], qrels: Qrels,
             groups: Mapping[str, str] | None = None,
             default_group: str = TAIL, gain: str = "linear") -> MetricTable:
    """Mean NDCG@10, MRR, MRR@10, Recall@10 and Recall@1000, overall and per group.

    Run queries without judgments are reported in ``unjudged`` and skipped.
    Queries with no relevant document count as 0 for NDCG/MRR but are skipped
    in the recall means.
    """
    groups = groups or {}
    per_query: dict[str, dict[str, float | None]] = {}
    unjudged: list[str] = []
    for qid in sorted(run):
        if qid not in qrels:
            unjudged.append(qid)
            continue
        judged = qrels.judgments[qid]
        ranked = run[qid]
        has_relevant = any(g > 0 for g in judged.values())
        per_query[qid] = {
            "ndcg@10": ndcg_at_k(ranked, judged, 10, gain=gain),
            "mrr": mrr(ranked, judged),
            "mrr@10": mrr(ranked, judged, cutoff=10),
            "recall@10": recall_at_k(ranked, judged, 10) if has_relevant else None,
            "recall@1000": recall_at_k(ranked, judged, 1000) if has_relevant else None,
        }

    table = MetricTable(unjudged=unjudged)
    group_of_query = {qid: groups.get(qid, default_group) for qid in per_query}
    for group in (OVERALL,) + GROUPS:
        qids = [q for q in sorted(per_query)
                if group == OVERALL or group_of_query[q] == group]
        if not qids:
            continue
        for metric in METRICS:
            values = [per_query[q][metric] for q in qids if per_query[q][metric] is not None]
            if not values:
                continue
            table.rows.append((group, metric, sum(values) / len(values), len(values)))
    return table


def write_qrels(qrels: Qrels, path) -> None:
    """TREC qrels format: query_id 0 doc_id grade (grade may be fractional)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(qrels.judgments):
            for did in sorted(qrels.judgments[qid]):
                fh.write(f"{qid} 0 {did} {qrels.judgments[qid][did]!r}\n")


def read_qrels(path) -> Qrels:
    judgments: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", path, lineno)
            qid, _, did, raw = parts
            try:
                grade = float(raw)
            except ValueError as exc:
                raise ParseError(f"bad grade {raw!r}", path, lineno) from exc
            if not math.isfinite(grade) or grade < 0:
                raise ParseError(f"grade must be finite and non-negative, got {raw}", path, lineno)
            judgments.setdefault(qid, {})[did] = grade
    return Qrels(judgments=judgments)


def read_run(path) -> RunFile:
    """Read a TREC run file, checking ranks are contiguous and docs unique."""
    raw: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"expected 6 fields, got {len(parts)}", path, lineno)
            qid, _, did, rank, score, _ = parts
            try:
                raw.setdefault(qid, []).append((int(rank), did, float(score)))
            except ValueError as exc:
                raise ParseError(f"bad rank/score: {exc}", path, lineno) from exc
    run: RunFile = {}
    for qid, entries in raw.items():
        entries.sort()
        if [r for r, _, _ in entries] != list(range(1, len(entries) + 1)):
            raise ValidationError(f"{path}: ranks for query {qid!r} are not contiguous from 1")
        docs = [d for _, d, _ in entries]
        if len(set(docs)) != len(docs):
            raise ValidationError(f"{path}: duplicate document for query {qid!r}")
        run[qid] = ScoredList(entries=tuple((d, s) for _, d, s in entries))
    return run


__all__ = [
    "OVERALL", "METRICS", "RunFile", "Qrels", "MetricTable",
    "build_raw_qrels", "build_dctr_qrels",
    "ndcg_at_k", "mrr", "recall_at_k", "evaluate",
    "write_qrels", "read_qrels", "read_run",
]
