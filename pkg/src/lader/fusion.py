"""Score fusion: interpolate dense retrieval with click-log evidence.

For an incoming query the engine retrieves the top-m most similar logged
queries and the top-n most similar documents, softmax-normalizes both score
lists, and scores every candidate document d as

    Score(d) = sum_j  s_d~[j] * 1(d = d_j)  +  lambda * sum_i  s_q~[i] * 1(d in rel(q_i))

where the candidate set is the union of the top-n documents and the clicked
documents of the top-m similar queries. A document clicked for several
similar queries accumulates every matching term.

Modes: ``full`` scores both terms, ``dr_only`` zeroes the log term, and
``la_only`` zeroes the dense term and keeps only clicked candidates.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Container, Mapping

import numpy as np

from .embed import EmbeddingMatrix
from .index import FlatIndex, ScoredList, search

log = logging.getLogger(__name__)

FULL = "full"
DR_ONLY = "dr_only"
LA_ONLY = "la_only"
MODES = (FULL, DR_ONLY, LA_ONLY)

DEFAULT_LAMBDA = {"HEAD": 0.5, "TORSO": 0.5, "TAIL": 0.2}


@dataclass(frozen=True)
class FusionConfig:
    m: int = 1000              # similar queries to retrieve
    n: int = 1000              # similar documents to retrieve
    lam: float = 0.5           # log-augmentation weight
    mode: str = FULL
    exclude_self: bool = True  # drop the query itself from the similar-query list

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"m and n must be >= 1, got m={self.m}, n={self.n}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class LaderTrace:
    """Everything produced while scoring one query."""

    query_id: str
    similar_queries: ScoredList   # softmax-normalized
    similar_docs: ScoredList      # softmax-normalized
    final: ScoredList
    missing_rel: int = 0          # clicked doc ids absent from the collection


def softmax(scores) -> np.ndarray:
    """Shift-stable softmax over a non-empty 1-D array."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("softmax of an empty score list")
    if not np.isfinite(s).all():
        raise ValueError("softmax input contains non-finite values")
    e = np.exp(s - s.max())
    return e / e.sum()


def softmax_list(scored: ScoredList) -> ScoredList:
    """Softmax-normalize a ranked list in place of its raw scores."""
    if not scored:
        return scored
    probs = softmax(scored.scores())
    return ScoredList(entries=tuple(
        (eid, float(p)) for (eid, _), p in zip(scored.entries, probs)
    ))


def score_candidates(similar_queries: ScoredList, similar_docs: ScoredList,
                     rel: Mapping[str, frozenset[str]], lam: float,
                     mode: str = FULL,
                     known_docs: Container[str] | None = None) -> tuple[ScoredList, int]:
    """Apply the fusion formula to already-normalized lists.

    Returns the ranked candidates and the count of clicked doc ids that were
    skipped because they are missing from ``known_docs``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    scores: dict[str, float] = {}
    if mode != LA_ONLY:
        for doc_id, s in similar_docs:
            scores[doc_id] = s
    missing = 0
    for query_id, sq in similar_queries:
        for doc_id in sorted(rel.get(query_id, ())):
            if known_docs is not None and doc_id not in known_docs:
                missing += 1
                continue
            if mode == DR_ONLY:
                # log candidates stay in the pool with a zeroed log term, so
                # dr_only matches full mode with lambda = 0 exactly
                scores.setdefault(doc_id, 0.0)
            else:
                scores[doc_id] = scores.get(doc_id, 0.0) + lam * sq
    return ScoredList.ranked(scores.items()), missing


def fuse(query_id: str, similar_queries_raw: ScoredList, similar_docs_raw: ScoredList,
         rel: Mapping[str, frozenset[str]], cfg: FusionConfig,
         known_docs: Container[str] | None = None) -> LaderTrace:
    """Normalize raw retrieved lists and score candidates (no retrieval here)."""
    sim_q = softmax_list(similar_queries_raw)
    sim_d = softmax_list(similar_docs_raw)
    final, missing = score_candidates(sim_q, sim_d, rel, cfg.lam, cfg.mode, known_docs)
    return LaderTrace(query_id=query_id, similar_queries=sim_q, similar_docs=sim_d,
                      final=final, missing_rel=missing)


def _drop_self(retrieved: ScoredList, query_id: str, query_vec: np.ndarray,
               q_index: FlatIndex) -> ScoredList:
    if query_id not in q_index.matrix:
        return retrieved
    stored = q_index.matrix.row(query_id)
    if not np.array_equal(stored, np.asarray(query_vec, dtype=np.float32).reshape(-1)):
        return retrieved
    return ScoredList(entries=tuple(e for e in retrieved.entries if e[0] != query_id))


def retrieve_similar_queries(query_vec, q_index: FlatIndex, cfg: FusionConfig,
                             query_id: str = "") -> ScoredList:
    """Top-m logged queries, optionally dropping the query's own log entry."""
    sim_q = search(q_index, query_vec, cfg.m) if len(q_index) else ScoredList(entries=())
    if cfg.exclude_self and query_id:
        sim_q = _drop_self(sim_q, query_id, np.asarray(query_vec), q_index)
    return sim_q


def lader_score(query_vec, q_index: FlatIndex, d_index: FlatIndex,
                rel: Mapping[str, frozenset[str]], cfg: FusionConfig,
                query_id: str = "") -> LaderTrace:
    """Full scoring round trip for one query vector: retrieve, normalize, fuse."""
    sim_q = retrieve_similar_queries(query_vec, q_index, cfg, query_id=query_id)
    sim_d = search(d_index, query_vec, cfg.n) if len(d_index) else ScoredList(entries=())
    return fuse(query_id, sim_q, sim_d, rel, cfg, known_docs=d_index.matrix)


def run_queries(queries: EmbeddingMatrix, q_index: FlatIndex, d_index: FlatIndex,
                rel: Mapping[str, frozenset[str]], cfg: FusionConfig, k_out: int,
                lambda_of: Callable[[str], float] | None = None,
                threads: int = 1) -> list[LaderTrace]:
    """Score every query in ``queries``, truncating final lists to ``k_out``.

    ``lambda_of`` optionally supplies a per-query lambda (e.g. by frequency
    group); otherwise ``cfg.lam`` applies throughout. Output order matches
    input order regardless of ``threads``.
    """
    if k_out < 1:
        raise ValueError(f"k_out must be >= 1, got {k_out}")

    def one(i: int) -> LaderTrace:
        qid = queries.ids[i]
        local = cfg if lambda_of is None else replace(cfg, lam=lambda_of(qid))
        trace = lader_score(queries.data[i], q_index, d_index, rel, local, query_id=qid)
        return replace(trace, final=trace.final.top(k_out))

    if threads > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(one, range(len(queries))))
    else:
        traces = [one(i) for i in range(len(queries))]
    skipped = sum(t.missing_rel for t in traces)
    if skipped:
        log.warning("skipped %d clicked doc ids missing from the collection", skipped)
    return traces


def write_run(traces: list[LaderTrace], path, tag: str = "lader") -> None:
    """Write traces as a TREC run file: query_id Q0 doc_id rank score tag."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for trace in traces:
            for rank, (doc_id, score) in enumerate(trace.final, start=1):
                fh.write(f"{trace.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


__all__ = [
    "FULL", "DR_ONLY", "LA_ONLY", "MODES", "DEFAULT_LAMBDA",
    "FusionConfig", "LaderTrace",
    "softmax", "softmax_list", "score_candidates", "fuse",
    "retrieve_similar_queries", "lader_score", "run_queries", "write_run",
]
