"""Seeded synthetic corpora with controllably informative click logs.

Topics live on the unit sphere; document and query embeddings are their
topic centroid plus Gaussian noise, and ground-truth relevance is same-topic
membership. Topics are split into frequency tiers: queries of high-tier
topics carry HEAD-range frequencies and click far more documents per query,
so log evidence concentrates on frequent queries; they also carry more
embedding noise, since frequent real-world queries are the vague ones that
dense retrieval alone serves worst. Clicks land on a popularity-biased
subset of a topic's documents; with probability ``click_noise`` a click
flips to a random off-topic document.

Per topic, the last third of queries is held out of the log for evaluation.
``write_fixture`` emits every corpus/embedding file format consumed by the
command-line pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (ClickLog, ClickRecord, Document, Query,
                     write_click_log, write_documents, write_queries)
from .embed import EmbeddingMatrix, save_embeddings
from .evaluation import Qrels, write_qrels

# Embedding geometry: inner-product spread (scale squared) is what makes the
# downstream softmax concentrate on genuinely similar items, mirroring a
# trained encoder. Queries carry less noise than documents, so finding similar
# queries is easier than finding relevant documents directly.
EMBED_SCALE = 2.0
DOC_NOISE = 0.65
GLOBAL_VOCAB = 150
TOPIC_VOCAB = 12
SHARED_VOCAB = 4  # words each topic borrows from its neighbor, confusing BM25


@dataclass(frozen=True)
class Tier:
    name: str
    frequency: int       # assigned to every query of the topic
    clicks_per_query: int
    query_noise: float   # frequent queries are vaguer, so dense retrieval
                         # has more headroom for log evidence to help


_TIERS = (
    Tier("head", 100, 10, 0.30),
    Tier("torso", 20, 7, 0.20),
    Tier("tail", 2, 5, 0.12),
)


@dataclass(frozen=True)
class SynthSpec:
    n_topics: int
    docs_per_topic: int
    queries_per_topic: int
    dim: int = 16
    click_noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if min(self.n_topics, self.docs_per_topic, self.queries_per_topic) < 1:
            raise ValueError("all counts must be >= 1")
        if self.dim < 4:
            raise ValueError(f"dim must be >= 4, got {self.dim}")
        if not 0.0 <= self.click_noise <= 1.0:
            raise ValueError(f"click_noise must be in [0, 1], got {self.click_noise}")


@dataclass
class SynthData:
    documents: list[Document]
    queries: list[Query]              # train + held-out, with tier frequencies
    train_query_ids: list[str]
    eval_query_ids: list[str]
    click_log: ClickLog               # covers train queries only
    doc_matrix: EmbeddingMatrix
    query_matrix: EmbeddingMatrix     # train queries, the searchable log
    eval_query_matrix: EmbeddingMatrix
    qrels: Qrels                      # held-out queries, same-topic docs at grade 1
    topic_of: dict[str, int]          # topic index per doc/query id


def _tier(topic: int, n_topics: int) -> Tier:
    per = math.ceil(n_topics / 3)
    return _TIERS[min(topic // per, 2)]


def generate(spec: SynthSpec) -> SynthData:
    rng = np.random.default_rng(spec.seed)
    centroids = rng.standard_normal((spec.n_topics, spec.dim))
    if spec.n_topics <= spec.dim:
        # orthonormal centroids keep topics cleanly separated on the sphere
        centroids = np.linalg.qr(centroids.T)[0].T[: spec.n_topics]
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    global_words = [f"w{g:03d}" for g in range(GLOBAL_VOCAB)]
    own_words = [[f"t{t:02d}x{j:02d}" for j in range(TOPIC_VOCAB)]
                 for t in range(spec.n_topics)]
    # each topic's effective vocabulary borrows a slice from its neighbor so
    # lexical matching is genuinely ambiguous between adjacent topics
    topic_words = [
        own_words[t][:TOPIC_VOCAB - SHARED_VOCAB]
        + own_words[(t + 1) % spec.n_topics][:SHARED_VOCAB]
        for t in range(spec.n_topics)
    ]

    documents: list[Document] = []
    doc_vecs: list[np.ndarray] = []
    topic_of: dict[str, int] = {}
    docs_by_topic: list[list[str]] = []
    for t in range(spec.n_topics):
        topic_docs = []
        for j in range(spec.docs_per_topic):
            did = f"d{t:02d}_{j:03d}"
            title = " ".join(rng.choice(topic_words[t], size=2))
            abstract = " ".join(
                list(rng.choice(topic_words[t], size=4))
                + list(rng.choice(global_words, size=5))
            )
            documents.append(Document(id=did, title=title, abstract=abstract))
            doc_vecs.append(EMBED_SCALE * (centroids[t] + DOC_NOISE * rng.standard_normal(spec.dim)))
            topic_of[did] = t
            topic_docs.append(did)
        docs_by_topic.append(topic_docs)

    n_eval = spec.queries_per_topic // 3
    queries: list[Query] = []
    query_vecs: dict[str, np.ndarray] = {}
    train_ids: list[str] = []
    eval_ids: list[str] = []
    for t in range(spec.n_topics):
        tier = _tier(t, spec.n_topics)
        for i in range(spec.queries_per_topic):
            qid = f"q{t:02d}_{i:02d}"
            text = " ".join(
                list(rng.choice(topic_words[t], size=2))
                + [str(rng.choice(global_words))]
            )
            queries.append(Query(id=qid, text=text, frequency=tier.frequency))
            query_vecs[qid] = EMBED_SCALE * (
                centroids[t] + tier.query_noise * rng.standard_normal(spec.dim))
            topic_of[qid] = t
            (eval_ids if i >= spec.queries_per_topic - n_eval else train_ids).append(qid)

    # popularity-biased click sampling: earlier docs in a per-topic shuffle
    # are clicked more, mirroring skewed real-world click mass
    records: dict[tuple[str, str], list[int]] = {}
    for t in range(spec.n_topics):
        tier = _tier(t, spec.n_topics)
        order = list(docs_by_topic[t])
        rng.shuffle(order)
        weights = np.power(0.85, np.arange(len(order)))
        weights /= weights.sum()
        topic_train = [q for q in train_ids if topic_of[q] == t]
        off_topic = [d for d in topic_of if d.startswith("d") and topic_of[d] != t]
        for qid in topic_train:
            size = min(tier.clicks_per_query, len(order))
            picked = [str(x) for x in rng.choice(order, size=size, replace=False, p=weights)]
            for did in picked:
                if spec.click_noise > 0 and off_topic and rng.random() < spec.click_noise:
                    did = str(rng.choice(off_topic))
                clicks = int(rng.integers(1, 4))
                cell = records.setdefault((qid, did), [0, 0])
                cell[0] += clicks
                cell[1] += clicks + int(rng.integers(0, 11))
    click_log = ClickLog(records=tuple(
        ClickRecord(q, d, c, i) for (q, d), (c, i) in records.items()
    ))

    qrels = Qrels(judgments={
        qid: {did: 1.0 for did in docs_by_topic[topic_of[qid]]} for qid in eval_ids
    })

    doc_matrix = EmbeddingMatrix(ids=[d.id for d in documents],
                                 data=np.asarray(doc_vecs), dim=spec.dim)
    query_matrix = EmbeddingMatrix(ids=list(train_ids),
                                   data=np.asarray([query_vecs[q] for q in train_ids]),
                                   dim=spec.dim)
    eval_query_matrix = EmbeddingMatrix(ids=list(eval_ids),
                                        data=np.asarray([query_vecs[q] for q in eval_ids]),
                                        dim=spec.dim)
    return SynthData(documents=documents, queries=queries,
                     train_query_ids=train_ids, eval_query_ids=eval_ids,
                     click_log=click_log, doc_matrix=doc_matrix,
                     query_matrix=query_matrix, eval_query_matrix=eval_query_matrix,
                     qrels=qrels, topic_of=topic_of)


def write_fixture(data: SynthData, outdir) -> dict[str, Path]:
    """Write the standard pipeline inputs into ``outdir`` and return the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "documents": outdir / "docs.jsonl",
        "queries": outdir / "queries.tsv",
        "clicklog": outdir / "clicklog.tsv",
        "qrels": outdir / "qrels.txt",
        "doc_embeddings": outdir / "docs.lder",
        "query_embeddings": outdir / "train_queries.lder",
        "eval_query_embeddings": outdir / "eval_queries.lder",
    }
    write_documents(data.documents, paths["documents"])
    write_queries(data.queries, paths["queries"])
    write_click_log(data.click_log, paths["clicklog"])
    write_qrels(data.qrels, paths["qrels"])
    save_embeddings(data.doc_matrix, paths["doc_embeddings"])
    save_embeddings(data.query_matrix, paths["query_embeddings"])
    save_embeddings(data.eval_query_matrix, paths["eval_query_embeddings"])
    return paths


__all__ = ["SynthSpec", "SynthData", "generate", "write_fixture"]
