"""BM25 retrieval over an in-memory inverted index.

Tokenization is Unicode lowercasing followed by splitting on anything that is
not alphanumeric. Defaults k1=0.9, b=0.4 follow the common search-toolkit
defaults; both are exposed on the index.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .corpus import Document
from .index import ScoredList

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[int, int]]]   # term -> [(doc row, term freq)]
    doc_ids: list[str]
    doc_lengths: list[int]
    avg_doc_length: float
    doc_count: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    _idf: dict[str, float] = field(init=False, repr=False)

    def __post_init__(self):
        n = self.doc_count
        self._idf = {
            term: math.log(1.0 + (n - len(plist) + 0.5) / (len(plist) + 0.5))
            for term, plist in self.postings.items()
        }

    def idf(self, term: str) -> float:
        return self._idf.get(term, 0.0)


def build_lexical(docs: list[Document], k1: float = DEFAULT_K1,
                  b: float = DEFAULT_B) -> InvertedIndex:
    """Index the title+abstract text of ``docs``. Row order follows input order."""
    if not docs:
        raise ValueError("cannot build a lexical index over an empty collection")
    postings: dict[str, list[tuple[int, int]]] = {}
    lengths: list[int] = []
    for row, doc in enumerate(docs):
        tokens = tokenize(doc.text)
        lengths.append(len(tokens))
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((row, tf))
    return InvertedIndex(
        postings=postings,
        doc_ids=[d.id for d in docs],
        doc_lengths=lengths,
        avg_doc_length=sum(lengths) / len(lengths),
        doc_count=len(docs),
        k1=k1,
        b=b,
    )


def bm25_search(index: InvertedIndex, query_text: str, k: int) -> ScoredList:
    """Standard BM25 ranking; documents matching no query term are omitted."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    seen_terms = set()
    for term in tokenize(query_text):
        if term in seen_terms:
            # repeating a query term does not re-score it
            continue
        seen_terms.add(term)
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for row, tf in plist:
            norm = index.k1 * (1.0 - index.b
                               + index.b * index.doc_lengths[row] / index.avg_doc_length)
            scores[row] = scores.get(row, 0.0) + idf * tf * (index.k1 + 1.0) / (tf + norm)
    pairs = [(index.doc_ids[row], s) for row, s in scores.items() if s != 0.0]
    return ScoredList.ranked(pairs).top(k)


__all__ = ["tokenize", "InvertedIndex", "build_lexical", "bm25_search", "DEFAULT_K1", "DEFAULT_B"]
