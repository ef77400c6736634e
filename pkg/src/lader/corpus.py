"""Corpus ingestion: documents, queries, click logs, and training triples.

File formats (all UTF-8, LF line endings):

* documents: JSON lines with fields ``id``, ``title``, ``abstract``
* queries:   TSV ``query_id<TAB>text[<TAB>frequency]``
* click log: TSV ``query_id<TAB>doc_id<TAB>clicks<TAB>impressions``
* triples:   TSV ``query_id<TAB>pos_doc_id<TAB>neg_doc_id``

Loaders are single-threaded; the resulting objects are treated as immutable
and are safe to share across threads.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

HEAD = "HEAD"
TORSO = "TORSO"
TAIL = "TAIL"
GROUPS = (HEAD, TORSO, TAIL)


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    abstract: str = ""

    def __post_init__(self):
        if not self.id or any(c.isspace() for c in self.id):
            raise ValidationError(f"document id must be non-empty without whitespace: {self.id!r}")

    @property
    def text(self) -> str:
        """Title and abstract joined by a single space, the retrievable text."""
        return f"{self.title} {self.abstract}".strip()


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    frequency: int = 0

    def __post_init__(self):
        if not self.id or any(c.isspace() for c in self.id):
            raise ValidationError(f"query id must be non-empty without whitespace: {self.id!r}")
        if not self.text:
            raise ValidationError(f"query {self.id!r} has empty text")
        if self.frequency < 0:
            raise ValidationError(f"query {self.id!r} has negative frequency")


@dataclass(frozen=True)
class ClickRecord:
    query_id: str
    doc_id: str
    clicks: int
    impressions: int

    def __post_init__(self):
        if self.clicks < 0:
            raise ValidationError(f"({self.query_id}, {self.doc_id}): negative clicks")
        if self.impressions < 1:
            raise ValidationError(f"({self.query_id}, {self.doc_id}): impressions must be >= 1")
        if self.clicks > self.impressions:
            raise ValidationError(
                f"({self.query_id}, {self.doc_id}): clicks {self.clicks} exceed "
                f"impressions {self.impressions}"
            )


@dataclass
class ClickLog:
    """Aggregated click records plus the derived query -> clicked-docs mapping.

    Records are stored in canonical ``(query_id, doc_id)`` order so that logs
    built from permuted inputs compare equal.
    """

    records: tuple[ClickRecord, ...]
    rel: dict[str, frozenset[str]] = field(init=False)

    def __post_init__(self):
        self.records = tuple(sorted(self.records, key=lambda r: (r.query_id, r.doc_id)))
        seen = set()
        for r in self.records:
            key = (r.query_id, r.doc_id)
            if key in seen:
                raise ValidationError(f"duplicate click record for {key} after aggregation")
            seen.add(key)
        rel: dict[str, set[str]] = {}
        for r in self.records:
            if r.clicks >= 1:
                rel.setdefault(r.query_id, set()).add(r.doc_id)
        self.rel = {q: frozenset(d) for q, d in rel.items()}

    def query_ids(self) -> list[str]:
        """Distinct query ids in canonical order."""
        out, last = [], None
        for r in self.records:
            if r.query_id != last:
                out.append(r.query_id)
                last = r.query_id
        return out

    def frequencies(self) -> dict[str, int]:
        """Per-query count of distinct click records, the fallback frequency."""
        freq: dict[str, int] = {}
        for r in self.records:
            freq[r.query_id] = freq.get(r.query_id, 0) + 1
        return freq

    def __eq__(self, other):
        return isinstance(other, ClickLog) and self.records == other.records


@dataclass(frozen=True)
class Triple:
    query_id: str
    pos_doc_id: str
    neg_doc_id: str

    def __post_init__(self):
        if self.pos_doc_id == self.neg_doc_id:
            raise ValidationError(
                f"triple for {self.query_id!r}: positive and negative doc are both "
                f"{self.pos_doc_id!r}"
            )


def load_documents(path) -> list[Document]:
    """Read a JSON-lines document file, rejecting duplicate ids."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                doc = Document(id=obj["id"], title=obj.get("title", ""),
                               abstract=obj.get("abstract", ""))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad document record: {exc}", path, lineno) from exc
            if doc.id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def load_queries(path, log: ClickLog | None = None) -> list[Query]:
    """Read a query TSV.

    The frequency column is optional; when absent, the count of distinct click
    records in ``log`` is used, defaulting to 0 for unlogged queries.
    """
    fallback = log.frequencies() if log is not None else {}
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 2 or 3 tab-separated fields, got {len(parts)}",
                                 path, lineno)
            qid, text = parts[0], parts[1]
            if len(parts) == 3 and parts[2] != "":
                try:
                    freq = int(parts[2])
                except ValueError as exc:
                    raise ParseError(f"non-integer frequency {parts[2]!r}", path, lineno) from exc
            else:
                freq = fallback.get(qid, 0)
            if qid in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate query id {qid!r}")
            seen.add(qid)
            try:
                queries.append(Query(id=qid, text=text, frequency=freq))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return queries


def load_click_log(path) -> ClickLog:
    """Read a click-log TSV, summing duplicate (query, doc) rows."""
    counts: dict[tuple[str, str], list[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}",
                                 path, lineno)
            qid, did, raw_clicks, raw_impr = parts
            try:
                clicks, impressions = int(raw_clicks), int(raw_impr)
            except ValueError as exc:
                raise ParseError(f"non-integer counts {raw_clicks!r}/{raw_impr!r}",
                                 path, lineno) from exc
            cell = counts.setdefault((qid, did), [0, 0])
            cell[0] += clicks
            cell[1] += impressions
    records = [ClickRecord(q, d, c, i) for (q, d), (c, i) in counts.items()]
    return ClickLog(records=tuple(records))


def load_triples(path) -> list[Triple]:
    """Read a training-triple TSV."""
    triples: list[Triple] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}",
                                 path, lineno)
            try:
                triples.append(Triple(*parts))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return triples


def group_of(frequency: int) -> str:
    """Map a query frequency to its HEAD (>44) / TORSO (6-44) / TAIL (<6) group."""
    if frequency < 0:
        raise ValueError(f"frequency must be non-negative, got {frequency}")
    if frequency > 44:
        return HEAD
    if frequency >= 6:
        return TORSO
    return TAIL


def subsample_queries(log: ClickLog, proportion: float, seed: int) -> ClickLog:
    """Keep a seeded uniform sample of ``floor(proportion * n)`` query ids.

    Sampling takes a prefix of a seeded shuffle, so for a fixed seed the kept
    sets are nested as the proportion grows.
    """
    if not 0.0 <= proportion <= 1.0:
        raise ValueError(f"proportion must be in [0, 1], got {proportion}")
    qids = sorted(set(r.query_id for r in log.records))
    k = int(proportion * len(qids))
    rng = random.Random(seed)
    rng.shuffle(qids)
    keep = set(qids[:k])
    return ClickLog(records=tuple(r for r in log.records if r.query_id in keep))


def write_documents(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "title": d.title, "abstract": d.abstract},
                                sort_keys=True) + "\n")


def write_queries(queries: list[Query], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            fh.write(f"{q.id}\t{q.text}\t{q.frequency}\n")


def write_click_log(log: ClickLog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in log.records:
            fh.write(f"{r.query_id}\t{r.doc_id}\t{r.clicks}\t{r.impressions}\n")


def write_triples(triples: list[Triple], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            fh.write(f"{t.query_id}\t{t.pos_doc_id}\t{t.neg_doc_id}\n")


__all__ = [
    "HEAD", "TORSO", "TAIL", "GROUPS",
    "Document", "Query", "ClickRecord", "ClickLog", "Triple",
    "load_documents", "load_queries", "load_click_log", "load_triples",
    "group_of", "subsample_queries",
    "write_documents", "write_queries", "write_click_log", "write_triples",
]
