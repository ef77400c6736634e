"""Exact maximum-inner-product search over an embedding matrix.

The index is a flat scan: scores are computed against every stored vector in
float64 and the top k are selected exactly, with ties broken by ascending id
so repeated runs are reproducible. No approximation is involved.

Index file format: magic b"LIDX" | version u32 (little-endian), followed by
the embedding binary payload.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .embed import EmbeddingMatrix, pack_embeddings, unpack_embeddings
from .errors import FormatError

INDEX_MAGIC = b"LIDX"
INDEX_VERSION = 1

_INDEX_HEADER = struct.Struct("<4sI")


@dataclass(frozen=True)
class ScoredList:
    """Ranked (id, score) pairs: scores non-increasing, ties by ascending id."""

    entries: tuple[tuple[str, float], ...]

    @classmethod
    def ranked(cls, pairs) -> "ScoredList":
        """Build from arbitrary (id, score) pairs, sorting into rank order."""
        ordered = sorted(pairs, key=lambda p: (-p[1], p[0]))
        return cls(entries=tuple((i, float(s)) for i, s in ordered))

    def ids(self) -> list[str]:
        return [i for i, _ in self.entries]

    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.entries], dtype=np.float64)

    def top(self, k: int) -> "ScoredList":
        return ScoredList(entries=self.entries[:k])

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)


@dataclass
class FlatIndex:
    """Immutable flat MIPS index; safe for concurrent searches."""

    matrix: EmbeddingMatrix
    _data64: np.ndarray = field(init=False, repr=False)
    _id_array: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # float64 working copy keeps the scan's accumulation at full precision
        self._data64 = self.matrix.data.astype(np.float64)
        self._id_array = np.array(self.matrix.ids, dtype=object)

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def __len__(self) -> int:
        return len(self.matrix)

    def id_of_row(self, row: int) -> str:
        return self.matrix.ids[row]


def search(index: FlatIndex, query_vec, k: int) -> ScoredList:
    """Exact top-k by inner product; k larger than the index returns all rows."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query_vec, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.dim:
        raise ValueError(f"query dim {q.shape[0]} does not match index dim {index.dim}")
    n = len(index)
    if n == 0:
        return ScoredList(entries=())
    scores = index._data64 @ q
    k_eff = min(k, n)
    if k_eff < n:
        # Exact selection: keep everything scoring at or above the k-th value,
        # then order the (small) candidate set by (-score, id).
        part = np.argpartition(-scores, k_eff - 1)
        threshold = scores[part[k_eff - 1]]
        cand = np.flatnonzero(scores >= threshold)
    else:
        cand = np.arange(n)
    pairs = sorted(((index._id_array[i], scores[i]) for i in cand),
                   key=lambda p: (-p[1], p[0]))
    return ScoredList(entries=tuple((i, float(s)) for i, s in pairs[:k_eff]))


def batch_search(index: FlatIndex, queries: EmbeddingMatrix, k: int,
                 threads: int = 1) -> list[ScoredList]:
    """Per-row search over ``queries``; output order matches input order."""
    if queries.dim != index.dim:
        raise ValueError(f"query dim {queries.dim} does not match index dim {index.dim}")
    rows = [queries.data[i] for i in range(len(queries))]
    if threads > 1 and len(rows) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda r: search(index, r, k), rows))
    return [search(index, r, k) for r in rows]


def save_index(index: FlatIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_INDEX_HEADER.pack(INDEX_MAGIC, INDEX_VERSION))
        fh.write(pack_embeddings(index.matrix))


def load_index(path) -> FlatIndex:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _INDEX_HEADER.size:
        raise FormatError(f"{path}: file shorter than index header")
    magic, version = _INDEX_HEADER.unpack_from(buf, 0)
    if magic != INDEX_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {INDEX_MAGIC!r}")
    if version != INDEX_VERSION:
        raise FormatError(f"{path}: unsupported index version {version}")
    try:
        matrix = unpack_embeddings(buf[_INDEX_HEADER.size:])
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return FlatIndex(matrix=matrix)


def build_index(matrix: EmbeddingMatrix) -> FlatIndex:
    return FlatIndex(matrix=matrix)


__all__ = [
    "ScoredList", "FlatIndex",
    "search", "batch_search", "build_index", "save_index", "load_index",
]
