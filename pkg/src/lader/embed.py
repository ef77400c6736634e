"""Embedding storage and vector math.

Vectors are stored as 32-bit floats and accumulated in 64-bit precision, so
scores are reproducible across platforms. Embeddings are never re-normalized
on load: scoring uses raw inner products.

Binary embedding format (little-endian):

    magic b"LDER" | version u32 | dim u32 | count u64
    count null-terminated UTF-8 ids
    count * dim float32 values, row-major
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"LDER"
VERSION = 1
DEFAULT_DIM = 768

_HEADER = struct.Struct("<4sIIQ")


@dataclass
class EmbeddingMatrix:
    """Row-major float32 matrix with a stable row -> id mapping."""

    ids: list[str]
    data: np.ndarray
    dim: int = DEFAULT_DIM
    row_of: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.size == 0:
            data = data.reshape(0, self.dim)
        if data.shape != (len(self.ids), self.dim):
            raise ValidationError(
                f"embedding data shape {data.shape} does not match "
                f"({len(self.ids)}, {self.dim})"
            )
        self.data = data
        if not np.isfinite(self.data).all():
            bad = int(np.argwhere(~np.isfinite(self.data).all(axis=1))[0][0])
            raise ValidationError(f"non-finite embedding in row {bad} ({self.ids[bad]!r})")
        self.row_of = {}
        for i, eid in enumerate(self.ids):
            if eid in self.row_of:
                raise ValidationError(f"duplicate embedding id {eid!r}")
            self.row_of[eid] = i

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, eid: str) -> bool:
        return eid in self.row_of

    def row(self, eid: str) -> np.ndarray:
        return self.data[self.row_of[eid]]

    def select(self, keep) -> "EmbeddingMatrix":
        """New matrix restricted to ids in ``keep``, preserving row order."""
        keep = set(keep)
        rows = [i for i, eid in enumerate(self.ids) if eid in keep]
        return EmbeddingMatrix(ids=[self.ids[i] for i in rows],
                               data=self.data[rows] if rows else np.empty((0, self.dim), np.float32),
                               dim=self.dim)


class EmbeddingProvider(Protocol):
    """Deterministic text/id -> vector mapping."""

    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Feature-hashing embedder, the test-time stand-in for a trained encoder."""

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def embed(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim, self.seed)


class LookupEmbedder:
    """Provider that resolves ids against a precomputed matrix."""

    def __init__(self, matrix: EmbeddingMatrix):
        self.matrix = matrix
        self.dim = matrix.dim

    def embed(self, eid: str) -> np.ndarray:
        if eid not in self.matrix:
            raise KeyError(f"no embedding stored for {eid!r}")
        return self.matrix.row(eid)


def dot(a, b) -> float:
    """Inner product accumulated in float64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vector length mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def _bucket(seed: int, gram: str) -> tuple[int, int]:
    digest = hashlib.blake2b(f"{seed}\x1f{gram}".encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    sign = 1 if value & (1 << 63) else -1
    return value & ((1 << 63) - 1), sign


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Hash word unigrams and bigrams of ``text`` into ``dim`` signed buckets.

    The result is L2-normalized; identical text and seed always map to the
    same vector.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    tokens = text.lower().split()
    if not tokens:
        raise ValueError("text has no tokens to embed")
    grams = list(tokens)
    grams.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    vec = np.zeros(dim, dtype=np.float64)
    for gram in grams:
        value, sign = _bucket(seed, gram)
        vec[value % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("all hashed features cancelled; text carries no signal")
    return (vec / norm).astype(np.float32)


def pack_embeddings(matrix: EmbeddingMatrix) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, matrix.dim, len(matrix.ids))]
    for eid in matrix.ids:
        raw = eid.encode("utf-8")
        if b"\x00" in raw:
            raise ValidationError(f"embedding id {eid!r} contains a null byte")
        parts.append(raw + b"\x00")
    parts.append(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())
    return b"".join(parts)


def unpack_embeddings(buf: bytes) -> EmbeddingMatrix:
    if len(buf) < _HEADER.size:
        raise FormatError("embedding payload shorter than header")
    magic, version, dim, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported embedding format version {version}")
    if dim < 1:
        raise FormatError(f"invalid dimension {dim}")
    if count * (1 + dim * 4) > len(buf) - _HEADER.size:
        raise FormatError(f"truncated payload: header declares {count} rows of dim {dim}")
    pos = _HEADER.size
    ids: list[str] = []
    for _ in range(count):
        end = buf.find(b"\x00", pos)
        if end < 0:
            raise FormatError("truncated id table")
        ids.append(buf[pos:end].decode("utf-8"))
        pos = end + 1
    expected = count * dim * 4
    payload = buf[pos:]
    if len(payload) != expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes of vector data, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    finite = np.isfinite(data).all(axis=1) if count else np.ones(0, bool)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise FormatError(f"non-finite values in row {bad} ({ids[bad]!r})")
    return EmbeddingMatrix(ids=ids, data=data.copy(), dim=dim)


def save_embeddings(matrix: EmbeddingMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_embeddings(matrix))


def load_embeddings(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        return unpack_embeddings(buf)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


__all__ = [
    "DEFAULT_DIM", "EmbeddingMatrix", "EmbeddingProvider",
    "HashingEmbedder", "LookupEmbedder",
    "dot", "hash_embed",
    "pack_embeddings", "unpack_embeddings", "save_embeddings", "load_embeddings",
]
