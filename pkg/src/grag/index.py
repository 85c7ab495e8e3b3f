"""Exact cosine top-k index over fragment embeddings.

Queries are a full scan; ties in score are broken by fragment id ascending,
so results are fully deterministic.

On-disk layout (all integers little-endian)::

    offset  size  field
    0       8     magic  b"GRAGIDX\\x00"
    8       2     format_version (u16, currently 1)
    10      4     embedding_dim (u32)
    14      8     entry_count (u64)
    22      4     meta_len (u32)
    26      32    sha256 of everything after the header
    58      ...   meta: UTF-8 JSON object, meta_len bytes
            ...   entry_count entries, each:
                    u32 id_len, id (UTF-8)
                    u32 payload_len, payload (UTF-8)
                    embedding_dim x float64
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import struct
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CorruptIndex, DimMismatch, DuplicateFragment, EmptyIndex

MAGIC = b"GRAGIDX\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHIQI32s")
_U32 = struct.Struct("<I")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between ``a`` and ``b``; 0.0 if either is the zero vector."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimMismatch(f"cosine_similarity of shapes {a.shape} and {b.shape}")
    na = math.sqrt((a * a).sum())
    nb = math.sqrt((b * b).sum())
    if na == 0.0 or nb == 0.0:
        return 0.0
    # product of the norms first, so swapping a and b gives the same float
    return min(1.0, max(-1.0, float((a * b).sum()) / (na * nb)))


@dataclass(frozen=True)
class IndexEntry:
    fragment_id: str
    embedding: np.ndarray
    payload: str


@dataclass(frozen=True)
class RankedHits:
    hits: list
    query_dim: int

    @property
    def ids(self) -> list:
        return [fid for fid, _ in self.hits]

    @property
    def scores(self) -> list:
        return [s for _, s in self.hits]

    def __len__(self):
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    def to_dict(self) -> dict:
        return {
            "query_dim": self.query_dim,
            "hits": [{"rank": r, "fragment_id": fid, "score": s} for r, (fid, s) in enumerate(self.hits, 1)],
        }


class _RWLock:
    """Many readers or one writer; writers are not starved by a stream of readers."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._waiting_writers = 0

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer or self._waiting_writers:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            self._waiting_writers += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._waiting_writers -= 1
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


class RetrievalIndex:
    """Fragment store with exact cosine top-k search.

    Parameters
    ----------
    dim : int
        Embedding width every entry must have.
    encoder : callable, optional
        Maps a :class:`~grag.graph.KnowledgeGraph` to its embedding; needed
        only by :meth:`add_fragment`.
    meta : dict, optional
        Free-form JSON metadata persisted with the index (e.g. the encoder
        config used to build it).
    """

    def __init__(self, dim: int, encoder: Optional[Callable] = None, meta: Optional[dict] = None):
        if dim < 1:
            raise ValueError(f"embedding dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self.encoder = encoder
        self.meta = dict(meta or {})
        self._ids: list = []
        self._payloads: list = []
        self._pos: dict = {}
        self._emb = np.zeros((0, self.dim))
        self._norms = np.zeros(0)
        self._size = 0
        self._lock = _RWLock()

    def __len__(self):
        return self._size

    @property
    def fragment_ids(self) -> list:
        return list(self._ids[: self._size])

    def get(self, fragment_id: str) -> IndexEntry:
        with self._lock.read():
            p = self._pos[fragment_id]
            emb = self._emb[p].copy()
            emb.setflags(write=False)
            return IndexEntry(fragment_id, emb, self._payloads[p])

    def entries(self):
        for fid in self.fragment_ids:
            yield self.get(fid)

    def add_fragment(self, fragment_id: str, graph, payload: str = "") -> None:
        if self.encoder is None:
            raise TypeError("add_fragment needs an index constructed with an encoder")
        with self._lock.read():
            if fragment_id in self._pos:
                raise DuplicateFragment(f"fragment {fragment_id!r} already indexed")
        self.add_embedding(fragment_id, self.encoder(graph), payload)

    def add_embedding(self, fragment_id: str, embedding, payload: str = "") -> None:
        if not isinstance(fragment_id, str) or not fragment_id:
            raise ValueError("fragment id must be a non-empty string")
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimMismatch(f"embedding shape {vec.shape}, index dim is {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"embedding for {fragment_id!r} has non-finite entries")
        with self._lock.write():
            if fragment_id in self._pos:
                raise DuplicateFragment(f"fragment {fragment_id!r} already indexed")
            n = self._size
            if n == self._emb.shape[0]:
                cap = max(16, 2 * n)
                grown = np.zeros((cap, self.dim))
                grown[:n] = self._emb[:n]
                norms = np.zeros(cap)
                norms[:n] = self._norms[:n]
                self._emb, self._norms = grown, norms
            self._emb[n] = vec
            self._norms[n] = math.sqrt((vec * vec).sum())
            self._ids.append(fragment_id)
            self._payloads.append(payload)
            self._pos[fragment_id] = n
            # publish last: readers only look at rows < _size
            self._size = n + 1

    def scores(self, z_q) -> np.ndarray:
        """Cosine similarity of ``z_q`` against every entry, in insertion order."""
        q = np.asarray(z_q, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimMismatch(f"query shape {q.shape}, index dim is {self.dim}")
        with self._lock.read():
            n = self._size
            emb, norms = self._emb[:n], self._norms[:n]
            qn = math.sqrt((q * q).sum())
            dots = (emb * q).sum(axis=1)
        denom = qn * norms
        out = np.zeros(n)
        ok = denom != 0.0
        out[ok] = dots[ok] / denom[ok]
        return np.clip(out, -1.0, 1.0)

    def query_top_k(self, z_q, k: int) -> RankedHits:
        """The ``k`` entries most similar to ``z_q`` (all of them if ``k`` exceeds the size)."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores = self.scores(z_q)
        n = scores.shape[0]
        if n == 0:
            raise EmptyIndex("query against an empty index")
        ids = self._ids[:n]
        if k < n:
            cutoff = np.partition(scores, n - k)[n - k]
            cand = np.flatnonzero(scores >= cutoff)
        else:
            cand = np.arange(n)
        order = sorted(cand.tolist(), key=lambda p: (-scores[p], ids[p]))[:k]
        return RankedHits([(ids[p], float(scores[p])) for p in order], self.dim)

    # -- persistence --------------------------------------------------

    def to_bytes(self) -> bytes:
        with self._lock.read():
            n = self._size
            body = io.BytesIO()
            meta = json.dumps(self.meta, sort_keys=True).encode("utf-8")
            body.write(meta)
            for p in range(n):
                for text in (self._ids[p], self._payloads[p]):
                    raw = text.encode("utf-8")
                    body.write(_U32.pack(len(raw)))
                    body.write(raw)
                body.write(self._emb[p].astype("<f8").tobytes())
        body = body.getvalue()
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, self.dim, n, len(meta), hashlib.sha256(body).digest())
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes, encoder: Optional[Callable] = None) -> "RetrievalIndex":
        if len(data) < _HEADER.size:
            raise CorruptIndex("file shorter than the index header")
        magic, version, dim, count, meta_len, digest = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CorruptIndex("bad magic; not an index file")
        if version != FORMAT_VERSION:
            raise CorruptIndex(f"unsupported format version {version}")
        body = memoryview(data)[_HEADER.size:]
        if hashlib.sha256(body).digest() != digest:
            raise CorruptIndex("checksum mismatch (truncated or modified file)")
        try:
            meta = json.loads(bytes(body[:meta_len]).decode("utf-8"))
            index = cls(dim, encoder=encoder, meta=meta)
            off = meta_len
            for _ in range(count):
                texts = []
                for _field in range(2):
                    (ln,) = _U32.unpack_from(body, off)
                    off += 4
                    texts.append(bytes(body[off:off + ln]).decode("utf-8"))
                    off += ln
                vec = np.frombuffer(body, dtype="<f8", count=dim, offset=off).astype(np.float64)
                off += 8 * dim
                index.add_embedding(texts[0], vec, texts[1])
        except (struct.error, ValueError, UnicodeDecodeError) as exc:
            raise CorruptIndex(f"malformed entry data: {exc}") from None
        if off != len(body):
            raise CorruptIndex("trailing bytes after last entry")
        return index


def save_index(index: RetrievalIndex, sink) -> None:
    """Write ``index`` to a path or binary file object."""
    data = index.to_bytes()
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as fh:
            fh.write(data)


def load_index(source, encoder: Optional[Callable] = None) -> RetrievalIndex:
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    return RetrievalIndex.from_bytes(data, encoder=encoder)
