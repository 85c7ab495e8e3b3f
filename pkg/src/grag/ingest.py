"""Corpus loading and text-to-graph conversion.

Corpus files are UTF-8 JSON lines, one record per line::

    {"query": "...", "fragments": [{"id": "f1", "text": "..."}], "answer": "..."}

Text becomes a graph by co-occurrence: one node per distinct normalized
token, an undirected edge between two distinct tokens that appear within
``window`` positions of each other.  Node features come from a keyed hash
of the token, so no vocabulary or training is needed.
"""
from __future__ import annotations

import hashlib
import io
import json
import unicodedata
from importlib import resources
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import EmptyText, ParseError
from .graph import Edge, KnowledgeGraph, build_graph

_HASH_KEY = b"grag-feature-hash-v1"

STOPWORDS_VERSION = 1
STOPWORDS = frozenset(
    line.strip()
    for line in resources.files("grag").joinpath("data/stopwords.txt").read_text("utf-8").splitlines()
    if line.strip() and not line.startswith("#")
)
MIN_CONTENT_LEN = 3


@dataclass(frozen=True)
class GraphBuilderConfig:
    window: int = 2
    feature_dim: int = 64
    lowercase: bool = True
    min_token_len: int = 1

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.min_token_len < 0:
            raise ValueError("min_token_len must be >= 0")


@dataclass(frozen=True)
class CorpusRecord:
    query: str
    fragments: tuple  # of (fragment_id, text)
    reference_answer: str

    @property
    def fragment_ids(self) -> list:
        return [fid for fid, _ in self.fragments]


def _strip_punct(token: str) -> str:
    return "".join(ch for ch in token if not unicodedata.category(ch).startswith("P"))


def tokenize(text: str, lowercase: bool = True, min_token_len: int = 1) -> list:
    """Whitespace split, punctuation removed, optionally lowercased."""
    if lowercase:
        text = text.lower()
    out = []
    for raw in text.split():
        tok = _strip_punct(raw)
        if tok and len(tok) >= min_token_len:
            out.append(tok)
    return out


def content_tokens(text: str) -> set:
    """Distinct tokens of length >= 3 that are not stopwords."""
    return {t for t in tokenize(text) if len(t) >= MIN_CONTENT_LEN and t not in STOPWORDS}


def hash_features(token: str, dim: int) -> np.ndarray:
    """Unit-norm feature vector for ``token``, stable across runs and platforms.

    Coordinates are uniform in [-1, 1), drawn from keyed BLAKE2b digests of
    the token (one 64-byte digest per 8 coordinates), then L2-normalized.
    """
    if not token:
        raise ValueError("cannot hash an empty token")
    raw = token.encode("utf-8")
    words = []
    block = 0
    while len(words) < dim:
        h = hashlib.blake2b(raw, digest_size=64, key=_HASH_KEY, person=block.to_bytes(16, "little"))
        words.extend(np.frombuffer(h.digest(), dtype="<u8").tolist())
        block += 1
    u = np.array(words[:dim], dtype=np.float64) / 2.0**64
    vec = 2.0 * u - 1.0
    norm = np.sqrt((vec * vec).sum())
    if norm == 0.0:  # pragma: no cover - needs an all-0x80.. digest
        vec = np.ones(dim)
        norm = np.sqrt(dim)
    return vec / norm


def text_to_graph(text: str, config: GraphBuilderConfig = GraphBuilderConfig()) -> KnowledgeGraph:
    """Co-occurrence graph of ``text``; node ids follow first-occurrence order."""
    tokens = tokenize(text, config.lowercase, config.min_token_len)
    if not tokens:
        raise EmptyText(f"no tokens in text {text[:40]!r}")
    ids: dict = {}
    for tok in tokens:
        ids.setdefault(tok, len(ids))
    edges = []
    seen = set()
    for p, tok in enumerate(tokens):
        a = ids[tok]
        for other in tokens[p + 1:p + 1 + config.window]:
            b = ids[other]
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            if key not in seen:
                seen.add(key)
                edges.append(Edge(*key))
    nodes = [(i, hash_features(tok, config.feature_dim)) for tok, i in ids.items()]
    return build_graph(nodes, edges, directed=False)


# -- corpus files -------------------------------------------------------

def _lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    elif isinstance(source, (bytes, bytearray)):
        yield from io.StringIO(source.decode("utf-8"))
    else:
        for line in source:
            yield line.decode("utf-8") if isinstance(line, bytes) else line


def record_from_obj(obj, lineno=None) -> CorpusRecord:
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", lineno)
    for key in ("query", "fragments", "answer"):
        if key not in obj:
            raise ParseError(f"missing field {key!r}", lineno)
    query, frags, answer = obj["query"], obj["fragments"], obj["answer"]
    if not isinstance(query, str) or not query.strip():
        raise ParseError("'query' must be a non-empty string", lineno)
    if not isinstance(answer, str):
        raise ParseError("'answer' must be a string", lineno)
    if not isinstance(frags, list):
        raise ParseError("'fragments' must be a list", lineno)
    fragments = []
    seen = set()
    for f in frags:
        if not isinstance(f, dict) or not isinstance(f.get("id"), str) or not isinstance(f.get("text"), str):
            raise ParseError("each fragment needs string 'id' and 'text'", lineno)
        if not f["id"]:
            raise ParseError("fragment id must be non-empty", lineno)
        if f["id"] in seen:
            raise ParseError(f"duplicate fragment id {f['id']!r}", lineno)
        seen.add(f["id"])
        fragments.append((f["id"], f["text"]))
    return CorpusRecord(query, tuple(fragments), answer)


def parse_corpus(source) -> Iterator[CorpusRecord]:
    """Yield records from a path, text stream, or iterable of lines, in order.

    Blank lines are skipped.  Raises :class:`ParseError` carrying the 1-based
    line number of the first bad line.
    """
    for lineno, line in enumerate(_lines(source), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
        yield record_from_obj(obj, lineno)


def record_to_line(record: CorpusRecord) -> str:
    return json.dumps(
        {
            "query": record.query,
            "fragments": [{"id": fid, "text": text} for fid, text in record.fragments],
            "answer": record.reference_answer,
        },
        ensure_ascii=False,
    )
