"""Generators conditioned on a query and its retrieved fragments.

Two implementations share one interface (``generate(query, fragments)``):

* :class:`ToyGenerator` -- a tiny deterministic softmax decoder.  Its hidden
  state at step t is the average of (a) the mean retrieved-fragment
  embedding and (b) the mean embedding of the tokens emitted so far; the
  next-token distribution is ``softmax(W_o @ h_t + b_o)``.  Greedy decoding
  stops at the end token or at ``max_tokens``.
* :class:`ExternalGenerator` -- renders a prompt and calls a chat-completion
  endpoint through :mod:`grag.llm_client`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import BadTemplate, DimMismatch, NonFiniteInput
from .ingest import content_tokens

END_TOKEN = "</s>"

DEFAULT_TEMPLATE = (
    "Answer the question using the knowledge fragments below.\n"
    "\n"
    "Fragments:\n"
    "{fragments}\n"
    "\n"
    "Question: {query}\n"
    "Answer:"
)


def softmax(logits) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("softmax needs a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("softmax input has NaN or infinite entries")
    e = np.exp(x - x.max())
    return e / e.sum()


class ConditionFragment(NamedTuple):
    fragment_id: str
    payload: str
    embedding: np.ndarray
    score: float


@dataclass(frozen=True)
class GenerationCondition:
    query: str
    fragments: tuple = ()  # ConditionFragment, in retrieval rank order
    max_tokens: int = 16
    end_token: str = END_TOKEN

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        object.__setattr__(self, "fragments", tuple(ConditionFragment(*f) for f in self.fragments))

    @property
    def fragment_ids(self) -> list:
        return [f.fragment_id for f in self.fragments]


@dataclass(frozen=True)
class GenerationRecord:
    query: str
    fragment_ids: list
    tokens: list
    finished_by: str  # "end_token" | "max_tokens"
    scores: list = field(default_factory=list)
    raw_text: Optional[str] = None  # verbatim reply from an external model

    @property
    def text(self) -> str:
        return self.raw_text if self.raw_text is not None else " ".join(self.tokens)

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "fragment_ids": list(self.fragment_ids),
            "scores": list(self.scores),
            "tokens": list(self.tokens),
            "finished_by": self.finished_by,
            "answer": self.text,
        }


@dataclass(frozen=True)
class ToyDecoderParams:
    vocab: tuple
    token_embeddings: np.ndarray  # |vocab| x h
    W_o: np.ndarray  # |vocab| x h
    b_o: np.ndarray  # |vocab|
    end_token: str = END_TOKEN

    def __post_init__(self):
        object.__setattr__(self, "vocab", tuple(self.vocab))
        for name in ("token_embeddings", "W_o", "b_o"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        V = len(self.vocab)
        if len(set(self.vocab)) != V:
            raise ValueError("vocabulary has duplicate tokens")
        if self.vocab.count(self.end_token) != 1:
            raise ValueError(f"vocabulary must contain the end token {self.end_token!r} exactly once")
        if self.token_embeddings.ndim != 2 or self.token_embeddings.shape[0] != V:
            raise DimMismatch(f"token_embeddings shape {self.token_embeddings.shape}, vocab size {V}")
        if self.W_o.shape != self.token_embeddings.shape:
            raise DimMismatch(f"W_o shape {self.W_o.shape} != {self.token_embeddings.shape}")
        if self.b_o.shape != (V,):
            raise DimMismatch(f"b_o shape {self.b_o.shape}, vocab size {V}")
        object.__setattr__(self, "_lookup", {t: i for i, t in enumerate(self.vocab)})

    @property
    def h(self) -> int:
        return self.token_embeddings.shape[1]

    @property
    def end_index(self) -> int:
        return self._lookup[self.end_token]

    def token_index(self, token: str) -> int:
        try:
            return self._lookup[token]
        except KeyError:
            raise KeyError(f"token {token!r} not in decoder vocabulary") from None


def _fit_width(v: np.ndarray, h: int) -> np.ndarray:
    # truncate wide vectors, zero-pad narrow ones
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] >= h:
        return v[:h]
    out = np.zeros(h)
    out[: v.shape[0]] = v
    return out


def decoder_state(params: ToyDecoderParams, condition: GenerationCondition, emitted: Sequence[str]) -> np.ndarray:
    h = params.h
    if condition.fragments:
        frag = np.mean([_fit_width(f.embedding, h) for f in condition.fragments], axis=0)
    else:
        frag = np.zeros(h)
    if emitted:
        rows = [params.token_index(t) for t in emitted]
        tok = params.token_embeddings[rows].mean(axis=0)
    else:
        tok = np.zeros(h)
    return (frag + tok) / 2.0


def toy_step(params: ToyDecoderParams, condition: GenerationCondition, emitted: Sequence[str]) -> np.ndarray:
    """Next-token distribution over ``params.vocab``."""
    if len(emitted) >= condition.max_tokens:
        raise ValueError(f"{len(emitted)} tokens already emitted, max_tokens={condition.max_tokens}")
    h_t = decoder_state(params, condition, emitted)
    return softmax(params.W_o @ h_t + params.b_o)


def decode_greedy(params: ToyDecoderParams, condition: GenerationCondition) -> GenerationRecord:
    if condition.end_token != params.end_token:
        raise ValueError(f"condition end token {condition.end_token!r} != decoder's {params.end_token!r}")
    end = params.end_index
    tokens: list = []
    finished = "max_tokens"
    while len(tokens) < condition.max_tokens:
        idx = int(np.argmax(toy_step(params, condition, tokens)))  # first max wins ties
        if idx == end:
            finished = "end_token"
            break
        tokens.append(params.vocab[idx])
    return GenerationRecord(
        query=condition.query,
        fragment_ids=condition.fragment_ids,
        tokens=tokens,
        finished_by=finished,
        scores=[f.score for f in condition.fragments],
    )


def assemble_prompt(condition: GenerationCondition, template: str = DEFAULT_TEMPLATE) -> str:
    """Render ``template``, one ``[id] payload`` line per fragment in rank order."""
    for slot in ("{query}", "{fragments}"):
        if slot not in template:
            raise BadTemplate(f"template lacks the {slot} placeholder")
    block = "\n".join(f"[{f.fragment_id}] {f.payload}" for f in condition.fragments)
    # placeholders are substituted in one pass so payload text is never re-expanded
    out = []
    for i, piece in enumerate(template.split("{fragments}")):
        if i:
            out.append(block)
        out.append(piece.replace("{query}", condition.query))
    return "".join(out)


def toy_decoder_from_index(index, repetition_penalty: float = 1.0, end_bias: float = 0.0) -> ToyDecoderParams:
    """Decoder parameters whose output layer is read off an embedded corpus.

    The vocabulary is every content token (see :func:`grag.ingest.content_tokens`)
    of the indexed payloads, plus the end token at index 0.  Row ``w`` of
    ``W_o`` is the unit-normalized difference between the mean embedding of
    fragments containing ``w`` and the mean over all fragments; ``b_o``
    recenters the hidden state by that global mean, so a token's logit grows
    when the retrieved fragments look like the fragments it occurs in.

    Token input embeddings are ``-repetition_penalty * spread * W_o``, where
    ``spread`` is the mean distance of a fragment embedding from the global
    mean: emitting a token pushes the state away from it.
    """
    if len(index) == 0:
        raise ValueError("cannot derive a decoder from an empty index")
    embs = []
    occurs: dict = {}
    for entry in index.entries():
        embs.append(entry.embedding)
        for tok in content_tokens(entry.payload):
            occurs.setdefault(tok, []).append(len(embs) - 1)
    E = np.stack(embs)
    center = E.mean(axis=0)
    spread = float(np.mean(np.sqrt(((E - center) ** 2).sum(axis=1))))

    vocab = [END_TOKEN] + sorted(occurs)
    W_o = np.zeros((len(vocab), index.dim))
    for i, tok in enumerate(vocab[1:], 1):
        row = E[occurs[tok]].mean(axis=0) - center
        n = np.sqrt((row * row).sum())
        if n > 0:
            W_o[i] = row / n
    b_o = -(W_o @ center) / 2.0
    b_o[0] = end_bias
    return ToyDecoderParams(tuple(vocab), -repetition_penalty * spread * W_o, W_o, b_o)


class ToyGenerator:
    name = "toy"

    def __init__(self, params: ToyDecoderParams, max_tokens: int = 8):
        self.params = params
        self.max_tokens = max_tokens

    def generate(self, query: str, fragments: Sequence) -> GenerationRecord:
        cond = GenerationCondition(query, tuple(fragments), self.max_tokens, self.params.end_token)
        return decode_greedy(self.params, cond)


class ExternalGenerator:
    name = "external"

    def __init__(self, client_config, template: str = DEFAULT_TEMPLATE, max_tokens: int = 256, **client_kwargs):
        self.client_config = client_config
        self.template = template
        self.max_tokens = max_tokens
        self.client_kwargs = client_kwargs

    def generate(self, query: str, fragments: Sequence) -> GenerationRecord:
        from .llm_client import generate_external

        cond = GenerationCondition(query, tuple(fragments), self.max_tokens)
        text = generate_external(self.client_config, assemble_prompt(cond, self.template), **self.client_kwargs)
        return GenerationRecord(
            query=query,
            fragment_ids=cond.fragment_ids,
            tokens=text.split(),
            finished_by="end_token",
            scores=[f.score for f in cond.fragments],
            raw_text=text,
        )
