"""Proxy metrics for generated answers.

The three scores are stand-ins, not reproductions of any published metric:

quality
    Unigram token F1 between the generated text and the reference answer.
kc (knowledge consistency)
    Share of the generated text's distinct content tokens (non-stopword,
    length >= 3) that occur in the fragments the generator was given.
rc (reasoning capability)
    Harmonic mean of ``quality`` and multi-fragment grounding: the share of
    the record's fragments whose content tokens overlap the generated text.

All scores lie in [0, 1].  Alternative definitions can be swapped in through
the ``metrics`` argument of :func:`evaluate`.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Callable, Mapping, Sequence

from .errors import EmptyInput
from .ingest import CorpusRecord, content_tokens, tokenize

def quality_f1(generated: str, reference: str) -> float:
    gen, ref = tokenize(generated), tokenize(reference)
    if not gen or not ref:
        return 0.0
    overlap = sum((Counter(gen) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    p = overlap / len(gen)
    r = overlap / len(ref)
    return 2 * p * r / (p + r)


def kc_support(generated: str, fragments: Sequence[str]) -> float:
    claims = content_tokens(generated)
    if not claims:
        return 1.0
    known = set()
    for text in fragments:
        known.update(tokenize(text))
    return len(claims & known) / len(claims)


def _harmonic(a: float, b: float) -> float:
    if a <= 0.0 or b <= 0.0:
        return 0.0
    return 2 * a * b / (a + b)


def grounding(generated: str, fragments: Sequence[str]) -> float:
    if not fragments:
        return 0.0
    gen = set(tokenize(generated))
    touched = sum(1 for text in fragments if content_tokens(text) & gen)
    return touched / len(fragments)


def rc_chain(generated: str, record: CorpusRecord) -> float:
    # distinct fragments by id
    texts = list(dict(record.fragments).values())
    return _harmonic(quality_f1(generated, record.reference_answer), grounding(generated, texts))


Metric = Callable[[CorpusRecord, str, Sequence[str]], float]

METRICS: Mapping[str, Metric] = {
    "quality": lambda rec, gen, frags: quality_f1(gen, rec.reference_answer),
    "kc": lambda rec, gen, frags: kc_support(gen, frags),
    "rc": lambda rec, gen, frags: rc_chain(gen, rec),
}


@dataclass(frozen=True)
class MetricReport:
    quality: float
    kc: float
    rc: float
    n_records: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricReport":
        return cls(float(d["quality"]), float(d["kc"]), float(d["rc"]), int(d["n_records"]))


def score_record(record: CorpusRecord, generated: str, fragments: Sequence[str], metrics=METRICS) -> dict:
    return {name: float(fn(record, generated, fragments)) for name, fn in metrics.items()}


def evaluate(items: Sequence, metrics: Mapping[str, Metric] = METRICS) -> MetricReport:
    """Mean of each metric over ``(record, generated_text, fragment_texts)`` triples.

    Sums are exactly rounded (``math.fsum``), so the report does not depend
    on record order.
    """
    items = list(items)
    if not items:
        raise EmptyInput("evaluate needs at least one record")
    per = [score_record(rec, gen, frags, metrics) for rec, gen, frags in items]
    n = len(per)
    mean = {name: math.fsum(p[name] for p in per) / n for name in metrics}
    return MetricReport(mean["quality"], mean["kc"], mean["rc"], n)
