"""Document-count ablation: rerun retrieval + generation for several k."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

from .errors import GragError
from .metrics import METRICS, MetricReport, evaluate

log = logging.getLogger(__name__)

DEFAULT_K_LIST = (1, 3, 5, 10)


@dataclass(frozen=True)
class AblationRow:
    k: int
    report: MetricReport

    def to_dict(self) -> dict:
        return {"k": self.k, **self.report.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AblationRow":
        return cls(int(d["k"]), MetricReport.from_dict(d))


def _check_k_list(k_list) -> list:
    ks = [int(k) for k in k_list]
    if not ks:
        raise ValueError("k_list must be non-empty")
    if len(set(ks)) != len(ks):
        raise ValueError(f"k_list has repeated values: {ks}")
    if min(ks) < 1:
        raise ValueError(f"every k must be >= 1: {ks}")
    return sorted(ks)


def ablation_runs(corpus, pipeline, generator, k_list=DEFAULT_K_LIST, failures: Optional[list] = None) -> Iterator:
    """Yield ``(k, record, hits, generation)`` for each k (ascending) and record (file order).

    A record that raises a library error is skipped and appended to
    ``failures`` as ``(k, record_number, exception)`` when ``failures`` is a
    list; otherwise the error propagates.
    """
    records = list(corpus)
    for k in _check_k_list(k_list):
        for n, rec in enumerate(records, 1):
            try:
                hits, gen = pipeline.answer(rec.query, k, generator)
            except GragError as exc:
                if failures is None:
                    raise
                log.warning("k=%d record %d failed: %s: %s", k, n, type(exc).__name__, exc)
                failures.append((k, n, exc))
                continue
            yield k, rec, hits, gen


def run_doc_count_ablation(
    corpus: Sequence,
    pipeline,
    generator,
    k_list=DEFAULT_K_LIST,
    metrics=METRICS,
    failures: Optional[list] = None,
) -> list:
    """One :class:`AblationRow` per k, sorted by k."""
    by_k: dict = {}
    for k, rec, hits, gen in ablation_runs(corpus, pipeline, generator, k_list, failures):
        payloads = [pipeline.index.get(fid).payload for fid in hits.ids]
        by_k.setdefault(k, []).append((rec, gen.text, payloads))
    rows = []
    for k in _check_k_list(k_list):
        if k not in by_k:
            raise GragError(f"every record failed at k={k}")
        rows.append(AblationRow(k, evaluate(by_k[k], metrics)))
    return rows


def rows_to_jsonl(rows: Sequence[AblationRow]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in rows)


def rows_from_jsonl(text: str) -> list:
    return [AblationRow.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def format_table(rows: Sequence[AblationRow]) -> str:
    head = ("Number of documents", "Quality", "KC", "RC")
    body = [(str(r.k), f"{r.report.quality:.4f}", f"{r.report.kc:.4f}", f"{r.report.rc:.4f}") for r in rows]
    widths = [max(len(line[c]) for line in [head, *body]) for c in range(4)]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(line, widths)) for line in [head, *body]]
    return "\n".join(lines) + "\n"


def write_reports(rows: Sequence[AblationRow], out_dir) -> tuple:
    """Write ``ablation.jsonl`` and ``ablation.txt`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jsonl, txt = out / "ablation.jsonl", out / "ablation.txt"
    jsonl.write_text(rows_to_jsonl(rows), encoding="utf-8")
    txt.write_text(format_table(rows), encoding="utf-8")
    return jsonl, txt
