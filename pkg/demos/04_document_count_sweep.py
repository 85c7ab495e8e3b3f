"""
Sweeping the number of retrieved documents
==========================================

Re-run retrieval and generation with k = 1, 3, 5 and 10 fragments and
report the three proxy scores (token F1 against the reference answer,
support of generated content words by the fragments, and F1 combined with
multi-fragment grounding).
"""

import tempfile

from grag.bench import format_table, run_doc_count_ablation, write_reports
from grag.cli import bundled_corpus
from grag.generation import ToyGenerator, toy_decoder_from_index
from grag.ingest import parse_corpus
from grag.pipeline import Pipeline

records = list(parse_corpus(bundled_corpus()))
pipe = Pipeline.seeded(seed=0)
pipe.ingest(records)
generator = ToyGenerator(toy_decoder_from_index(pipe.index))

rows = run_doc_count_ablation(records, pipe, generator, [1, 3, 5, 10])
print(format_table(rows))

with tempfile.TemporaryDirectory() as out:
    jsonl, _ = write_reports(rows, out)
    print(jsonl.read_text())
