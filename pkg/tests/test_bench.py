import json

import pytest

from grag.bench import (
    DEFAULT_K_LIST,
    AblationRow,
    ablation_runs,
    format_table,
    rows_from_jsonl,
    rows_to_jsonl,
    run_doc_count_ablation,
    write_reports,
)
from grag.cli import bundled_corpus
from grag.encoder import GnnConfig
from grag.errors import EmptyText
from grag.generation import ToyGenerator, toy_decoder_from_index
from grag.ingest import CorpusRecord, parse_corpus
from grag.metrics import MetricReport
from grag.pipeline import Pipeline


@pytest.fixture(scope="module")
def setup():
    records = list(parse_corpus(bundled_corpus()))
    pipe = Pipeline.seeded(GnnConfig(), seed=0)
    pipe.ingest(records)
    return records, pipe, ToyGenerator(toy_decoder_from_index(pipe.index))


def test_default_k_list():
    assert DEFAULT_K_LIST == (1, 3, 5, 10)


def test_rows_shape_and_order(setup):
    records, pipe, gen = setup
    rows = run_doc_count_ablation(records, pipe, gen, [10, 1, 5, 3])
    assert [r.k for r in rows] == [1, 3, 5, 10]
    for r in rows:
        assert r.report.n_records == 20
        for v in (r.report.quality, r.report.kc, r.report.rc):
            assert 0.0 <= v <= 1.0


def test_deterministic(setup):
    records, pipe, gen = setup
    a = rows_to_jsonl(run_doc_count_ablation(records, pipe, gen))
    b = rows_to_jsonl(run_doc_count_ablation(records, pipe, gen))
    assert a == b


def test_retrieval_sets_nest_across_k(setup):
    records, pipe, gen = setup
    used = {}
    for k, rec, hits, _ in ablation_runs(records, pipe, gen):
        used.setdefault(rec.query, {})[k] = hits.ids
    for by_k in used.values():
        for small, big in [(1, 3), (3, 5), (5, 10)]:
            assert by_k[big][:small] == by_k[small]


def test_single_fragment_corpus():
    records = [CorpusRecord("where is paris", (("only", "Paris is in France."),), "france")]
    pipe = Pipeline.seeded(GnnConfig(), seed=1)
    pipe.ingest(records)
    gen = ToyGenerator(toy_decoder_from_index(pipe.index))
    runs = list(ablation_runs(records, pipe, gen, [1]))
    assert len(runs) == 1 and runs[0][2].ids == ["only"] and runs[0][3].fragment_ids == ["only"]


def test_bad_k_lists(setup):
    records, pipe, gen = setup
    for bad in ([], [1, 1], [0, 3]):
        with pytest.raises(ValueError):
            run_doc_count_ablation(records, pipe, gen, bad)


def test_failures_collected(setup):
    records, pipe, gen = setup
    bad = records[:2] + [CorpusRecord("?!", (), "x")]
    with pytest.raises(EmptyText):
        run_doc_count_ablation(bad, pipe, gen, [1])
    failures = []
    rows = run_doc_count_ablation(bad, pipe, gen, [1], failures=failures)
    assert rows[0].report.n_records == 2
    assert [(k, n) for k, n, _ in failures] == [(1, 3)]


def test_report_files(tmp_path):
    rows = [AblationRow(1, MetricReport(0.5, 0.25, 1 / 3, 4)), AblationRow(10, MetricReport(1.0, 0.0, 0.125, 4))]
    jsonl, txt = write_reports(rows, tmp_path / "out")
    lines = jsonl.read_text().splitlines()
    assert json.loads(lines[0]) == {"k": 1, "quality": 0.5, "kc": 0.25, "rc": 1 / 3, "n_records": 4}
    assert rows_from_jsonl(jsonl.read_text()) == rows
    table = txt.read_text().splitlines()
    assert table[0].split() == ["Number", "of", "documents", "Quality", "KC", "RC"]
    assert table[2].split() == ["10", "1.0000", "0.0000", "0.1250"]
    assert txt.read_text() == format_table(rows)
