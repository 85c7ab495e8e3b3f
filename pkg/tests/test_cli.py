import json

import pytest

from grag.cli import RunConfig, bundled_corpus, cmd_query, main
from grag.encoder import GnnConfig, init_params, save_params
from grag.index import load_index


@pytest.fixture
def small_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    lines = []
    for n in range(3):
        frags = [{"id": f"r{n}-{c}", "text": f"record {n} fragment {c} about topic{n}{c}"} for c in "ab"]
        lines.append(json.dumps({"query": f"topic{n}", "fragments": frags, "answer": f"topic{n}a"}))
    path.write_text("\n".join(lines) + "\n")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_ingest_counts_and_is_byte_identical(tmp_path, small_corpus, capsys):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    code, out, _ = run(capsys, "ingest", "--corpus", small_corpus, "--index", a)
    assert code == 0 and "indexed 6 fragments" in out and "embedding_dim=64" in out
    run(capsys, "ingest", "--corpus", small_corpus, "--index", b)
    assert len(load_index(a)) == 6
    assert a.read_bytes() == b.read_bytes()


def test_ingest_unreadable_corpus(tmp_path, capsys):
    code, _, err = run(capsys, "ingest", "--corpus", tmp_path / "missing.jsonl", "--index", tmp_path / "x.bin")
    assert code != 0
    assert err.startswith("ConfigError: ") and "missing.jsonl" in err


def test_ingest_parse_error_has_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"query": "q", "fragments": [], "answer": "a"}\n{oops\n')
    code, _, err = run(capsys, "ingest", "--corpus", bad, "--index", tmp_path / "x.bin")
    assert code == 1 and err.startswith("ParseError: line 2")


@pytest.fixture
def bundled_index(tmp_path, capsys):
    path = tmp_path / "idx.bin"
    assert main(["ingest", "--corpus", bundled_corpus(), "--index", str(path)]) == 0
    capsys.readouterr()
    return path


def test_query_exact_fragment_text_ranks_first(bundled_index, capsys):
    index = load_index(bundled_index)
    for fid in ("r01-a", "r07-b", "r20-c"):
        text = index.get(fid).payload
        code, out, _ = run(capsys, "query", text, "--index", bundled_index, "--k", 3)
        first = out.splitlines()[0].split()
        assert code == 0 and first[0] == "1" and first[2] == fid
        assert float(first[1]) == pytest.approx(1.0, abs=1e-6)


def test_query_json_same_ranking(bundled_index, capsys):
    _, plain, _ = run(capsys, "query", "capital of france", "--index", bundled_index, "--k", 4)
    _, js, _ = run(capsys, "query", "capital of france", "--index", bundled_index, "--k", 4, "--json")
    doc = json.loads(js)
    assert [h["fragment_id"] for h in doc["hits"]] == [line.split()[2] for line in plain.splitlines()]
    assert doc["query_dim"] == 64


def test_query_k_zero_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["query", "x", "--index", str(tmp_path / "does-not-exist.bin"), "--k", "0"])
    assert exc.value.code == 2


def test_query_with_mismatched_encoder(bundled_index, capsys):
    code, _, err = run(capsys, "query", "paris", "--index", bundled_index, "--hidden-dim", 32)
    assert code == 1 and err.startswith("DimMismatch: ")


def test_generate_toy_deterministic_and_trace(bundled_index, capsys):
    args = ["generate", "what is the capital of france", "--index", bundled_index, "--k", 3]
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b
    _, traced, _ = run(capsys, *args, "--trace")
    lines = traced.splitlines()
    assert all(line.startswith("trace: ") for line in lines[:3])
    assert lines[3:] == a.splitlines()
    record = json.loads(lines[-1])
    assert record["fragment_ids"] == [line.split()[-1] for line in lines[:3]]
    assert record["finished_by"] in ("end_token", "max_tokens")


def test_generate_external_needs_api_key(bundled_index, capsys, monkeypatch):
    monkeypatch.setenv("GRAG_LLM_ENDPOINT", "http://127.0.0.1:9")
    monkeypatch.setenv("GRAG_LLM_MODEL", "m")
    monkeypatch.delenv("GRAG_LLM_API_KEY", raising=False)
    code, _, err = run(capsys, "generate", "q", "--index", bundled_index, "--generator", "external")
    assert code == 1 and "GRAG_LLM_API_KEY" in err and err.startswith("ConfigError")


def test_generate_external_via_stub(bundled_index, capsys, monkeypatch):
    from stub_llm import StubLLM, ok

    with StubLLM([ok("Paris")]) as stub:
        monkeypatch.setenv("GRAG_LLM_ENDPOINT", stub.url)
        monkeypatch.setenv("GRAG_LLM_MODEL", "m")
        monkeypatch.setenv("GRAG_LLM_API_KEY", "secret")
        code, out, _ = run(capsys, "generate", "capital of france", "--index", bundled_index,
                           "--generator", "external")
    assert code == 0 and out.splitlines()[0] == "Paris"
    assert stub.requests[0]["headers"]["Authorization"] == "Bearer secret"


def test_bench_writes_reports(tmp_path, capsys):
    out = tmp_path / "out"
    code, printed, _ = run(capsys, "bench", "--out", out)
    assert code == 0
    rows = [json.loads(line) for line in (out / "ablation.jsonl").read_text().splitlines()]
    assert [r["k"] for r in rows] == [1, 3, 5, 10]
    assert printed == (out / "ablation.txt").read_text()


def test_bench_custom_k_list_and_failures(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(
        json.dumps({"query": "paris", "fragments": [{"id": "a", "text": "Paris France"}], "answer": "paris"}) + "\n"
        + json.dumps({"query": "...", "fragments": [{"id": "b", "text": "Rome Italy"}], "answer": "rome"}) + "\n")
    code, printed, err = run(capsys, "bench", "--corpus", corpus, "--k-list", "2,1", "--out", tmp_path / "o")
    assert code == 1
    assert "EmptyText: k=1 record 2" in err
    assert [line.split()[0] for line in printed.splitlines()[1:]] == ["1", "2"]


def test_config_file_precedence(tmp_path, bundled_index, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"index": str(bundled_index), "k": 2, "gnn": {"aggregator": "mean"}}))
    code, out, _ = run(capsys, "query", "paris", "--config", cfg_path)
    assert code == 0 and len(out.splitlines()) == 2
    code, out, _ = run(capsys, "query", "paris", "--config", cfg_path, "--k", 4)
    assert len(out.splitlines()) == 4
    code, _, err = run(capsys, "query", "paris", "--config", cfg_path, "--verbose")
    assert json.loads(err.splitlines()[0])["k"] == 2


def test_bad_config_file(tmp_path, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"nonsense": 1}))
    code, _, err = run(capsys, "query", "x", "--config", cfg_path)
    assert code == 1 and err.startswith("ConfigError: unknown config keys")


def test_params_file_flag(tmp_path, small_corpus, capsys):
    gnn = GnnConfig(num_layers=1, input_dim=64, hidden_dim=16, aggregator="max")
    save_params(gnn, init_params(gnn, 3), tmp_path / "p.json")
    idx = tmp_path / "i.bin"
    assert run(capsys, "ingest", "--corpus", small_corpus, "--index", idx, "--params", tmp_path / "p.json")[0] == 0
    assert load_index(idx).dim == 16
    code, out, _ = run(capsys, "query", "topic1", "--index", idx, "--params", tmp_path / "p.json", "--k", 1)
    assert code == 0 and len(out.splitlines()) == 1


def test_cmd_query_function(bundled_index):
    out = cmd_query(RunConfig(index=str(bundled_index)), "paris", k=2)
    assert len(out.splitlines()) == 2


def test_ingest_defaults_to_bundled_corpus(capsys, tmp_path):
    code, out, _ = run(capsys, "ingest", "--index", tmp_path / "i.bin")
    assert code == 0 and "indexed 60 fragments from 20 records" in out


def test_seed_mismatch_warns(capsys, caplog, tmp_path):
    idx = tmp_path / "i.bin"
    run(capsys, "ingest", "--index", idx, "--seed", "0")
    with caplog.at_level("WARNING", logger="grag"):
        assert run(capsys, "query", "red planet", "--index", idx, "--seed", "3")[0] == 0
    assert "built with seed 0" in caplog.text
