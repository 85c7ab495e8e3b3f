"""``grag`` command line: ingest, query, generate, bench, serve.

Settings resolve as flags > ``--config`` JSON file > defaults.  A config
file mirrors :class:`RunConfig`, e.g.::

    {"corpus": "corpus.jsonl", "index": "idx.bin", "seed": 0, "k": 5,
     "gnn": {"num_layers": 2, "hidden_dim": 64, "aggregator": "mean"},
     "graph_builder": {"window": 2}, "generator": "toy"}

Failures print ``<ErrorClass>: <message>`` on stderr and exit 1; usage
errors exit 2.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from . import bench
from .encoder import GnnConfig, GraphEncoder, load_params
from .errors import ConfigError, GragError
from .generation import ExternalGenerator, ToyGenerator, toy_decoder_from_index
from .index import load_index, save_index
from .ingest import GraphBuilderConfig, parse_corpus
from .llm_client import ClientConfig
from .pipeline import Pipeline

log = logging.getLogger("grag")


def bundled_corpus() -> str:
    """Path of the 20-record synthetic corpus shipped with the package."""
    return str(resources.files("grag").joinpath("data/synthetic_corpus.jsonl"))


@dataclass
class RunConfig:
    corpus: Optional[str] = None
    index: Optional[str] = None
    gnn: GnnConfig = field(default_factory=GnnConfig)
    seed: int = 0
    params: Optional[str] = None
    graph_builder: GraphBuilderConfig = field(default_factory=GraphBuilderConfig)
    generator: str = "toy"
    k: int = 5
    k_list: list = field(default_factory=lambda: list(bench.DEFAULT_K_LIST))
    max_tokens: int = 8
    out: str = "grag-out"
    bind: str = "127.0.0.1:8000"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.generator not in ("toy", "external"):
            raise ConfigError(f"generator must be 'toy' or 'external', got {self.generator!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "gnn" in d:
            d["gnn"] = GnnConfig.from_dict(d["gnn"])
        if "graph_builder" in d:
            d["graph_builder"] = GraphBuilderConfig(**d["graph_builder"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# -- config resolution ---------------------------------------------------

_GNN_FLAGS = {"layers": "num_layers", "hidden_dim": "hidden_dim", "aggregator": "aggregator",
              "activation": "activation"}
_FLAT_FLAGS = ("corpus", "index", "seed", "params", "generator", "k", "k_list", "max_tokens", "out", "bind")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc.msg}") from None
    try:
        cfg = RunConfig.from_dict(base)
        for name in _FLAT_FLAGS:
            value = getattr(args, name, None)
            if value is not None:
                setattr(cfg, name, value)
        gnn_over = {dst: getattr(args, src) for src, dst in _GNN_FLAGS.items() if getattr(args, src, None) is not None}
        if gnn_over:
            cfg.gnn = replace(cfg.gnn, **gnn_over)
        if getattr(args, "window", None) is not None:
            cfg.graph_builder = replace(cfg.graph_builder, window=args.window)
        cfg.__post_init__()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def build_encoder(cfg: RunConfig) -> GraphEncoder:
    if cfg.params:
        gnn, params = load_params(cfg.params)
        return GraphEncoder(gnn, params)
    return GraphEncoder.seeded(cfg.gnn, cfg.seed)


def _builder_for(cfg: RunConfig, encoder: GraphEncoder) -> GraphBuilderConfig:
    if cfg.graph_builder.feature_dim != encoder.config.input_dim:
        raise ConfigError(
            f"graph_builder.feature_dim={cfg.graph_builder.feature_dim} but the encoder expects "
            f"input_dim={encoder.config.input_dim}")
    return cfg.graph_builder


def _read_records(path: str) -> list:
    try:
        return list(parse_corpus(path))
    except FileNotFoundError:
        raise ConfigError(f"cannot read corpus {path}: no such file") from None
    except OSError as exc:
        raise ConfigError(f"cannot read corpus {path}: {exc.strerror}") from None


def open_pipeline(cfg: RunConfig) -> Pipeline:
    """Pipeline over the saved index named by ``cfg.index``."""
    if not cfg.index:
        raise ConfigError("--index is required")
    encoder = build_encoder(cfg)
    try:
        index = load_index(cfg.index)
    except FileNotFoundError:
        raise ConfigError(f"cannot read index {cfg.index}: no such file") from None
    stored = index.meta.get("gnn_config")
    if stored is not None and stored != asdict(encoder.config):
        log.warning("index was built with encoder config %s; querying with %s", stored, asdict(encoder.config))
    stored_seed = index.meta.get("seed")
    if not cfg.params and stored_seed is not None and stored_seed != cfg.seed:
        log.warning("index was built with seed %s; querying with seed %s", stored_seed, cfg.seed)
    return Pipeline(encoder, _builder_for(cfg, encoder), index=index, seed=cfg.seed)


def make_generator(cfg: RunConfig, pipeline: Pipeline):
    if cfg.generator == "external":
        return ExternalGenerator(ClientConfig.from_env(), max_tokens=cfg.max_tokens)
    return ToyGenerator(toy_decoder_from_index(pipeline.index), max_tokens=cfg.max_tokens)


# -- commands --------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> str:
    if not cfg.index:
        raise ConfigError("--index is required")
    records = _read_records(cfg.corpus or bundled_corpus())
    encoder = build_encoder(cfg)
    pipe = Pipeline(encoder, _builder_for(cfg, encoder), seed=None if cfg.params else cfg.seed)
    n = pipe.ingest(records)
    save_index(pipe.index, cfg.index)
    return f"indexed {n} fragments from {len(records)} records; embedding_dim={pipe.index.dim}; wrote {cfg.index}"


def format_hits(hits, as_json: bool = False) -> str:
    if as_json:
        return json.dumps(hits.to_dict())
    return "\n".join(f"{r}  {s:.6f}  {fid}" for r, (fid, s) in enumerate(hits, 1))


def cmd_query(cfg: RunConfig, query_text: str, k: Optional[int] = None, as_json: bool = False) -> str:
    hits = open_pipeline(cfg).retrieve(query_text, k or cfg.k)
    return format_hits(hits, as_json)


def cmd_generate(cfg: RunConfig, query_text: str, trace: bool = False) -> str:
    pipe = open_pipeline(cfg)
    generator = make_generator(cfg, pipe)
    hits, rec = pipe.answer(query_text, cfg.k, generator)
    lines = []
    if trace:
        lines += [f"trace: {r}  {s:.6f}  {fid}" for r, (fid, s) in enumerate(hits, 1)]
    lines.append(rec.text)
    lines.append(json.dumps(rec.to_dict()))
    return "\n".join(lines)


def cmd_bench(cfg: RunConfig) -> tuple:
    """Run the k-sweep; returns ``(rows, failures, table_text)`` after writing reports."""
    corpus = cfg.corpus or bundled_corpus()
    records = _read_records(corpus)
    if cfg.index and Path(cfg.index).exists():
        pipe = open_pipeline(cfg)
    else:
        encoder = build_encoder(cfg)
        pipe = Pipeline(encoder, _builder_for(cfg, encoder), seed=cfg.seed)
        pipe.ingest(records)
    generator = make_generator(cfg, pipe)
    failures: list = []
    rows = bench.run_doc_count_ablation(records, pipe, generator, cfg.k_list, failures=failures)
    bench.write_reports(rows, cfg.out)
    return rows, failures, bench.format_table(rows)


def cmd_serve(cfg: RunConfig, ready=None) -> None:
    from .service import ServiceState, serve

    pipe = open_pipeline(cfg)
    state = ServiceState(pipe, make_generator(cfg, pipe), cfg.k)
    serve(state, cfg.bind, ready=ready)


# -- argument parsing ------------------------------------------------------

def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _k_list(text: str) -> list:
    return [_positive_int(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run-config file")
    common.add_argument("--corpus", help="line-delimited JSON corpus (default: the bundled one)")
    common.add_argument("--index", help="index file")
    common.add_argument("--seed", type=int, help="encoder initialization seed")
    common.add_argument("--params", help="encoder parameter file (overrides --seed and GNN flags)")
    common.add_argument("--layers", type=_positive_int, help="number of message-passing layers")
    common.add_argument("--hidden-dim", type=_positive_int, help="embedding width")
    common.add_argument("--aggregator", choices=("mean", "sum", "max"))
    common.add_argument("--activation", choices=("relu", "tanh"))
    common.add_argument("--window", type=_positive_int, help="co-occurrence window")
    common.add_argument("--generator", choices=("toy", "external"))
    common.add_argument("--k", type=_positive_int, help="fragments to retrieve")
    common.add_argument("--max-tokens", type=_positive_int)
    common.add_argument("-v", "--verbose", action="store_true", help="log and echo the effective config")

    parser = argparse.ArgumentParser(prog="grag", description="Graph-embedding retrieval-augmented generation.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="encode corpus fragments into an index file")
    q = sub.add_parser("query", parents=[common], help="print the top-k fragments for a query")
    q.add_argument("text")
    q.add_argument("--json", action="store_true")
    g = sub.add_parser("generate", parents=[common], help="retrieve, then generate an answer")
    g.add_argument("text")
    g.add_argument("--trace", action="store_true", help="print retrieved ids and scores first")
    b = sub.add_parser("bench", parents=[common], help="run the document-count sweep")
    b.add_argument("--out", help="report directory")
    b.add_argument("--k-list", type=_k_list, help="comma-separated k values (default 1,3,5,10)")
    s = sub.add_parser("serve", parents=[common], help="serve /query, /generate, /healthz")
    s.add_argument("--bind", help="host:port (default 127.0.0.1:8000)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.verbose:
            print(json.dumps(cfg.to_dict(), sort_keys=True), file=sys.stderr)
        if args.command == "ingest":
            print(cmd_ingest(cfg))
        elif args.command == "query":
            print(cmd_query(cfg, args.text, as_json=args.json))
        elif args.command == "generate":
            print(cmd_generate(cfg, args.text, trace=args.trace))
        elif args.command == "bench":
            rows, failures, table = cmd_bench(cfg)
            print(table, end="")
            if failures:
                for k, n, exc in failures:
                    print(f"{type(exc).__name__}: k={k} record {n}: {exc}", file=sys.stderr)
                return 1
        elif args.command == "serve":
            cmd_serve(cfg)
    except GragError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"IOError: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
