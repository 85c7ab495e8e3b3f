"""End-to-end plumbing: text -> graph -> embedding -> index -> generator."""
from __future__ import annotations

from dataclasses import asdict
from typing import Iterable, Optional

from .encoder import GnnConfig, GraphEncoder
from .errors import ConfigError, DuplicateFragment
from .generation import ConditionFragment
from .index import RankedHits, RetrievalIndex
from .ingest import CorpusRecord, GraphBuilderConfig, text_to_graph


class Pipeline:
    """Holds the graph builder, encoder and index used by every front end."""

    def __init__(
        self,
        encoder: GraphEncoder,
        builder: GraphBuilderConfig = GraphBuilderConfig(),
        index: Optional[RetrievalIndex] = None,
        seed: Optional[int] = None,
    ):
        if builder.feature_dim != encoder.config.input_dim:
            raise ConfigError(
                f"graph builder feature_dim {builder.feature_dim} != encoder input_dim {encoder.config.input_dim}")
        self.encoder = encoder
        self.builder = builder
        self.seed = seed
        if index is None:
            index = RetrievalIndex(encoder.dim, meta=self.meta())
        index.encoder = encoder
        self.index = index

    @classmethod
    def seeded(cls, config: GnnConfig = GnnConfig(), seed: int = 0,
               builder: Optional[GraphBuilderConfig] = None) -> "Pipeline":
        builder = builder or GraphBuilderConfig(feature_dim=config.input_dim)
        return cls(GraphEncoder.seeded(config, seed), builder, seed=seed)

    def meta(self) -> dict:
        return {
            "gnn_config": asdict(self.encoder.config),
            "graph_builder": asdict(self.builder),
            "seed": self.seed,
        }

    def graph(self, text: str):
        return text_to_graph(text, self.builder)

    def embed(self, text: str):
        return self.encoder(self.graph(text))

    def ingest(self, records: Iterable[CorpusRecord]) -> int:
        """Index every fragment of every record; returns the number added."""
        added = 0
        for n, rec in enumerate(records, 1):
            for fid, text in rec.fragments:
                try:
                    self.index.add_fragment(fid, self.graph(text), text)
                except DuplicateFragment as exc:
                    raise DuplicateFragment(f"record {n}: {exc}") from None
                added += 1
        return added

    def retrieve(self, query: str, k: int) -> RankedHits:
        return self.index.query_top_k(self.embed(query), k)

    def condition(self, hits: RankedHits) -> list:
        out = []
        for fid, score in hits:
            entry = self.index.get(fid)
            out.append(ConditionFragment(fid, entry.payload, entry.embedding, score))
        return out

    def answer(self, query: str, k: int, generator):
        """Retrieve top-``k`` fragments and generate; returns ``(hits, record)``."""
        hits = self.retrieve(query, k)
        return hits, generator.generate(query, self.condition(hits))
