"""Graph-embedding retrieval-augmented generation.

Text fragments become co-occurrence graphs, a message-passing encoder turns
each graph into one vector, an exact cosine index retrieves the top-k
fragments for a query graph, and a generator is conditioned on them.
"""
from .encoder import (
    GnnConfig,
    GnnParams,
    GraphEncoder,
    aggregate,
    encode_graph,
    encode_nodes,
    init_params,
    load_params,
    propagate_layer,
    readout,
    save_params,
)
from .errors import *  # noqa: F401,F403
from .generation import (
    GenerationCondition,
    GenerationRecord,
    ToyDecoderParams,
    ToyGenerator,
    assemble_prompt,
    decode_greedy,
    softmax,
    toy_step,
)
from .graph import Edge, KnowledgeGraph, build_graph, neighbors
from .index import RankedHits, RetrievalIndex, cosine_similarity, load_index, save_index
from .ingest import CorpusRecord, GraphBuilderConfig, hash_features, parse_corpus, text_to_graph
from .metrics import MetricReport, evaluate, kc_support, quality_f1, rc_chain
from .pipeline import Pipeline

__version__ = "0.1.0"
