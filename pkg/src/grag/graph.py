"""Typed knowledge-graph data model.

A :class:`KnowledgeGraph` is immutable once built.  Node ids are arbitrary
distinct non-negative integers; node features are float64 vectors of one
shared width.  Undirected graphs (the default) expose symmetric neighbor
sets; directed graphs expose in-neighbors, i.e. messages flow along an edge
``src -> dst`` into ``dst``.

The JSON form used on disk is::

    {"feature_dim": 3, "directed": false,
     "nodes": [{"id": 0, "features": [0.1, 0.2, 0.3]}, ...],
     "edges": [{"src": 0, "dst": 1, "label": "capital_of"}, ...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

import numpy as np

from .errors import DanglingEdge, DimMismatch, DuplicateEdge, EmptyGraph, UnknownNode


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: Optional[str] = None

    @property
    def is_self_loop(self) -> bool:
        return self.src == self.dst


def _as_feature(values, lineage=None) -> np.ndarray:
    vec = np.array(values, dtype=np.float64)
    if vec.ndim != 1:
        raise DimMismatch(f"feature vector for node {lineage} must be 1-D, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"feature vector for node {lineage} has non-finite entries")
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class KnowledgeGraph:
    """Validated, immutable graph.  Build it with :func:`build_graph`."""

    nodes: Mapping[int, np.ndarray]
    edges: tuple
    directed: bool
    feature_dim: int
    _adjacency: Mapping[int, tuple] = field(repr=False, compare=False)

    @property
    def node_ids(self) -> list:
        return sorted(self.nodes)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def self_loops(self) -> list:
        """Edges whose endpoints coincide. Allowed, but surfaced here."""
        return [e for e in self.edges if e.is_self_loop]

    def features(self, i: int) -> np.ndarray:
        try:
            return self.nodes[i]
        except KeyError:
            raise UnknownNode(f"node {i} not in graph") from None

    def neighbors(self, i: int) -> tuple:
        return neighbors(self, i)


def build_graph(
    node_specs: Iterable[tuple],
    edge_specs: Iterable = (),
    directed: bool = False,
) -> KnowledgeGraph:
    """Validate nodes and edges and return an immutable graph.

    ``node_specs`` is a sequence of ``(node_id, features)`` pairs; ``edge_specs``
    holds :class:`Edge` objects or ``(src, dst[, label])`` tuples.

    Raises
    ------
    EmptyGraph
        No nodes given.
    DimMismatch
        Feature vectors of differing lengths.
    DanglingEdge
        An edge endpoint is not a node.
    DuplicateEdge
        The same ``(src, dst, label)`` appears twice (for undirected graphs,
        ``(dst, src, label)`` counts as the same edge).
    """
    nodes: dict = {}
    dim = None
    for node_id, values in node_specs:
        node_id = int(node_id)
        if node_id < 0:
            raise ValueError(f"node ids must be non-negative, got {node_id}")
        if node_id in nodes:
            raise ValueError(f"duplicate node id {node_id}")
        vec = _as_feature(values, node_id)
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise DimMismatch(
                f"node {node_id} has {vec.shape[0]} features, expected {dim}")
        nodes[node_id] = vec
    if not nodes:
        raise EmptyGraph("a graph needs at least one node")
    if dim == 0:
        raise DimMismatch("feature dimension must be positive")

    edges = []
    seen = set()
    adjacency: dict = {i: set() for i in nodes}
    for spec in edge_specs:
        e = spec if isinstance(spec, Edge) else Edge(*spec)
        e = Edge(int(e.src), int(e.dst), e.label)
        for end in (e.src, e.dst):
            if end not in nodes:
                raise DanglingEdge(f"edge {e.src}->{e.dst} references missing node {end}")
        key = (e.src, e.dst, e.label) if directed else (min(e.src, e.dst), max(e.src, e.dst), e.label)
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {e.src}->{e.dst} label={e.label!r}")
        seen.add(key)
        edges.append(e)
        adjacency[e.dst].add(e.src)
        if not directed:
            adjacency[e.src].add(e.dst)

    frozen_adj = MappingProxyType({i: tuple(sorted(s)) for i, s in adjacency.items()})
    return KnowledgeGraph(
        nodes=MappingProxyType(nodes),
        edges=tuple(edges),
        directed=bool(directed),
        feature_dim=int(dim),
        _adjacency=frozen_adj,
    )


def neighbors(g: KnowledgeGraph, i: int) -> tuple:
    """Ids feeding messages into node ``i``, ascending."""
    try:
        return g._adjacency[i]
    except KeyError:
        raise UnknownNode(f"node {i} not in graph") from None


def relabel(g: KnowledgeGraph, mapping: Mapping[int, int]) -> KnowledgeGraph:
    """Return a copy of ``g`` with node ids renamed through ``mapping``."""
    node_specs = [(mapping[i], g.nodes[i]) for i in g.node_ids]
    edge_specs = [Edge(mapping[e.src], mapping[e.dst], e.label) for e in g.edges]
    return build_graph(node_specs, edge_specs, g.directed)


# -- JSON ---------------------------------------------------------------

def graph_to_dict(g: KnowledgeGraph) -> dict:
    edges = []
    for e in g.edges:
        d = {"src": e.src, "dst": e.dst}
        if e.label is not None:
            d["label"] = e.label
        edges.append(d)
    return {
        "feature_dim": g.feature_dim,
        "directed": g.directed,
        "nodes": [{"id": i, "features": g.nodes[i].tolist()} for i in g.node_ids],
        "edges": edges,
    }


def graph_from_dict(data: Mapping) -> KnowledgeGraph:
    try:
        declared = int(data["feature_dim"])
        node_specs = [(n["id"], n["features"]) for n in data["nodes"]]
        edge_specs = [Edge(e["src"], e["dst"], e.get("label")) for e in data.get("edges", [])]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed graph document: {exc!r}") from None
    g = build_graph(node_specs, edge_specs, bool(data.get("directed", False)))
    if g.feature_dim != declared:
        raise DimMismatch(f"declared feature_dim {declared} but features have {g.feature_dim}")
    return g


def load_graph(path) -> KnowledgeGraph:
    return graph_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_graph(g: KnowledgeGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g)), encoding="utf-8")
