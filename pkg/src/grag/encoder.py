"""Forward-only message-passing encoder.

Each layer updates every node from its neighborhood::

    h_i' = act(W @ AGG({h_j : j in N(i)}) + b)

with AGG one of mean / sum / max.  An empty neighborhood aggregates to the
zero vector, so an isolated node receives ``act(b)``.  After the last layer
node states are mean-pooled into one graph embedding.

Nothing here is trained: parameters come from :func:`init_params` (seeded
Glorot-uniform weights, zero biases) or from a parameter file.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DimMismatch, EmptyGraph
from .graph import KnowledgeGraph, neighbors

AGGREGATORS = ("mean", "sum", "max")
ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class GnnConfig:
    num_layers: int = 2
    input_dim: int = 64
    hidden_dim: int = 64
    aggregator: str = "mean"
    activation: str = "relu"
    include_self: bool = False

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("input_dim and hidden_dim must be >= 1")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}, got {self.aggregator!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {tuple(ACTIVATIONS)}, got {self.activation!r}")

    def layer_in_dim(self, k: int) -> int:
        return self.input_dim if k == 0 else self.hidden_dim

    @classmethod
    def from_dict(cls, d: Mapping) -> "GnnConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GnnParams:
    """Per-layer ``(W, b)`` pairs; ``W`` is ``hidden_dim x in_dim``."""

    layers: tuple

    def check(self, config: GnnConfig) -> None:
        if len(self.layers) != config.num_layers:
            raise DimMismatch(f"expected {config.num_layers} layers, got {len(self.layers)}")
        for k, (W, b) in enumerate(self.layers):
            want = (config.hidden_dim, config.layer_in_dim(k))
            if W.shape != want:
                raise DimMismatch(f"layer {k}: W has shape {W.shape}, expected {want}")
            if b.shape != (config.hidden_dim,):
                raise DimMismatch(f"layer {k}: b has shape {b.shape}, expected ({config.hidden_dim},)")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite parameters")

    @classmethod
    def from_arrays(cls, layers: Sequence) -> "GnnParams":
        return cls(tuple((_frozen(W), _frozen(b)) for W, b in layers))


def init_params(config: GnnConfig, seed: int) -> GnnParams:
    """Glorot-uniform weights and zero biases; a pure function of ``(config, seed)``."""
    rng = np.random.default_rng(seed)
    layers = []
    for k in range(config.num_layers):
        fan_in, fan_out = config.layer_in_dim(k), config.hidden_dim
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append((W, np.zeros(fan_out)))
    return GnnParams.from_arrays(layers)


def _reduce(rows: np.ndarray, kind: str) -> np.ndarray:
    if kind == "mean":
        return rows.mean(axis=0)
    if kind == "sum":
        return rows.sum(axis=0)
    return rows.max(axis=0)


def aggregate(vectors, agg: str, dim: int) -> np.ndarray:
    """Elementwise mean/sum/max of ``vectors``; the zero vector when empty."""
    if agg not in AGGREGATORS:
        raise ValueError(f"unknown aggregator {agg!r}")
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    for v in vectors:
        if v.shape != (dim,):
            raise DimMismatch(f"vector of shape {v.shape} in aggregate over dim {dim}")
    if not vectors:
        return np.zeros(dim)
    return _reduce(np.stack(vectors), agg)


def propagate_layer(
    g: KnowledgeGraph,
    states: Mapping[int, np.ndarray],
    layer: tuple,
    config: GnnConfig,
) -> dict:
    """Apply one message-passing layer to every node of ``g``.

    Neighbor states are accumulated in ascending id order so the result does
    not depend on edge insertion order.
    """
    W, b = layer
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    in_dim = W.shape[1]
    if b.shape != (W.shape[0],):
        raise DimMismatch(f"bias shape {b.shape} does not match W rows {W.shape[0]}")

    ids = g.node_ids
    pos = {i: p for p, i in enumerate(ids)}
    try:
        X = np.stack([np.asarray(states[i], dtype=np.float64) for i in ids])
    except KeyError as exc:
        raise DimMismatch(f"no state for node {exc.args[0]}") from None
    except ValueError:
        raise DimMismatch("node states have inconsistent widths") from None
    if X.shape[1] != in_dim:
        raise DimMismatch(f"state width {X.shape[1]} does not match W columns {in_dim}")

    agg = np.zeros((len(ids), in_dim))
    for p, i in enumerate(ids):
        src = neighbors(g, i)
        if config.include_self and i not in src:
            src = tuple(sorted(src + (i,)))
        if src:
            agg[p] = _reduce(X[[pos[j] for j in src]], config.aggregator)

    act = ACTIVATIONS[config.activation]
    out = act(agg @ W.T + b)
    return {i: out[p] for p, i in enumerate(ids)}


def encode_nodes(g: KnowledgeGraph, params: GnnParams, config: GnnConfig) -> dict:
    """Final node states after ``config.num_layers`` propagation steps."""
    if g.feature_dim != config.input_dim:
        raise DimMismatch(f"graph feature_dim {g.feature_dim} != encoder input_dim {config.input_dim}")
    params.check(config)
    states = dict(g.nodes)
    for layer in params.layers:
        states = propagate_layer(g, states, layer, config)
    return states


def readout(node_states: Mapping[int, np.ndarray]) -> np.ndarray:
    """Mean-pool node states (ascending id order) into one embedding."""
    if not node_states:
        raise EmptyGraph("readout over an empty node set")
    try:
        rows = np.stack([np.asarray(node_states[i], dtype=np.float64) for i in sorted(node_states)])
    except ValueError:
        raise DimMismatch("node states have inconsistent widths") from None
    return rows.mean(axis=0)


def encode_graph(g: KnowledgeGraph, params: GnnParams, config: GnnConfig) -> np.ndarray:
    return readout(encode_nodes(g, params, config))


class GraphEncoder:
    """Bundles a config with its parameters; ``encoder(g)`` embeds a graph."""

    def __init__(self, config: GnnConfig, params: GnnParams):
        params.check(config)
        self.config = config
        self.params = params

    @classmethod
    def seeded(cls, config: GnnConfig, seed: int) -> "GraphEncoder":
        return cls(config, init_params(config, seed))

    @property
    def dim(self) -> int:
        return self.config.hidden_dim

    def __call__(self, g: KnowledgeGraph) -> np.ndarray:
        return encode_graph(g, self.params, self.config)


# -- parameter files ------------------------------------------------------

def params_to_dict(config: GnnConfig, params: GnnParams) -> dict:
    return {
        "config": asdict(config),
        "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in params.layers],
    }


def params_from_dict(d: Mapping) -> tuple:
    config = GnnConfig.from_dict(d["config"])
    params = GnnParams.from_arrays(
        [(np.array(l["W"], dtype=np.float64).reshape(config.hidden_dim, -1), l["b"]) for l in d["layers"]]
    )
    params.check(config)
    return config, params


def save_params(config: GnnConfig, params: GnnParams, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(params_to_dict(config, params)), encoding="utf-8")


def load_params(path) -> tuple:
    """Return ``(config, params)`` read from a parameter file."""
    return params_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
