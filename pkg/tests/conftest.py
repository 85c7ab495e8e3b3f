import numpy as np
import pytest

from grag.graph import build_graph

ACCEPTANCE_LINES = []


def random_graph(rng, max_nodes=20, dim=8, edge_p=0.25, directed=False, sparse_ids=True):
    n = int(rng.integers(1, max_nodes + 1))
    if sparse_ids:
        ids = sorted(rng.choice(10 * max_nodes, size=n, replace=False).tolist())
    else:
        ids = list(range(n))
    nodes = [(i, rng.normal(size=dim)) for i in ids]
    edges = []
    for a in range(n):
        for b in range(n if directed else a + 1):
            if a != b and rng.random() < edge_p:
                edges.append((ids[a], ids[b]))
    return build_graph(nodes, edges, directed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
