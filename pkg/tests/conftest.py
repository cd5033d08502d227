import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from consensus_net import graph as gr


def csgraph(g, weighted=False):
    data = g.delays.astype(float) if weighted else np.ones(g.indices.size)
    return csr_matrix((data, g.indices, g.indptr), shape=(g.node_count, g.node_count))


def oracle_distances(g, weighted=False, source=None):
    """All-pairs (or single-source) shortest paths from scipy."""
    return shortest_path(csgraph(g, weighted), directed=False, unweighted=not weighted, indices=source)


@pytest.fixture
def star5():
    return gr.Graph.from_edges(5, [(0, i) for i in range(1, 5)])


@pytest.fixture
def path3():
    return gr.Graph.from_edges(3, [(0, 1), (1, 2)])


def cycle(n):
    return gr.Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
