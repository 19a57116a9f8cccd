"""Tests for communication graphs and their Laplacian spectra."""

import itertools
import math

import networkx as nx
import numpy as np
import pytest

from evsync.core import netgraph
from evsync.core.errors import Disconnected, InvalidGraph


def test_ring_spectrum_and_threshold():
    g = netgraph.ring(4)
    spec = netgraph.spectrum(g)
    assert np.allclose(spec.mu, [0.0, 2.0, 2.0, 4.0])
    assert spec.mu2 == pytest.approx(2.0)
    assert spec.mu_max == pytest.approx(4.0)
    assert netgraph.feasibility_threshold(spec) == pytest.approx(3.0)


def test_laplacian_rows_sum_to_zero():
    g = netgraph.from_edges(4, [(0, 1, 2.0), (1, 2), (2, 3, 0.5), (3, 0)])
    L = netgraph.laplacian(g)
    assert np.allclose(L.sum(axis=1), 0.0)
    assert np.allclose(L, L.T)
    assert L[0, 0] == pytest.approx(3.0)
    assert L[0, 1] == pytest.approx(-2.0)


def test_complete_graph_threshold_is_infinite():
    spec = netgraph.spectrum(netgraph.complete(5))
    assert np.allclose(spec.mu, [0.0, 5.0, 5.0, 5.0, 5.0])
    assert netgraph.feasibility_threshold(spec) == math.inf


def test_single_node():
    g = netgraph.ring(1)
    spec = netgraph.spectrum(g)
    assert spec.mu == (0.0,)
    assert spec.mu2 == 0.0
    assert netgraph.feasibility_threshold(spec) == math.inf


def test_small_rings_fall_back_to_paths():
    assert netgraph.ring(2) == netgraph.path(2)
    assert len(netgraph.ring(3).edges()) == 3


def test_star_hub_is_node_zero():
    g = netgraph.star(4)
    assert g.neighbors(0) == [1, 2, 3]
    assert g.neighbors(2) == [0]


def test_disconnected_graph_is_rejected():
    with pytest.raises(Disconnected):
        netgraph.from_edges(4, [(0, 1), (2, 3)])


def test_disconnected_graph_allowed_without_check():
    g = netgraph.from_edges(4, [(0, 1), (2, 3)], check_connected=False)
    with pytest.raises(Disconnected):
        netgraph.spectrum(g)


@pytest.mark.parametrize(
    "edges",
    [
        [(0, 4)],
        [(1, 1)],
        [(0, 1), (1, 0)],
        [(0, 1, 2.0, 3.0)],
        [(0, 1, -1.0), (1, 2)],
    ],
)
def test_from_edges_rejects_bad_edges(edges):
    with pytest.raises(InvalidGraph):
        netgraph.from_edges(3, edges)


def test_from_adjacency():
    A = [[0, 1, 0], [1, 0, 2], [0, 2, 0]]
    g = netgraph.CommGraph.from_adjacency(A)
    assert g.node_count == 3
    assert g.edges() == [(0, 1, 1.0), (1, 2, 2.0)]
    assert np.array_equal(g.adjacency, np.array(A, dtype=float))


@pytest.mark.parametrize(
    "adjacency",
    [
        [[0, 1], [0, 0]],
        [[1, 1], [1, 0]],
        [[0, -1], [-1, 0]],
        [[0, 1, 0], [1, 0, 1]],
    ],
)
def test_from_adjacency_rejects_invalid(adjacency):
    with pytest.raises(InvalidGraph):
        netgraph.CommGraph.from_adjacency(adjacency)


def test_graph_is_immutable():
    g = netgraph.ring(4)
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = 5.0
    with pytest.raises(nx.NetworkXError):
        g.graph.add_edge(0, 2)


def test_directed_graph_is_rejected():
    with pytest.raises(InvalidGraph):
        netgraph.CommGraph(nx.DiGraph([(0, 1), (1, 0)]))


def test_generators_registry():
    assert set(netgraph.GRAPH_GENERATORS) == {"ring", "complete", "path", "star"}
    for make in netgraph.GRAPH_GENERATORS.values():
        assert netgraph.spectrum(make(4)).mu2 > 0


def _characteristic_polynomial(M):
    """Coefficients of det(sI - M), highest power first (Faddeev-LeVerrier)."""
    n = M.shape[0]
    coefficients = [1.0]
    N = np.eye(n)
    for k in range(1, n + 1):
        MN = M @ N
        c = -np.trace(MN) / k
        coefficients.append(c)
        N = MN + c * np.eye(n)
    return coefficients


def _connected_graphs(m):
    pairs = list(itertools.combinations(range(m), 2))
    for r in range(m - 1, len(pairs) + 1):
        for edges in itertools.combinations(pairs, r):
            g = nx.Graph(edges)
            g.add_nodes_from(range(m))
            if nx.is_connected(g):
                yield edges


@pytest.mark.parametrize("m", [2, 3, 4])
def test_spectrum_matches_characteristic_roots(m):
    count = 0
    for edges in _connected_graphs(m):
        g = netgraph.from_edges(m, edges)
        roots = np.roots(_characteristic_polynomial(netgraph.laplacian(g)))
        expected = np.sort(roots.real)
        assert np.allclose(netgraph.spectrum(g).mu, expected, atol=1e-4)
        count += 1
    # connected labelled graphs on 2, 3 and 4 nodes
    assert count == {2: 1, 3: 4, 4: 38}[m]
