"""
Communication topology of the sensor / agent network.

A CommGraph is a connected, undirected, weighted graph. It is immutable after
construction; a different topology means a new graph.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from evsync.core.errors import Disconnected, InvalidGraph

logger = logging.getLogger("evsync.netgraph")

CONNECTIVITY_TOL = 1e-9

Edge = Union[Tuple[int, int], Tuple[int, int, float]]


class CommGraph:
    """Weighted undirected communication graph over nodes 0..m-1."""

    def __init__(self, graph: nx.Graph, check_connected: bool = True):
        """
        Args:
            graph: networkx graph whose nodes are exactly 0..m-1; edge weights
                are read from the ``weight`` attribute (default 1)
            check_connected: raise Disconnected if the graph is not connected
        """
        if graph.is_directed():
            raise InvalidGraph("communication graphs must be undirected")
        m = graph.number_of_nodes()
        if m < 1:
            raise InvalidGraph("graph must have at least one node")
        if sorted(graph.nodes) != list(range(m)):
            raise InvalidGraph(f"nodes must be labelled 0..{m - 1}")
        if nx.number_of_selfloops(graph) > 0:
            raise InvalidGraph("self loops are not allowed (a_ii must be 0)")
        for i, j, w in graph.edges(data="weight", default=1.0):
            if not math.isfinite(w) or w <= 0:
                raise InvalidGraph(
                    f"edge ({i}, {j}) has weight {w}; weights must be positive"
                )

        self._graph = nx.freeze(graph.copy())
        adjacency = nx.to_numpy_array(self._graph, nodelist=range(m), weight="weight")
        adjacency.setflags(write=False)
        self._adjacency = adjacency

        if check_connected and not nx.is_connected(self._graph):
            raise Disconnected(
                f"graph with {m} nodes has {nx.number_connected_components(self._graph)} "
                f"connected components"
            )

    @classmethod
    def from_adjacency(cls, adjacency, check_connected: bool = True) -> "CommGraph":
        A = np.asarray(adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidGraph(f"adjacency must be square, got shape {A.shape}")
        if not np.allclose(A, A.T, atol=0.0, rtol=0.0):
            raise InvalidGraph("adjacency must be symmetric (a_ij = a_ji)")
        if np.any(np.diag(A) != 0):
            raise InvalidGraph("adjacency diagonal must be zero")
        if np.any(A < 0) or not np.all(np.isfinite(A)):
            raise InvalidGraph("adjacency weights must be finite and nonnegative")
        g = nx.Graph()
        g.add_nodes_from(range(A.shape[0]))
        for i, j in zip(*np.nonzero(np.triu(A))):
            g.add_edge(int(i), int(j), weight=float(A[i, j]))
        return cls(g, check_connected)

    @property
    def node_count(self) -> int:
        return self._graph.number_of_nodes()

    @property
    def adjacency(self) -> np.ndarray:
        """Read-only m x m weight matrix."""
        return self._adjacency

    @property
    def graph(self) -> nx.Graph:
        """The frozen underlying networkx graph."""
        return self._graph

    def neighbors(self, i: int) -> List[int]:
        return sorted(j for j in self._graph.neighbors(i) if self._adjacency[i, j] > 0)

    def edges(self) -> List[Tuple[int, int, float]]:
        """Edge list (i < j) with weights, in a canonical order."""
        out = []
        for i, j, w in self._graph.edges(data="weight", default=1.0):
            a, b = min(i, j), max(i, j)
            out.append((a, b, float(w)))
        return sorted(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, CommGraph) and np.array_equal(
            self._adjacency, other._adjacency
        )

    def __repr__(self) -> str:
        return f"CommGraph(m={self.node_count}, edges={len(self.edges())})"


@dataclass(frozen=True)
class LaplacianSpectrum:
    """Sorted Laplacian eigenvalues 0 = mu_1 <= mu_2 <= ... <= mu_m."""

    mu: Tuple[float, ...]

    @property
    def mu2(self) -> float:
        """Algebraic connectivity; 0 for a single node."""
        return self.mu[1] if len(self.mu) > 1 else 0.0

    @property
    def mu_max(self) -> float:
        return self.mu[-1]


def laplacian(g: CommGraph) -> np.ndarray:
    """L = D - A with D the weighted degree matrix."""
    L = nx.laplacian_matrix(g.graph, nodelist=range(g.node_count), weight="weight")
    return np.asarray(L.toarray(), dtype=float)


def spectrum(g: CommGraph) -> LaplacianSpectrum:
    """
    Laplacian eigenvalues in ascending order.

    Raises:
        Disconnected: if mu_2 is not above the connectivity tolerance
    """
    mu = np.sort(np.linalg.eigvalsh(laplacian(g)))
    # the smallest eigenvalue is 0 up to rounding
    mu[0] = 0.0
    if g.node_count > 1 and mu[1] <= CONNECTIVITY_TOL:
        raise Disconnected(f"algebraic connectivity mu2 = {mu[1]:.3g} is not positive")
    return LaplacianSpectrum(mu=tuple(float(x) for x in mu))


def feasibility_threshold(spec: LaplacianSpectrum) -> float:
    """
    Largest Mahler measure the network can synchronize.

    Returns (1 + mu2/mum) / (1 - mu2/mum), or ``math.inf`` when mu2 == mum
    (complete-graph-like spectra) or the network is a single node.
    """
    if len(spec.mu) > 1 and spec.mu2 <= CONNECTIVITY_TOL:
        raise Disconnected(f"algebraic connectivity mu2 = {spec.mu2:.3g} is not positive")
    if len(spec.mu) == 1:
        return math.inf
    ratio = spec.mu2 / spec.mu_max
    if math.isclose(ratio, 1.0, rel_tol=1e-12, abs_tol=0.0):
        return math.inf
    return (1.0 + ratio) / (1.0 - ratio)


# Generators


def ring(m: int) -> CommGraph:
    if m < 3:
        return path(m)
    return CommGraph(nx.cycle_graph(m))


def complete(m: int) -> CommGraph:
    return CommGraph(nx.complete_graph(m))


def path(m: int) -> CommGraph:
    return CommGraph(nx.path_graph(m))


def star(m: int) -> CommGraph:
    """Star on m nodes with node 0 as the hub."""
    return CommGraph(nx.star_graph(m - 1)) if m > 1 else path(m)


def from_edges(m: int, edges: Iterable[Sequence], check_connected: bool = True) -> CommGraph:
    """
    Build a graph from an explicit edge list.

    Args:
        m: number of nodes
        edges: (i, j) pairs with unit weight or (i, j, w) triples
        check_connected: raise Disconnected if the result is not connected

    Returns:
        CommGraph
    """
    g = nx.Graph()
    g.add_nodes_from(range(m))
    for edge in edges:
        if len(edge) not in (2, 3):
            raise InvalidGraph(f"edge {edge!r} must be (i, j) or (i, j, weight)")
        i, j = int(edge[0]), int(edge[1])
        w = float(edge[2]) if len(edge) == 3 else 1.0
        if not (0 <= i < m and 0 <= j < m):
            raise InvalidGraph(f"edge ({i}, {j}) references a node outside 0..{m - 1}")
        if i == j:
            raise InvalidGraph(f"self loop on node {i}")
        if g.has_edge(i, j):
            raise InvalidGraph(f"duplicate edge ({i}, {j})")
        g.add_edge(i, j, weight=w)
    return CommGraph(g, check_connected)


GRAPH_GENERATORS = {
    "ring": ring,
    "complete": complete,
    "path": path,
    "star": star,
}
