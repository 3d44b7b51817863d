"""Classical measures of unweighted undirected graphs.

Characteristic path length averages shortest paths over mutually
reachable ordered pairs (and reports the component count alongside, so
disconnected graphs stay comparable); global efficiency averages
inverse distances with 1/inf = 0 over all ordered pairs; the clustering
coefficient averages per-node triangle density with C_i = 0 below
degree 2; sparsity counts directed edges over k(k-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .core import format_float
from .network import BinaryNetwork

__all__ = [
    "shortest_paths",
    "connected_components",
    "cpl",
    "global_efficiency",
    "clustering_coefficient",
    "sparsity",
    "MetricsReport",
    "metrics_report",
]


def shortest_paths(g: BinaryNetwork):
    """All-pairs hop distances via level-synchronous BFS; inf if unreachable."""
    k = g.k
    a = g.adjacency.astype(np.float64)
    dist = np.full((k, k), np.inf)
    np.fill_diagonal(dist, 0.0)
    reached = np.eye(k, dtype=bool)
    frontier = np.eye(k, dtype=bool)
    d = 0
    while frontier.any():
        d += 1
        nxt = ((frontier.astype(np.float64) @ a) > 0) & ~reached
        dist[nxt] = d
        reached |= nxt
        frontier = nxt
    return dist


def connected_components(g: BinaryNetwork) -> int:
    n, _ = _cc(sp.csr_matrix(g.adjacency), directed=False)
    return int(n)


def cpl(g: BinaryNetwork) -> float:
    """Mean shortest path over mutually reachable ordered pairs i != j."""
    if g.k < 2:
        raise ValueError("need at least 2 nodes")
    dist = shortest_paths(g)
    off = ~np.eye(g.k, dtype=bool)
    finite = off & np.isfinite(dist)
    if not finite.any():
        raise ValueError("no mutually reachable pair of nodes")
    return float(dist[finite].mean())


def global_efficiency(g: BinaryNetwork) -> float:
    """Mean inverse shortest path over all ordered pairs, 1/inf = 0."""
    if g.k < 2:
        raise ValueError("need at least 2 nodes")
    dist = shortest_paths(g)
    off = ~np.eye(g.k, dtype=bool)
    inv = np.zeros_like(dist)
    fin = off & np.isfinite(dist)
    inv[fin] = 1.0 / dist[fin]
    return float(inv[off].sum() / (g.k * (g.k - 1)))


def clustering_coefficient(g: BinaryNetwork) -> float:
    a = g.adjacency.astype(np.float64)
    deg = a.sum(axis=1)
    triangles = np.diag(a @ a @ a) / 2.0
    ci = np.zeros(g.k)
    ok = deg >= 2
    ci[ok] = 2.0 * triangles[ok] / (deg[ok] * (deg[ok] - 1.0))
    return float(ci.mean())


def sparsity(g: BinaryNetwork) -> float:
    """Directed edge count over k(k-1) for the graph as given."""
    if g.k < 2:
        raise ValueError("need at least 2 nodes")
    return float(g.adjacency.sum() / (g.k * (g.k - 1)))


@dataclass
class MetricsReport:
    n_nodes: int
    cpl: float
    e_global: float
    clustering: float
    sparsity: float
    n_components: int

    CSV_HEADER = "k,cpl,e_global,clustering,sparsity,n_components"

    def csv_row(self) -> str:
        return ",".join(
            [str(self.n_nodes)]
            + [format_float(x) for x in (self.cpl, self.e_global, self.clustering, self.sparsity)]
            + [str(self.n_components)]
        )


def metrics_report(g: BinaryNetwork) -> MetricsReport:
    return MetricsReport(
        n_nodes=g.k,
        cpl=cpl(g),
        e_global=global_efficiency(g),
        clustering=clustering_coefficient(g),
        sparsity=sparsity(g),
        n_components=connected_components(g),
    )
