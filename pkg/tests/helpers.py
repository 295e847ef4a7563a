"""Shared graph constructors for the test suite."""

from __future__ import annotations

import numpy as np

from sailor import sparse as sx
from sailor.graphs import AttributedGraph


def graph_from_edges(n, edges, labels, features=None, n_classes=None) -> AttributedGraph:
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    if features is None:
        features = np.eye(n, dtype=np.float64)
    g = AttributedGraph(
        n_nodes=n,
        adjacency=sx.from_edges(n, edges),
        features=np.asarray(features, dtype=np.float64),
        labels=labels,
        n_classes=n_classes,
    )
    g.validate()
    return g


def triangle_graph() -> AttributedGraph:
    return graph_from_edges(3, [(0, 1), (1, 2), (0, 2)], [0, 1, 0])


def path_graph(n: int, labels=None) -> AttributedGraph:
    if labels is None:
        labels = [i % 2 for i in range(n)]
    return graph_from_edges(n, [(i, i + 1) for i in range(n - 1)], labels)


def star_plus_ring(n_leaves: int = 10) -> AttributedGraph:
    """Hub 0 joined to every leaf, leaves joined in a cycle so dropping any
    hub edge cannot isolate a leaf."""
    edges = [(0, i) for i in range(1, n_leaves + 1)]
    edges += [(i, i % n_leaves + 1) for i in range(1, n_leaves + 1)]
    labels = [0] + [1] * n_leaves
    return graph_from_edges(n_leaves + 1, edges, labels)


def toy5_graph() -> AttributedGraph:
    """Five nodes, five edges, fixed dense features; small enough for dense
    oracles yet irregular enough to exercise every code path."""
    rng = np.random.default_rng(42)
    feats = rng.random((5, 4))
    return graph_from_edges(
        5,
        [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)],
        [0, 0, 1, 1, 0],
        features=feats,
    )


def random_connected_graph(rng: np.random.Generator, n_min: int = 8,
                           n_max: int = 40) -> AttributedGraph:
    """Random spanning tree plus extra edges: connected, no isolated nodes,
    arbitrary degree spread."""
    n = int(rng.integers(n_min, n_max + 1))
    c = int(rng.integers(2, 6))
    edges = [(i, int(rng.integers(0, i))) for i in range(1, n)]
    for _ in range(int(rng.integers(0, 2 * n))):
        u, v = int(rng.integers(0, n)), int(rng.integers(0, n))
        if u != v:
            edges.append((u, v))
    labels = rng.integers(0, c, size=n)
    feats = (rng.random((n, 6)) < 0.4).astype(np.float64)
    return graph_from_edges(n, edges, labels, features=feats, n_classes=c)
