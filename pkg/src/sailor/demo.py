"""Synthetic demo graph: homophilic, long-tailed, fully deterministic.

Nodes arrive one at a time and attach preferentially to high-degree nodes
of their own class, which yields a heavy-tailed degree distribution with
mostly same-label edges, i.e. the regime the augmentor targets. Features
are binary bags drawn mainly from a per-class slot block, so labels are
learnable from features alone.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from sailor.bundles import write_bundle
from sailor.graphs import AttributedGraph
from sailor.sparse import from_edges


def make_demo_graph(n_nodes: int = 300, n_classes: int = 3, seed: int = 7,
                    feat_block: int = 8, homophily: float = 0.9,
                    feats_per_node: int = 5) -> AttributedGraph:
    if n_nodes < 3 * n_classes:
        raise ValueError("need at least 3 nodes per class")
    if not 0.0 < homophily <= 1.0:
        raise ValueError("homophily must be in (0, 1]")
    rng = np.random.default_rng(seed)

    labels = np.array([v % n_classes for v in range(n_nodes)], dtype=np.int64)
    rng.shuffle(labels)

    # seed triangle keeps the early graph connected regardless of labels
    edges: list[tuple[int, int]] = [(0, 1), (1, 2), (0, 2)]
    deg = np.zeros(n_nodes, dtype=np.int64)
    deg[:3] = 2
    for v in range(3, n_nodes):
        # most nodes attach once; a minority attach 2-3 times -> long tail
        m = 1 + int(rng.random() < 0.25) + int(rng.random() < 0.1)
        targets: set[int] = set()
        for _ in range(m):
            same = rng.random() < homophily
            pool = np.flatnonzero(labels[:v] == labels[v]) if same else np.arange(v)
            pool = np.array([u for u in pool if u not in targets])
            if pool.size == 0:
                pool = np.array([u for u in range(v) if u not in targets])
            if pool.size == 0:
                break
            w = deg[pool] + 1.0
            u = int(rng.choice(pool, p=w / w.sum()))
            targets.add(u)
            edges.append((u, v))
            deg[u] += 1
            deg[v] += 1

    n_features = feat_block * n_classes
    features = np.zeros((n_nodes, n_features), dtype=np.float64)
    for v in range(n_nodes):
        block = labels[v] * feat_block
        slots = rng.choice(feat_block, size=min(feats_per_node, feat_block),
                           replace=False)
        features[v, block + slots] = 1.0
        features[v, rng.integers(n_features)] = 1.0

    g = AttributedGraph(
        n_nodes=n_nodes,
        adjacency=from_edges(n_nodes, edges),
        features=features,
        labels=labels,
        n_classes=n_classes,
    )
    g.validate()
    return g


def make_demo_masks(g: AttributedGraph, seed: int = 7,
                    train_per_class: int = 20, n_valid: int = 60) -> dict[str, np.ndarray]:
    """Public-style fixed masks: train_per_class per class, then a
    validation slab, then everything else as test. The quotas shrink on
    small graphs so validation and test stay nonempty."""
    rng = np.random.default_rng([seed, 1])
    order = rng.permutation(g.n_nodes)
    quota = min(train_per_class, max(1, g.n_nodes // (2 * g.n_classes)))
    train: list[int] = []
    taken = {c: 0 for c in range(g.n_classes)}
    for v in order:
        c = int(g.labels[v])
        if taken[c] < quota:
            taken[c] += 1
            train.append(int(v))
    rest = np.array([v for v in order if v not in set(train)], dtype=np.int64)
    n_valid = min(n_valid, rest.size // 2)
    return {
        "train": np.sort(np.array(train, dtype=np.int64)),
        "valid": np.sort(rest[:n_valid]),
        "test": np.sort(rest[n_valid:]),
    }


def write_demo_bundle(out_dir: str | Path, n_nodes: int = 300,
                      n_classes: int = 3, seed: int = 7) -> Path:
    g = make_demo_graph(n_nodes=n_nodes, n_classes=n_classes, seed=seed)
    masks = make_demo_masks(g, seed=seed)
    return write_bundle(g, out_dir, masks=masks)
