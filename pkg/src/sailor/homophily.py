"""Node-level homophily and total-heterophily diagnostics.

A node's homophily is the fraction of its neighbors sharing its label; a
total-heterophilic node shares its label with none of its neighbors. Low
degree makes total heterophily more likely: under uniformly random labels
the probability is ((C-1)/C)^degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from sailor.graphs import AttributedGraph, NodePartition


@dataclass
class HomophilyReport:
    per_node_homophily: np.ndarray
    head_total_het_count: int
    tail_total_het_count: int
    head_total_het_prop: float
    tail_total_het_prop: float
    homophily_cdf: dict[str, list[tuple[float, float]]]


def node_homophily(g: AttributedGraph, v: int) -> float:
    """Fraction of v's neighbors with the same label as v. Undefined for
    isolated nodes (preprocessing guarantees none remain)."""
    a = g.adjacency
    nbrs = a.indices[a.indptr[v]:a.indptr[v + 1]]
    if nbrs.size == 0:
        raise ValueError(f"node {v} is isolated; homophily is undefined")
    return float(np.mean(g.labels[nbrs] == g.labels[v]))


def per_node_homophily(g: AttributedGraph) -> np.ndarray:
    """Vectorized node homophily for all nodes; isolated nodes get NaN."""
    a = g.adjacency
    deg = np.diff(a.indptr)
    rows = np.repeat(np.arange(g.n_nodes), deg)
    same = (g.labels[a.indices] == g.labels[rows]).astype(np.float64)
    sums = np.bincount(rows, weights=same, minlength=g.n_nodes)
    out = np.full(g.n_nodes, np.nan)
    nz = deg > 0
    out[nz] = sums[nz] / deg[nz]
    return out


def homophily_cdf(values: np.ndarray) -> list[tuple[float, float]]:
    """Empirical CDF as (value, cumulative density) steps; ends at 1.0."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    n = values.size
    if n == 0:
        return []
    uniq, counts = np.unique(values, return_counts=True)
    cum = np.cumsum(counts) / n
    return list(zip(uniq.tolist(), cum.tolist()))


def cdf_at(cdf: list[tuple[float, float]], x: float) -> float:
    """Evaluate a step CDF at x (right-continuous)."""
    y = 0.0
    for value, density in cdf:
        if value <= x:
            y = density
        else:
            break
    return y


def heterophily_report(g: AttributedGraph, partition: NodePartition) -> HomophilyReport:
    hom = per_node_homophily(g)
    head, tail = partition.head_nodes, partition.tail_nodes
    head_count = int(np.sum(hom[head] == 0.0))
    tail_count = int(np.sum(hom[tail] == 0.0))
    return HomophilyReport(
        per_node_homophily=hom,
        head_total_het_count=head_count,
        tail_total_het_count=tail_count,
        head_total_het_prop=head_count / head.size if head.size else 0.0,
        tail_total_het_prop=tail_count / tail.size if tail.size else 0.0,
        homophily_cdf={
            "head": homophily_cdf(hom[head]),
            "tail": homophily_cdf(hom[tail]),
        },
    )


def expected_total_het_prob(c: int, d: int) -> float:
    """Probability that a degree-d node shares its label with none of its
    neighbors when labels are uniform over c classes: ((c-1)/c)^d."""
    if c < 2:
        raise ValueError(f"need at least 2 classes, got {c}")
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {d}")
    return ((c - 1) / c) ** d
