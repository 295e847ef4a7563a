"""Graph representation, preprocessing, head/tail partitioning and splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from sailor import sparse as sx

TAIL_FRACTION = 0.8
VALID_TO_TEST = (1, 4)


@dataclass
class AttributedGraph:
    """Undirected attributed graph: binary symmetric adjacency without stored
    self-loops, dense float64 features, one class label per node."""

    n_nodes: int
    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def validate(self) -> None:
        a = self.adjacency
        if a.shape != (self.n_nodes, self.n_nodes):
            raise ValueError(f"adjacency shape {a.shape} != ({self.n_nodes}, {self.n_nodes})")
        sx.validate_csr(a)
        if a.nnz and not np.all(a.data == 1.0):
            raise ValueError("adjacency entries must be 0/1")
        if a.diagonal().sum() != 0:
            raise ValueError("adjacency stores self-loops")
        if not sx.is_symmetric(a):
            raise ValueError("adjacency is not symmetric")
        if self.features.shape[0] != self.n_nodes:
            raise ValueError(f"{self.features.shape[0]} feature rows for {self.n_nodes} nodes")
        if self.labels.shape[0] != self.n_nodes:
            raise ValueError(f"{self.labels.shape[0]} labels for {self.n_nodes} nodes")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("label outside [0, n_classes)")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or Inf")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_edges(self) -> int:
        """Undirected edge count (each edge stored twice in the adjacency)."""
        return self.adjacency.nnz // 2

    def features_csr(self) -> sp.csr_matrix:
        """Sparse view of the features, cached; cheap to multiply when the
        feature matrix is mostly zeros (bag-of-words style)."""
        if not hasattr(self, "_features_csr"):
            self._features_csr = sp.csr_matrix(self.features)
        return self._features_csr


@dataclass
class NodePartition:
    """Degree-based head/tail division: tail nodes have degree at or below
    the threshold, head nodes above it."""

    tail_nodes: np.ndarray
    head_nodes: np.ndarray
    degree_threshold: int

    @property
    def n_tail(self) -> int:
        return self.tail_nodes.size

    @property
    def n_head(self) -> int:
        return self.head_nodes.size

    def is_tail(self, n_nodes: int) -> np.ndarray:
        mask = np.zeros(n_nodes, dtype=bool)
        mask[self.tail_nodes] = True
        return mask


@dataclass
class DatasetSplit:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    mode: str = "tail-protocol"

    def validate(self, n_nodes: int) -> None:
        sets = [set(self.train.tolist()), set(self.valid.tolist()), set(self.test.tolist())]
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise ValueError("split sets overlap")
        for ids in (self.train, self.valid, self.test):
            if ids.size and (ids.min() < 0 or ids.max() >= n_nodes):
                raise ValueError("split references node id out of range")


def degrees(g: AttributedGraph) -> np.ndarray:
    return np.asarray(g.adjacency.sum(axis=1)).ravel().astype(np.int64)


def preprocess(g: AttributedGraph) -> AttributedGraph:
    """Symmetrize and restrict to the largest connected component, with node
    ids compacted to [0, N') preserving original order. Ties between equal
    sized components go to the one containing the smallest original id.
    Idempotent."""
    if g.n_nodes == 0:
        raise ValueError("cannot preprocess an empty graph")
    a = g.adjacency.maximum(g.adjacency.T).tocsr()
    a.setdiag(0)
    a.eliminate_zeros()
    a.sort_indices()

    n_comp, comp = connected_components(a, directed=False)
    sizes = np.bincount(comp, minlength=n_comp)
    best = sizes.max()
    # smallest original id among nodes of max-size components picks the winner
    candidates = np.flatnonzero(sizes == best)
    uniq, first_idx = np.unique(comp, return_index=True)
    first_member = np.empty(n_comp, dtype=np.int64)
    first_member[uniq] = first_idx
    winner = candidates[np.argmin(first_member[candidates])]

    keep = np.flatnonzero(comp == winner)
    sub = a[keep][:, keep].tocsr()
    sub.sort_indices()
    out = AttributedGraph(
        n_nodes=keep.size,
        adjacency=sub,
        features=g.features[keep],
        labels=g.labels[keep],
        n_classes=g.n_classes,
    )
    out.validate()
    return out


def pareto_split(g: AttributedGraph) -> NodePartition:
    """Accumulate node counts over distinct degrees in ascending order; the
    first degree pushing the cumulative count strictly past 80% of N becomes
    the threshold, and every node at or below it is tail."""
    deg = degrees(g)
    cutoff = TAIL_FRACTION * g.n_nodes
    cumulative = 0
    threshold = int(deg.max()) if deg.size else 0
    for d in np.unique(deg):
        cumulative += int((deg == d).sum())
        if cumulative > cutoff:
            threshold = int(d)
            break
    tail = np.flatnonzero(deg <= threshold)
    head = np.flatnonzero(deg > threshold)
    return NodePartition(tail_nodes=tail, head_nodes=head, degree_threshold=threshold)


def make_splits(g: AttributedGraph, partition: NodePartition | None, mode: str,
                seed: int, masks: dict[str, np.ndarray] | None = None) -> DatasetSplit:
    """Tail-protocol: all head nodes train; tail nodes are shuffled by seed an
    split 1:4 into validation and test. Public: masks from the bundle verbatim."""
    if mode == "tail-protocol":
        if partition is None:
            raise ValueError("tail-protocol split needs a partition")
        rng = np.random.default_rng(seed)
        tail = partition.tail_nodes[rng.permutation(partition.n_tail)]
        n_valid = partition.n_tail * VALID_TO_TEST[0] // sum(VALID_TO_TEST)
        split = DatasetSplit(
            train=np.sort(partition.head_nodes),
            valid=np.sort(tail[:n_valid]),
            test=np.sort(tail[n_valid:]),
            mode=mode,
        )
    elif mode == "public":
        if not masks:
            raise ValueError("public split requires masks.tsv in the bundle")
        split = DatasetSplit(
            train=np.sort(masks["train"]),
            valid=np.sort(masks["valid"]),
            test=np.sort(masks["test"]),
            mode=mode,
        )
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    split.validate(g.n_nodes)
    return split
