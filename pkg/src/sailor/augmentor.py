"""Tail structure augmentor.

A variational graph-convolutional encoder and a linear encoder share the
same transformation weights. The augmentor is trained under three
constraints: reconstructing the original adjacency from a head-degraded
(forged) graph, classifying the fused encoder outputs on the training
nodes, and aligning its embeddings of the augmented graph with the
classifier's. New pseudo-homophilic edges are Bernoulli-sampled per tail
node from a row softmax over non-neighbors, then unioned with the original
adjacency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from sailor import autodiff as ad
from sailor import sparse as sx
from sailor.autodiff import Parameter, Tape, Tensor, glorot
from sailor.gcn import diffuse_transform
from sailor.graphs import AttributedGraph, NodePartition, degrees
from sailor.losses import _bce_block, cross_entropy_masked, \
    kl_categorical_rows, kl_gaussian_standard

_ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}


@dataclass
class AugmentorParams:
    """Shared encoder weights, the mu / sigma output heads (the sigma head
    produces log-variance; sigma = exp(logvar / 2)), and one pre-sigmoid
    structure weight per node."""

    encoder_layers: list[Parameter]
    mu_head: Parameter
    sigma_head: Parameter
    eps_raw: Parameter

    @classmethod
    def init(cls, n_nodes: int, n_features: int, n_classes: int,
             rng: np.random.Generator, hidden: int = 32, n_layers: int = 2):
        dims = [n_features] + [hidden] * n_layers
        layers = [Parameter(glorot(rng, dims[i], dims[i + 1])) for i in range(n_layers)]
        return cls(
            encoder_layers=layers,
            mu_head=Parameter(glorot(rng, hidden, n_classes)),
            sigma_head=Parameter(glorot(rng, hidden, n_classes)),
            eps_raw=Parameter(np.zeros(n_nodes)),
        )

    def parameters(self) -> list[Parameter]:
        return [*self.encoder_layers, self.mu_head, self.sigma_head, self.eps_raw]

    def named(self) -> dict[str, Parameter]:
        out = {f"aug.layer{i}": w for i, w in enumerate(self.encoder_layers)}
        out["aug.mu_head"] = self.mu_head
        out["aug.sigma_head"] = self.sigma_head
        out["aug.eps_raw"] = self.eps_raw
        return out


@dataclass
class ForgedGraph:
    """Head-degraded copy of the graph: a fraction of each head node's edges
    removed, never isolating a head node."""

    adjacency: sp.csr_matrix
    dropped_edges: list[tuple[int, int]]


@dataclass
class AugmentedGraph:
    """Original adjacency plus sampled pseudo-homophilic edges."""

    adjacency: sp.csr_matrix
    added_edges: list[tuple[int, int]]


def forge_tails(g: AttributedGraph, partition: NodePartition, delta: float,
                seed: int, max_attempts: int = 50) -> ForgedGraph:
    """Drop floor(delta * degree) incident edges per head node, chosen
    uniformly without replacement. Each head node keeps at least one edge;
    removals are symmetric. Deterministic per seed."""
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must be in [0, 1), got {delta}")
    deg = degrees(g)
    head = np.sort(partition.head_nodes)
    is_head = np.zeros(g.n_nodes, dtype=bool)
    is_head[head] = True
    # the 1e-9 nudge keeps exact rationals like 0.7*10 from flooring low
    quotas = {int(v): int(math.floor(delta * deg[v] + 1e-9)) for v in head}

    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        nbrs = [set(sx.neighbors(g.adjacency, v).tolist()) for v in range(g.n_nodes)]
        dropped: list[tuple[int, int]] = []
        ok = True
        for v in head:
            v = int(v)
            for _ in range(quotas[v]):
                if len(nbrs[v]) <= 1:
                    ok = False
                    break
                cands = sorted(u for u in nbrs[v] if not (is_head[u] and len(nbrs[u]) <= 1))
                if not cands:
                    ok = False
                    break
                u = cands[rng.integers(len(cands))]
                nbrs[v].discard(u)
                nbrs[u].discard(v)
                dropped.append((min(v, u), max(v, u)))
            if not ok:
                break
        if ok:
            edges = [(v, u) for v in range(g.n_nodes) for u in nbrs[v] if v < u]
            return ForgedGraph(adjacency=sx.from_edges(g.n_nodes, edges), dropped_edges=dropped)
    raise ValueError(
        f"could not satisfy forge quotas after {max_attempts} attempts "
        f"(delta={delta} too aggressive for the head-node subgraph)")


def vgcn_encode(tape: Tape, adj: sp.csr_matrix, x, params: AugmentorParams,
                mode: str = "sample", rng: np.random.Generator | None = None,
                noise: np.ndarray | None = None, activation: str = "relu"):
    """Graph-convolutional encoder: diffusion layers, then mu / sigma heads.
    mode="sample" draws P = mu + sigma * eps with standard Gaussian eps
    (pass noise to fix it); mode="mean" returns mu itself.

    Returns (P, mu, sigma)."""
    act = _ACTIVATIONS[activation]
    h = x
    for w in params.encoder_layers:
        h = act(tape, diffuse_transform(tape, adj, h, w))
    mu = ad.matmul(tape, h, params.mu_head)
    logvar = ad.matmul(tape, h, params.sigma_head)
    sigma = ad.exp(tape, ad.scale(tape, logvar, 0.5))
    if mode == "mean":
        return mu, mu, sigma
    if mode != "sample":
        raise ValueError(f"unknown encode mode {mode!r}")
    if noise is None:
        if rng is None:
            raise ValueError("sample mode needs an rng or an explicit noise matrix")
        noise = rng.standard_normal(mu.value.shape)
    p = ad.add(tape, mu, ad.mul(tape, sigma, ad.constant(noise)))
    return p, mu, sigma


def linear_encode(tape: Tape, x, params: AugmentorParams,
                  activation: str = "relu") -> Tensor:
    """Same weight stack as the graph encoder, mu head included, with no
    neighborhood aggregation anywhere."""
    act = _ACTIVATIONS[activation]
    h = x
    for w in params.encoder_layers:
        h = act(tape, diffuse_transform(tape, None, h, w))
    return ad.matmul(tape, h, params.mu_head)


def fuse(tape: Tape, p_l: Tensor, p_g: Tensor, eps: Tensor) -> Tensor:
    """Per-row convex combination eps * p_l + (1 - eps) * p_g."""
    if p_l.value.shape != p_g.value.shape:
        raise ValueError(f"fuse shape mismatch: {p_l.value.shape} vs {p_g.value.shape}")
    one_minus = ad.add_const(tape, ad.scale(tape, eps, -1.0), 1.0)
    return ad.add(tape, ad.mul_columns(tape, p_l, eps), ad.mul_columns(tape, p_g, one_minus))


def loss_aug(tape: Tape, g: AttributedGraph, forged: ForgedGraph,
             params: AugmentorParams, rng: np.random.Generator | None = None,
             noise: np.ndarray | None = None, batch_size: int = 512,
             activation: str = "relu",
             a1_norm: sp.csr_matrix | None = None) -> Tensor:
    """Reconstruction constraint: encode the forged graph (sampled latents),
    decode edge probabilities in row batches, score them against the
    original adjacency, plus the Gaussian prior KL."""
    if a1_norm is None:
        a1_norm = sx.normalize_adjacency(forged.adjacency)
    p1, mu, sigma = vgcn_encode(tape, a1_norm, g.features_csr(), params,
                                mode="sample", rng=rng, noise=noise,
                                activation=activation)
    n = g.n_nodes
    denom = n * n - n
    p1_t = ad.transpose(tape, p1)
    total = None
    for start in range(0, n, batch_size):
        rows = np.arange(start, min(start + batch_size, n))
        block = ad.matmul(tape, ad.row_slice(tape, p1, rows), p1_t)
        probs = ad.sigmoid(tape, block)
        target = np.asarray(g.adjacency[rows].todense(), dtype=np.float64)
        term = _bce_block(tape, probs, target, rows, denom)
        total = term if total is None else ad.add(tape, total, term)
    return ad.add(tape, total, kl_gaussian_standard(tape, mu, sigma))


def fused_embeddings(tape: Tape, g: AttributedGraph, adj_norm: sp.csr_matrix,
                     params: AugmentorParams, activation: str = "relu") -> Tensor:
    """P2: mean-mode graph encoding and linear encoding fused per node by
    the squashed structure weights."""
    p_g, _, _ = vgcn_encode(tape, adj_norm, g.features_csr(), params,
                            mode="mean", activation=activation)
    p_l = linear_encode(tape, g.features_csr(), params, activation=activation)
    eps = ad.sigmoid(tape, params.eps_raw)
    return fuse(tape, p_l, p_g, eps)


def loss_p(tape: Tape, g: AttributedGraph, adj_norm: sp.csr_matrix,
           params: AugmentorParams, train_mask: np.ndarray,
           activation: str = "relu"):
    """Propagation constraint: cross-entropy of the fused graph/linear
    embeddings on the training nodes. Returns (loss, P2)."""
    p2 = fused_embeddings(tape, g, adj_norm, params, activation=activation)
    loss = cross_entropy_masked(tape, p2, g.labels, train_mask)
    return loss, p2


def loss_ali(tape: Tape, a2: sp.csr_matrix, g: AttributedGraph,
             params: AugmentorParams, z2_prior: np.ndarray,
             rng: np.random.Generator | None = None,
             noise: np.ndarray | None = None, activation: str = "relu",
             a2_norm: sp.csr_matrix | None = None) -> Tensor:
    """Alignment constraint: KL from the sampled encoding of the augmented
    graph to the classifier's logits, which act as a fixed prior."""
    if a2_norm is None:
        a2_norm = sx.normalize_adjacency(a2)
    z1, _, _ = vgcn_encode(tape, a2_norm, g.features_csr(), params,
                           mode="sample", rng=rng, noise=noise,
                           activation=activation)
    return kl_categorical_rows(tape, z1, np.asarray(z2_prior, dtype=np.float64))


def sample_augmented_edges(p2: np.ndarray, g: AttributedGraph,
                           partition: NodePartition, batch_size: int,
                           seed: int, rounds: int = 1) -> AugmentedGraph:
    """Bernoulli-sample new edges for tail nodes from row softmaxes of
    P2 @ P2^T, with self and existing-edge columns masked out, and union
    them with the original adjacency. Deterministic per seed."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    p2 = np.asarray(p2, dtype=np.float64)
    rng = np.random.default_rng([seed])
    tail = np.sort(partition.tail_nodes)
    a = g.adjacency
    added: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for _ in range(rounds):
        for start in range(0, tail.size, batch_size):
            batch = tail[start:start + batch_size]
            scores = p2[batch] @ p2.T
            for j, u in enumerate(batch):
                cols = sx.neighbors(a, int(u))
                scores[j, cols] = -np.inf
                scores[j, u] = -np.inf
            finite = np.isfinite(scores)
            live = finite.any(axis=1)
            probs = np.zeros_like(scores)
            if live.any():
                shifted = np.where(finite, scores, -np.inf)
                m = np.max(shifted[live], axis=1, keepdims=True)
                e = np.exp(shifted[live] - m)
                probs[live] = e / e.sum(axis=1, keepdims=True)
            draws = rng.random(scores.shape)
            hit_rows, hit_cols = np.nonzero(draws < probs)
            for j, v in zip(hit_rows, hit_cols):
                u = int(batch[j])
                key = (min(u, int(v)), max(u, int(v)))
                if key not in seen:
                    seen.add(key)
                    added.append(key)
    added.sort()
    return AugmentedGraph(adjacency=sx.union(a, added), added_edges=added)
