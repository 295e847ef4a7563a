"""Graph convolutional classifier and evaluation metrics.

Each layer diffuses features over the normalized adjacency and applies a
bias-free linear transformation. The adjacency is a constant: no gradient
flows through the graph structure, only through the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from sailor import autodiff as ad
from sailor.autodiff import Parameter, Tape, Tensor, glorot
from sailor.losses import cross_entropy_masked

_ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}


def diffuse_transform(tape: Tape, adj: sp.csr_matrix | None, p, w: Parameter) -> Tensor:
    """One A @ P @ W step; adj=None skips the diffusion step entirely.

    p may be a Tensor or a constant ndarray / sparse matrix. Constant
    inputs are diffused outside the tape and kept sparse when possible, so
    a bag-of-words first layer costs nnz work instead of a dense product.
    """
    if isinstance(p, Tensor):
        if adj is not None:
            p = ad.spmm(tape, adj, p)
        return ad.matmul(tape, p, w)
    x = p if adj is None else adj @ p
    if sp.issparse(x):
        return ad.spmm(tape, x.tocsr(), w)
    return ad.matmul(tape, ad.constant(np.asarray(x, dtype=np.float64)), w)


@dataclass
class GnnParams:
    """Stacked layer weights, input width F chaining down to C logits."""

    layers: list[Parameter]

    @classmethod
    def init(cls, n_features: int, n_classes: int, rng: np.random.Generator,
             hidden: int = 64, n_layers: int = 2):
        if n_layers < 1:
            raise ValueError(f"need at least one layer, got {n_layers}")
        dims = [n_features] + [hidden] * (n_layers - 1) + [n_classes]
        return cls(layers=[Parameter(glorot(rng, dims[i], dims[i + 1]))
                           for i in range(n_layers)])

    def parameters(self) -> list[Parameter]:
        return list(self.layers)

    def named(self) -> dict[str, Parameter]:
        return {f"gnn.layer{i}": w for i, w in enumerate(self.layers)}


def gcn_forward(tape: Tape, adj_norm: sp.csr_matrix, x, params: GnnParams,
                training: bool = False, dropout_rate: float = 0.5,
                rng: np.random.Generator | None = None,
                activation: str = "relu") -> Tensor:
    """Forward pass to raw logits. adj_norm must already be normalized.
    Dropout hits hidden activations only, and only when training."""
    act = _ACTIVATIONS[activation]
    h = x
    last = len(params.layers) - 1
    for i, w in enumerate(params.layers):
        h = diffuse_transform(tape, adj_norm, h, w)
        if i < last:
            h = act(tape, h)
            if training and dropout_rate > 0.0:
                if rng is None:
                    raise ValueError("training-mode dropout needs an rng")
                h = ad.dropout(tape, h, dropout_rate, rng)
    return h


def loss_sup(tape: Tape, logits: Tensor, labels: np.ndarray,
             train_mask: np.ndarray) -> Tensor:
    return cross_entropy_masked(tape, logits, labels, train_mask)


def _as_array(logits) -> np.ndarray:
    if isinstance(logits, Tensor):
        return logits.value
    return np.asarray(logits, dtype=np.float64)


def accuracy(logits, labels: np.ndarray, mask: np.ndarray) -> float:
    """Fraction of mask nodes whose argmax logit matches the label.
    np.argmax already resolves ties toward the smallest class id."""
    mask = np.asarray(mask)
    if mask.size == 0:
        raise ValueError("empty evaluation mask")
    pred = np.argmax(_as_array(logits)[mask], axis=1)
    return float(np.mean(pred == np.asarray(labels)[mask]))


def weighted_f1(logits, labels: np.ndarray, mask: np.ndarray) -> float:
    """Per-class F1 averaged with true-class support weights. A class with
    no predictions and no hits scores 0; classes absent from the true
    labels carry zero weight."""
    mask = np.asarray(mask)
    if mask.size == 0:
        raise ValueError("empty evaluation mask")
    pred = np.argmax(_as_array(logits)[mask], axis=1)
    true = np.asarray(labels)[mask]
    total = 0.0
    for c in np.unique(true):
        tp = np.sum((pred == c) & (true == c))
        fp = np.sum((pred == c) & (true != c))
        fn = np.sum((pred != c) & (true == c))
        support = tp + fn
        denom = 2 * tp + fp + fn
        f1 = (2 * tp / denom) if denom > 0 else 0.0
        total += (support / true.size) * f1
    return float(total)
