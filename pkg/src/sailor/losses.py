"""Differentiable loss primitives used by the augmentor and the classifier."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from sailor.autodiff import Tape, Tensor, _out

# saturated probabilities are clipped before any log to keep losses finite
PROB_CLIP = 1e-7


def log_softmax_np(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_np(x: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax_np(x))


def cross_entropy_masked(tape: Tape, logits: Tensor, labels: np.ndarray,
                         mask: np.ndarray) -> Tensor:
    """Mean negative log softmax probability of the true class over mask rows."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("cross_entropy_masked: empty mask")
    labels = np.asarray(labels, dtype=np.int64)
    rows = logits.value[mask]
    lp = log_softmax_np(rows)
    picked = lp[np.arange(mask.size), labels[mask]]
    value = -picked.mean()

    def build(out):
        def backward():
            p = np.exp(lp)
            p[np.arange(mask.size), labels[mask]] -= 1.0
            g = np.zeros_like(logits.value)
            np.add.at(g, mask, p / mask.size)
            logits.grad += out.grad * g
        return backward

    return _out(tape, value, (logits,), build)


def _bce_block(tape: Tape, probs: Tensor, target: np.ndarray, rows: np.ndarray,
               denom: int) -> Tensor:
    """Binary cross-entropy of a block of adjacency rows against its dense
    target, diagonal entries excluded, summed and divided by denom."""
    rows = np.asarray(rows, dtype=np.int64)
    b, n = probs.value.shape
    p = np.clip(probs.value, PROB_CLIP, 1.0 - PROB_CLIP)
    terms = -(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    local = np.arange(b)
    terms[local, rows] = 0.0
    value = terms.sum() / denom

    def build(out):
        def backward():
            interior = (probs.value > PROB_CLIP) & (probs.value < 1.0 - PROB_CLIP)
            g = -(target / p - (1.0 - target) / (1.0 - p)) / denom
            g[local, rows] = 0.0
            probs.grad += out.grad * np.where(interior, g, 0.0)
        return backward

    return _out(tape, value, (probs,), build)


def bce_adjacency(tape: Tape, probs: Tensor, target: sp.csr_matrix) -> Tensor:
    """Mean binary cross-entropy of an N x N probability matrix against the
    dense view of a binary adjacency, diagonal excluded. Probabilities are
    clipped to [1e-7, 1 - 1e-7]."""
    n = probs.value.shape[0]
    if probs.value.ndim != 2 or probs.value.shape[1] != n:
        raise ValueError(f"bce_adjacency expects a square matrix, got {probs.value.shape}")
    if target.shape != (n, n):
        raise ValueError(f"bce_adjacency target shape {target.shape} != {(n, n)}")
    dense = np.asarray(target.todense(), dtype=np.float64)
    return _bce_block(tape, probs, dense, np.arange(n), n * n - n)


def kl_gaussian_standard(tape: Tape, mu: Tensor, sigma: Tensor) -> Tensor:
    """KL divergence of N(mu, diag(sigma^2)) rows from the standard Gaussian,
    summed over latent dims and averaged over rows:
    (1/N) * sum(-0.5 * (1 + 2 log sigma - mu^2 - sigma^2))."""
    if mu.value.shape != sigma.value.shape:
        raise ValueError(f"kl_gaussian shape mismatch: {mu.value.shape} vs {sigma.value.shape}")
    n = mu.value.shape[0]
    value = -0.5 * np.sum(1.0 + 2.0 * np.log(sigma.value)
                          - mu.value ** 2 - sigma.value ** 2) / n

    def build(out):
        def backward():
            if mu.requires_grad:
                mu.grad += out.grad * mu.value / n
            if sigma.requires_grad:
                sigma.grad += out.grad * (sigma.value - 1.0 / sigma.value) / n
        return backward

    return _out(tape, value, (mu, sigma), build)


def kl_categorical_rows(tape: Tape, p_logits: Tensor, q_logits) -> Tensor:
    """Mean over rows of KL(softmax(p_logits) || softmax(q_logits)). The q
    side is a fixed prior: no gradient flows to it. q probabilities are
    floored at 1e-7 before the log."""
    q_value = q_logits.value if isinstance(q_logits, Tensor) else np.asarray(q_logits)
    if p_logits.value.shape != q_value.shape:
        raise ValueError(f"kl_categorical shape mismatch: {p_logits.value.shape} vs {q_value.shape}")
    n = p_logits.value.shape[0]
    lp = log_softmax_np(p_logits.value)
    lq = np.log(np.maximum(softmax_np(q_value), PROB_CLIP))
    p = np.exp(lp)
    row_kl = np.sum(p * (lp - lq), axis=1)
    value = row_kl.mean()

    def build(out):
        def backward():
            # d/dx_k of sum_c p_c (lp_c - lq_c) = p_k ((lp_k - lq_k) - row_kl)
            g = p * ((lp - lq) - row_kl[:, None]) / n
            p_logits.grad += out.grad * g
        return backward

    return _out(tape, value, (p_logits,), build)
