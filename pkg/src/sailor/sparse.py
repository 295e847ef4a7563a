"""CSR adjacency helpers.

Adjacency matrices are scipy CSR matrices with float64 values, sorted
column indices and no explicit zeros. Binary symmetric adjacencies store
no self-loops; normalization adds them on the fly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def from_edges(n_nodes: int, edges) -> sp.csr_matrix:
    """Build a binary symmetric adjacency from an iterable of (u, v) pairs.

    Duplicate edges collapse to a single entry, self-loops are dropped.
    """
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
        raise ValueError("edge endpoint out of range")
    keep = edges[:, 0] != edges[:, 1]
    u, v = edges[keep, 0], edges[keep, 1]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    data = np.ones(rows.shape[0], dtype=np.float64)
    a = sp.coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    a.data[:] = 1.0
    a.sort_indices()
    return a


def edge_set(a: sp.csr_matrix) -> set[tuple[int, int]]:
    """Canonical (min, max) endpoint pairs of all stored edges."""
    coo = a.tocoo()
    return {(min(int(i), int(j)), max(int(i), int(j))) for i, j in zip(coo.row, coo.col)}


def edge_count(a: sp.csr_matrix) -> int:
    """Number of undirected edges (half the stored nonzeros)."""
    return a.nnz // 2


def is_symmetric(a: sp.csr_matrix, tol: float = 0.0) -> bool:
    diff = a - a.T
    if diff.nnz == 0:
        return True
    return bool(np.abs(diff.data).max() <= tol)


def neighbors(a: sp.csr_matrix, v: int) -> np.ndarray:
    return a.indices[a.indptr[v]:a.indptr[v + 1]]


def normalize_adjacency(a: sp.csr_matrix) -> sp.csr_matrix:
    """Self-loop augmented symmetric normalization of a binary adjacency.

    Adds the identity, then rescales entry (i, j) by 1/sqrt(d_i * d_j)
    where d are the row sums after the self-loop. An isolated node ends up
    with a single self-loop of weight 1.
    """
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    a_hat = (a + sp.identity(n, format="csr", dtype=np.float64)).tocsr()
    a_hat.sort_indices()
    deg = np.asarray(a_hat.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    out = (d @ a_hat @ d).tocsr()
    out.sort_indices()
    return out


def union(a: sp.csr_matrix, extra_edges) -> sp.csr_matrix:
    """Binary symmetric union of an adjacency with additional (u, v) pairs."""
    n = a.shape[0]
    extra = np.asarray(list(extra_edges), dtype=np.int64).reshape(-1, 2)
    if extra.size == 0:
        out = a.copy()
        out.sort_indices()
        return out
    rows = np.concatenate([a.tocoo().row, extra[:, 0], extra[:, 1]])
    cols = np.concatenate([a.tocoo().col, extra[:, 1], extra[:, 0]])
    keep = rows != cols
    data = np.ones(keep.sum(), dtype=np.float64)
    out = sp.coo_matrix((data, (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    out.data[:] = 1.0
    out.sort_indices()
    return out


def validate_csr(a: sp.csr_matrix) -> None:
    """Check the CSR invariants: monotone offsets, sorted columns, finite values."""
    indptr = a.indptr
    if np.any(np.diff(indptr) < 0):
        raise ValueError("CSR row offsets are not monotone")
    if not a.has_sorted_indices:
        raise ValueError("CSR column indices are not sorted")
    if not np.all(np.isfinite(a.data)):
        raise ValueError("CSR values contain NaN or Inf")
