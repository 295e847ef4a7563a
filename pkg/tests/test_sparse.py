"""CSR helpers: construction, symmetry, normalization identities."""

import numpy as np
import pytest
import scipy.sparse as sp

from sailor import sparse as sx


def complete_graph_edges(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


class TestFromEdges:
    def test_builds_symmetric_binary(self):
        a = sx.from_edges(4, [(0, 1), (2, 3), (1, 0)])
        assert sx.is_symmetric(a)
        assert a.nnz == 4
        assert np.all(a.data == 1.0)
        assert a.diagonal().sum() == 0

    def test_deduplicates_and_drops_self_loops(self):
        a = sx.from_edges(3, [(0, 1), (1, 0), (0, 1), (2, 2)])
        assert sx.edge_count(a) == 1
        assert a.diagonal().sum() == 0

    def test_empty_edge_list(self):
        a = sx.from_edges(3, [])
        assert a.shape == (3, 3)
        assert a.nnz == 0

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            sx.from_edges(3, [(0, 3)])
        with pytest.raises(ValueError):
            sx.from_edges(3, [(-1, 0)])


class TestEdgeSetAndCount:
    def test_edge_set_canonical_pairs(self):
        a = sx.from_edges(4, [(2, 0), (1, 3)])
        assert sx.edge_set(a) == {(0, 2), (1, 3)}

    def test_edge_count_halves_nnz(self):
        a = sx.from_edges(5, complete_graph_edges(5))
        assert sx.edge_count(a) == 10
        assert a.nnz == 20


class TestNeighbors:
    def test_sorted_neighbor_list(self):
        a = sx.from_edges(5, [(2, 4), (2, 0), (2, 1)])
        assert sx.neighbors(a, 2).tolist() == [0, 1, 4]
        assert sx.neighbors(a, 3).tolist() == []


class TestIsSymmetric:
    def test_detects_asymmetry(self):
        m = sp.csr_matrix(np.array([[0, 1.0], [0, 0]]))
        assert not sx.is_symmetric(m)
        assert sx.is_symmetric(sx.from_edges(2, [(0, 1)]))


class TestNormalizeAdjacency:
    def test_single_node(self):
        a = sx.from_edges(1, [])
        n = sx.normalize_adjacency(a)
        assert np.array_equal(np.asarray(n.todense()), [[1.0]])

    def test_two_node_clique(self):
        # entries come from (1/sqrt(2))^2, one ulp off the rational value
        n = sx.normalize_adjacency(sx.from_edges(2, [(0, 1)]))
        assert np.allclose(np.asarray(n.todense()), np.full((2, 2), 0.5), atol=1e-15)

    def test_triangle_entries(self):
        n = sx.normalize_adjacency(sx.from_edges(3, complete_graph_edges(3)))
        assert np.allclose(np.asarray(n.todense()), np.full((3, 3), 1 / 3), atol=1e-15)

    def test_row_sums_regular_graphs(self):
        # on d-regular graphs every row sums to one; exact when sqrt(d + 1)
        # is representable (K4: sqrt(4) = 2), within an ulp otherwise
        k4 = sx.normalize_adjacency(sx.from_edges(4, complete_graph_edges(4)))
        assert np.array_equal(np.asarray(k4.sum(axis=1)).ravel(), np.ones(4))
        c5 = sx.normalize_adjacency(sx.from_edges(5, [(i, (i + 1) % 5) for i in range(5)]))
        sums = np.asarray(c5.sum(axis=1)).ravel()
        assert np.all(np.abs(sums - 1.0) < 1e-12)

    def test_output_symmetric(self, rng):
        edges = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 4)]
        n = sx.normalize_adjacency(sx.from_edges(5, edges))
        dense = np.asarray(n.todense())
        assert np.allclose(dense, dense.T, atol=1e-15)

    def test_isolated_node_keeps_unit_self_loop(self):
        a = sx.from_edges(3, [(0, 1)])
        n = np.asarray(sx.normalize_adjacency(a).todense())
        assert n[2, 2] == 1.0
        assert np.all(n[2, :2] == 0) and np.all(n[:2, 2] == 0)

    def test_hand_star_values(self):
        # star with center 0 and two leaves: deg+1 = (3, 2, 2)
        n = np.asarray(sx.normalize_adjacency(sx.from_edges(3, [(0, 1), (0, 2)])).todense())
        assert abs(n[0, 0] - 1 / 3) < 1e-15
        assert abs(n[0, 1] - 1 / np.sqrt(6)) < 1e-15
        assert abs(n[1, 1] - 0.5) < 1e-15
        assert n[1, 2] == 0.0


class TestUnion:
    def test_adds_symmetric_pairs(self):
        a = sx.from_edges(4, [(0, 1)])
        u = sx.union(a, [(2, 3)])
        assert sx.edge_set(u) == {(0, 1), (2, 3)}
        assert sx.is_symmetric(u)
        assert np.all(u.data == 1.0)

    def test_existing_edges_stay_binary(self):
        a = sx.from_edges(3, [(0, 1)])
        u = sx.union(a, [(0, 1), (1, 0), (1, 2)])
        assert sx.edge_set(u) == {(0, 1), (1, 2)}
        assert np.all(u.data == 1.0)

    def test_empty_addition_is_copy(self):
        a = sx.from_edges(3, [(0, 2)])
        u = sx.union(a, [])
        assert sx.edge_set(u) == sx.edge_set(a)

    def test_drops_self_pairs(self):
        a = sx.from_edges(3, [(0, 1)])
        u = sx.union(a, [(2, 2)])
        assert sx.edge_set(u) == {(0, 1)}


class TestValidateCsr:
    def test_accepts_canonical(self):
        sx.validate_csr(sx.from_edges(3, [(0, 1), (1, 2)]))

    def test_rejects_non_finite_values(self):
        m = sp.csr_matrix(np.array([[0.0, np.inf], [np.inf, 0.0]]))
        with pytest.raises(ValueError):
            sx.validate_csr(m)

    def test_rejects_unsorted_indices(self):
        m = sp.csr_matrix((np.ones(2), np.array([2, 0]), np.array([0, 2, 2, 2])),
                          shape=(3, 3))
        with pytest.raises(ValueError):
            sx.validate_csr(m)
