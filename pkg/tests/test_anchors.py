"""Anchor coarsening: counts, clustering, feature averaging, mass conservation."""

import numpy as np
import pytest

from hyperevent.anchors import (
    anchor_adjacency,
    anchor_features,
    build_anchor_graph,
    choose_anchor_count,
    cluster_messages,
    map_back,
)


class TestAnchorCount:
    def test_ratio_rule(self):
        assert choose_anchor_count(2000, 20) == 100

    def test_floor_at_one(self):
        assert choose_anchor_count(5, 20) == 1

    def test_ceiling(self):
        assert choose_anchor_count(21, 20) == 2

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            choose_anchor_count(10, 0)


class TestClusterMessages:
    def test_m_equals_n_identity(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((6, 3))
        C = cluster_messages(X, 6, seed=1)
        assert np.array_equal(C, np.eye(6))

    def test_single_anchor(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((5, 3))
        C = cluster_messages(X, 1, seed=2)
        assert np.array_equal(C, np.ones((5, 1)))

    def test_two_blob_recovery(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((20, 4)) * 0.05 + np.array([3.0, 0, 0, 0])
        b = rng.standard_normal((20, 4)) * 0.05 - np.array([3.0, 0, 0, 0])
        X = np.vstack([a, b])
        C = cluster_messages(X, 2, seed=3)
        labels = C.argmax(axis=1)
        # brute-force nearest-centroid labeling at convergence
        cents = anchor_features(X, C)
        d2 = ((X[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
        assert np.array_equal(labels, d2.argmin(axis=1))
        assert len(set(labels[:20])) == 1 and len(set(labels[20:])) == 1
        assert labels[0] != labels[20]

    def test_rows_one_hot(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((30, 5))
        C = cluster_messages(X, 7, seed=4)
        assert np.allclose(C.sum(axis=1), 1.0)
        assert set(np.unique(C)) <= {0.0, 1.0}
        assert (C.sum(axis=0) > 0).all()

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((40, 6))
        C1 = cluster_messages(X, 8, seed=9)
        C2 = cluster_messages(X, 8, seed=9)
        assert np.array_equal(C1, C2)

    def test_duplicate_points_prune(self):
        X = np.zeros((5, 2))
        C = cluster_messages(X, 3, seed=0)
        assert C.shape[1] < 3  # coincident points cannot fill three anchors

    def test_m_too_large(self):
        with pytest.raises(ValueError):
            cluster_messages(np.zeros((3, 2)), 4, seed=0)


class TestAnchorFeatures:
    def test_singleton_passthrough(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        C = np.eye(2)
        assert np.allclose(anchor_features(X, C), X)

    def test_two_member_mean(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        C = np.ones((2, 1))
        assert np.allclose(anchor_features(X, C), [[0.5, 0.5]])

    def test_random_against_per_column_sums(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((10, 4))
        assign = rng.integers(0, 3, size=10)
        assign[:3] = [0, 1, 2]  # keep all columns nonempty
        C = np.zeros((10, 3))
        C[np.arange(10), assign] = 1.0
        feats = anchor_features(X, C)
        for u in range(3):
            members = assign == u
            assert np.allclose(feats[u], X[members].sum(axis=0) / members.sum())

    def test_empty_column_rejected(self):
        X = np.ones((2, 2))
        C = np.zeros((2, 2))
        C[:, 0] = 1.0
        with pytest.raises(ValueError):
            anchor_features(X, C)


class TestAnchorAdjacency:
    def test_identity_membership_fixed_point(self):
        rng = np.random.default_rng(6)
        A = rng.uniform(0, 1, size=(5, 5))
        A = 0.5 * (A + A.T)
        np.fill_diagonal(A, 0.0)
        coarse, intra = anchor_adjacency(A, np.eye(5))
        assert np.allclose(coarse, A)
        assert np.allclose(intra, 0.0)

    def test_single_anchor_total_mass(self):
        A = np.array([[0.0, 0.5], [0.5, 0.0]])
        coarse, intra = anchor_adjacency(A, np.ones((2, 1)))
        assert coarse.shape == (1, 1) and coarse[0, 0] == 0.0
        assert intra[0] == pytest.approx(A.sum())

    def test_hand_expansion(self):
        # anchors {0,1} and {2}; edges (0,2)=0.5, (1,2)=0.25, (0,1)=0.9
        A = np.zeros((3, 3))
        A[0, 2] = A[2, 0] = 0.5
        A[1, 2] = A[2, 1] = 0.25
        A[0, 1] = A[1, 0] = 0.9
        C = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        coarse, intra = anchor_adjacency(A, C)
        assert coarse[0, 1] == pytest.approx(0.75)
        assert intra[0] == pytest.approx(1.8)
        assert intra[1] == pytest.approx(0.0)

    def test_mass_conservation(self):
        rng = np.random.default_rng(7)
        A = rng.uniform(0, 1, size=(12, 12))
        A = 0.5 * (A + A.T)
        np.fill_diagonal(A, 0.0)
        C = np.zeros((12, 4))
        C[np.arange(12), rng.integers(0, 4, size=12)] = 1.0
        coarse, intra = anchor_adjacency(A, C)
        assert coarse.sum() + intra.sum() == pytest.approx(A.sum(), abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(8)
        A = rng.uniform(0, 1, size=(9, 9))
        A = 0.5 * (A + A.T)
        np.fill_diagonal(A, 0.0)
        C = np.zeros((9, 3))
        C[np.arange(9), rng.integers(0, 3, size=9)] = 1.0
        coarse, _ = anchor_adjacency(A, C)
        assert np.abs(coarse - coarse.T).max() <= 1e-12


class TestMapBack:
    def test_identity(self):
        labels = np.array([4, 7, 9])
        assert np.array_equal(map_back(labels, np.eye(3)), labels)

    def test_single_anchor_broadcast(self):
        C = np.ones((5, 1))
        assert np.array_equal(map_back(np.array([7]), C), np.full(5, 7))

    def test_random_against_row_lookup(self):
        rng = np.random.default_rng(9)
        assign = rng.integers(0, 4, size=15)
        assign[:4] = np.arange(4)
        C = np.zeros((15, 4))
        C[np.arange(15), assign] = 1.0
        labels = rng.integers(0, 100, size=4)
        out = map_back(labels, C)
        for i in range(15):
            assert out[i] == labels[assign[i]]


class TestBuildAnchorGraph:
    def test_identity_coarsening_fixed_point(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((5, 3))
        A = rng.uniform(0.1, 1, size=(5, 5))
        A = 0.5 * (A + A.T)
        np.fill_diagonal(A, 0.0)
        ag = build_anchor_graph(X, A, epsilon=1, seed=0)
        assert ag.anchor_count == 5
        assert np.allclose(ag.features, X)
        assert np.allclose(ag.adjacency, A)
        assert np.allclose(ag.membership, np.eye(5))
