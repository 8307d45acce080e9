"""Structural-entropy values against hand evaluation and exhaustive search."""

import math

import numpy as np
import pytest

from hyperevent.graph_entropy import (
    GraphError,
    HardTree,
    WeightedGraph,
    brute_force_optimal_tree,
    one_dim_se,
    structural_info_hard,
)


def cycle4():
    return WeightedGraph(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)])


def two_disjoint_edges():
    return WeightedGraph(4, [(0, 1, 1.0), (2, 3, 1.0)])


def random_graph(rng, n, p=0.7):
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.uniform() < p:
                edges.append((i, j, float(rng.uniform(0.1, 2.0))))
    if not edges:
        edges = [(0, 1, 1.0)]
    return WeightedGraph(n, edges)


class TestWeightedGraph:
    def test_degrees_and_volume(self):
        g = WeightedGraph(3, [(0, 1, 0.5), (1, 2, 1.5)])
        assert np.allclose(g.degrees, [0.5, 2.0, 1.5])
        assert g.volume == pytest.approx(4.0)

    def test_rejects_bad_edges(self):
        with pytest.raises(GraphError):
            WeightedGraph(3, [(0, 0, 1.0)])
        with pytest.raises(GraphError):
            WeightedGraph(3, [(0, 1, -1.0)])
        with pytest.raises(GraphError):
            WeightedGraph(3, [(0, 1, 1.0), (1, 0, 2.0)])
        with pytest.raises(GraphError):
            WeightedGraph(3, [(0, 5, 1.0)])

    def test_adjacency_roundtrip(self):
        g = cycle4()
        g2 = WeightedGraph.from_adjacency(g.to_adjacency())
        # edge order may differ between the two constructions
        assert sorted(zip(g2.i, g2.j, g2.w)) == sorted(zip(g.i, g.j, g.w))

    def test_text_roundtrip(self, tmp_path):
        g = WeightedGraph(5, [(0, 3, 0.123456789), (1, 4, 2.5)])
        path = tmp_path / "g.txt"
        g.write_text(path)
        g2 = WeightedGraph.read_text(path)
        assert g2.node_count == 5
        assert np.array_equal(g2.i, g.i)
        assert np.array_equal(g2.w, g.w)

    def test_text_format_shape(self, tmp_path):
        path = tmp_path / "g.txt"
        WeightedGraph(2, [(0, 1, 1.0)]).write_text(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "2 1"
        assert lines[1].split()[:2] == ["0", "1"]


class TestOneDimSE:
    def test_four_cycle(self):
        assert one_dim_se(cycle4()) == pytest.approx(2.0, abs=1e-12)

    def test_single_edge_any_weight(self):
        for w in (1.0, 0.25, 7.5):
            g = WeightedGraph(2, [(0, 1, w)])
            assert one_dim_se(g) == pytest.approx(1.0, abs=1e-12)

    def test_star_k13(self):
        g = WeightedGraph(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
        expected = -(0.5 * math.log2(0.5) + 3 * (1 / 6) * math.log2(1 / 6))
        assert one_dim_se(g) == pytest.approx(expected, abs=1e-12)
        assert one_dim_se(g) == pytest.approx(1.7924812503605778, abs=1e-6)

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(0)
        g = random_graph(rng, 6)
        scaled = WeightedGraph(6, zip(g.i, g.j, g.w * 13.7))
        assert one_dim_se(scaled) == pytest.approx(one_dim_se(g), abs=1e-12)

    def test_isolated_nodes_contribute_zero(self):
        g = WeightedGraph(4, [(0, 1, 1.0)])
        assert one_dim_se(g) == pytest.approx(1.0, abs=1e-12)

    def test_empty_graph_rejected(self):
        with pytest.raises(GraphError):
            one_dim_se(WeightedGraph(3, []))

    def test_regular_graph_hits_log_n(self):
        assert one_dim_se(cycle4()) == pytest.approx(math.log2(4), abs=1e-12)


class TestStructuralInfoHard:
    def test_component_clusters_one_bit(self):
        g = two_disjoint_edges()
        tree = HardTree.two_level(4, [0, 0, 1, 1])
        assert structural_info_hard(g, tree) == pytest.approx(1.0, abs=1e-12)

    def test_single_cluster_two_bits(self):
        g = two_disjoint_edges()
        tree = HardTree.two_level(4, [0, 0, 0, 0])
        assert structural_info_hard(g, tree) == pytest.approx(2.0, abs=1e-12)

    def test_single_cluster_equals_one_dim_se(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            g = random_graph(rng, 5)
            tree = HardTree.two_level(5, [0] * 5)
            assert structural_info_hard(g, tree) == pytest.approx(
                one_dim_se(g), abs=1e-12
            )

    def test_passthrough_module_contributes_zero(self):
        # middle node owning everything: its volume equals the root's
        g = cycle4()
        whole = HardTree.two_level(4, [0, 0, 0, 0])
        singletons_only = one_dim_se(g)
        assert structural_info_hard(g, whole) == pytest.approx(singletons_only)

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            g = random_graph(rng, 6)
            labels = rng.integers(0, 3, size=6)
            labels = np.unique(labels, return_inverse=True)[1]
            tree = HardTree.two_level(6, labels)
            assert structural_info_hard(g, tree) >= 0.0

    def test_node_set_mismatch(self):
        with pytest.raises(GraphError):
            structural_info_hard(cycle4(), HardTree.two_level(3, [0, 0, 1]))


class TestBruteForce:
    def test_two_disjoint_edges_optimum(self):
        g = two_disjoint_edges()
        tree, value = brute_force_optimal_tree(g, height=2)
        assert value == pytest.approx(1.0, abs=1e-12)
        anc = tree.leaf_ancestors(1)
        assert anc[0] == anc[1] and anc[2] == anc[3] and anc[0] != anc[2]

    def test_triangle_enumeration_consistency(self):
        g = WeightedGraph(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])
        tree, value = brute_force_optimal_tree(g, height=2)
        # the minimum must match an explicit scan over all partitions
        candidates = []
        for labels in ([0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1], [0, 1, 2]):
            candidates.append(structural_info_hard(g, HardTree.two_level(3, labels)))
        assert value == pytest.approx(min(candidates), abs=1e-12)

    def test_single_edge_every_tree_one_bit(self):
        g = WeightedGraph(2, [(0, 1, 3.0)])
        tree, value = brute_force_optimal_tree(g, height=2)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_minimum_dominates_random_trees(self):
        rng = np.random.default_rng(3)
        g = random_graph(rng, 5)
        _, best = brute_force_optimal_tree(g, height=2)
        for _ in range(20):
            labels = np.unique(rng.integers(0, 3, size=5), return_inverse=True)[1]
            assert best <= structural_info_hard(g, HardTree.two_level(5, labels)) + 1e-12

    def test_height_three_runs(self):
        g = WeightedGraph(4, [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 0.1)])
        tree2, v2 = brute_force_optimal_tree(g, height=2)
        tree3, v3 = brute_force_optimal_tree(g, height=3)
        assert v3 <= v2 + 1e-12  # deeper trees can only do as well or better

    def test_size_cap(self):
        g = WeightedGraph(9, [(i, i + 1, 1.0) for i in range(8)])
        with pytest.raises(GraphError):
            brute_force_optimal_tree(g, height=2)
