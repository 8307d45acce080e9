"""Structural entropy of weighted graphs under hard partitioning trees.

A partitioning tree nests the graph's nodes into modules, root module = all
nodes, leaves = singletons. Its structural information charges every
non-root module alpha the term

    -(g_alpha / vol(G)) * log2(vol(T_alpha) / vol(T_parent)),

where g_alpha is the total weight of edges crossing the module boundary and
vol sums weighted degrees. The one-dimensional case (tree of height 1) is
the degree-distribution entropy. A brute-force enumerator over set
partitions serves as the optimality oracle on small instances.

Logarithms are base 2 throughout; values are in bits.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

BRUTE_FORCE_MAX_NODES = 8


class GraphError(ValueError):
    """Malformed graph input or an operation applied outside its domain."""


class WeightedGraph:
    """Undirected graph with positive finite edge weights and no self-loops.

    Edges are stored once as (i, j, w) with i < j; degrees and volume follow
    the convention d_i = sum of incident weights, vol(G) = sum_i d_i (each
    edge therefore counts twice in the volume).
    """

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int, float]]):
        if node_count < 1:
            raise GraphError("graph needs at least one node")
        self.node_count = int(node_count)
        ii: list[int] = []
        jj: list[int] = []
        ww: list[float] = []
        seen: set[tuple[int, int]] = set()
        for i, j, w in edges:
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise GraphError(f"self-loop on node {i}")
            if i > j:
                i, j = j, i
            if i < 0 or j >= self.node_count:
                raise GraphError(f"edge ({i}, {j}) outside node range")
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            if not np.isfinite(w) or w <= 0:
                raise GraphError(f"edge ({i}, {j}) has non-positive or non-finite weight {w}")
            seen.add((i, j))
            ii.append(i)
            jj.append(j)
            ww.append(w)
        self.i = np.asarray(ii, dtype=np.int64)
        self.j = np.asarray(jj, dtype=np.int64)
        self.w = np.asarray(ww, dtype=np.float64)
        deg = np.zeros(self.node_count, dtype=np.float64)
        np.add.at(deg, self.i, self.w)
        np.add.at(deg, self.j, self.w)
        self.degrees = deg
        self.volume = float(deg.sum())

    @property
    def edge_count(self) -> int:
        return int(self.i.shape[0])

    @classmethod
    def from_adjacency(cls, adj: np.ndarray, tol: float = 0.0) -> "WeightedGraph":
        """Build from a symmetric nonnegative matrix; entries <= tol are non-edges."""
        adj = np.asarray(adj, dtype=np.float64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphError("adjacency must be square")
        if not np.allclose(adj, adj.T, atol=1e-10):
            raise GraphError("adjacency must be symmetric")
        iu, ju = np.triu_indices(adj.shape[0], k=1)
        keep = adj[iu, ju] > tol
        return cls(adj.shape[0], zip(iu[keep], ju[keep], adj[iu, ju][keep]))

    def to_adjacency(self) -> np.ndarray:
        adj = np.zeros((self.node_count, self.node_count), dtype=np.float64)
        adj[self.i, self.j] = self.w
        adj[self.j, self.i] = self.w
        return adj

    def write_text(self, path: str | Path) -> None:
        """Write the shared text format: header "n m", then one "i j w" per edge."""
        lines = [f"{self.node_count} {self.edge_count}"]
        for i, j, w in zip(self.i, self.j, self.w):
            lines.append(f"{int(i)} {int(j)} {float(w)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read_text(cls, path: str | Path) -> "WeightedGraph":
        raw = Path(path).read_text().strip().splitlines()
        if not raw:
            raise GraphError(f"{path}: empty graph file")
        try:
            n, m = (int(tok) for tok in raw[0].split())
        except ValueError as exc:
            raise GraphError(f"{path}: bad header line {raw[0]!r}") from exc
        if len(raw) - 1 != m:
            raise GraphError(f"{path}: header promises {m} edges, found {len(raw) - 1}")
        edges = []
        for k, line in enumerate(raw[1:], start=2):
            toks = line.split()
            if len(toks) != 3:
                raise GraphError(f"{path}: line {k}: expected 'i j w'")
            edges.append((int(toks[0]), int(toks[1]), float(toks[2])))
        return cls(n, edges)


def one_dim_se(g: WeightedGraph) -> float:
    """Degree-distribution entropy -sum_i (d_i/vol) log2(d_i/vol), in bits.

    Isolated nodes contribute zero. Invariant under uniform rescaling of all
    edge weights; equals log2(n) for a regular graph on n non-isolated nodes.
    """
    if g.edge_count == 0:
        raise GraphError("one-dimensional structural entropy needs at least one edge")
    p = g.degrees[g.degrees > 0] / g.volume
    return float(-(p * np.log2(p)).sum())


class HardTree:
    """Partitioning tree of fixed height with singleton leaves.

    Layers are indexed 0 (root) .. height (leaves); leaf k at the bottom
    layer is graph node k. `parent_links[h-1][k]` gives the parent (a layer
    h-1 index) of node k on layer h. Modules are implied: the module of a
    tree node is the set of leaves below it.
    """

    def __init__(self, node_count: int, parent_links: Sequence[np.ndarray]):
        self.node_count = int(node_count)
        self.height = len(parent_links)
        if self.height < 1:
            raise GraphError("tree height must be >= 1")
        links = [np.asarray(p, dtype=np.int64) for p in parent_links]
        if links[-1].shape[0] != self.node_count:
            raise GraphError("bottom layer must have one leaf per graph node")
        widths = [1] + [int(p.shape[0]) for p in links]
        for h, p in enumerate(links, start=1):
            if p.shape[0] == 0:
                raise GraphError(f"layer {h} is empty")
            if p.min() < 0 or p.max() >= widths[h - 1]:
                raise GraphError(f"layer {h} parent index out of range")
            if len(np.unique(p)) != widths[h - 1]:
                raise GraphError(f"layer {h - 1} has a childless node")
        self.parent_links = links
        self.widths = widths

    @classmethod
    def two_level(cls, node_count: int, cluster_of: Sequence[int]) -> "HardTree":
        """Height-2 tree: root, one middle node per cluster, singleton leaves."""
        cluster_of = np.asarray(cluster_of, dtype=np.int64)
        n_clusters = int(cluster_of.max()) + 1
        return cls(node_count, [np.zeros(n_clusters, dtype=np.int64), cluster_of])

    def leaf_ancestors(self, layer: int) -> np.ndarray:
        """Map each graph node to its ancestor index on the given layer."""
        if not 0 <= layer <= self.height:
            raise GraphError(f"layer {layer} outside 0..{self.height}")
        anc = np.arange(self.node_count, dtype=np.int64)
        for h in range(self.height, layer, -1):
            anc = self.parent_links[h - 1][anc]
        return anc


def structural_info_hard(g: WeightedGraph, tree: HardTree) -> float:
    """Structural information of g under an explicit partitioning tree, in bits.

    Sums -(g_alpha/vol(G)) log2(vol(T_alpha)/vol(T_parent)) over all non-root
    tree nodes; a node whose module equals its parent's contributes zero, as
    does any module with no boundary edges.
    """
    if tree.node_count != g.node_count:
        raise GraphError(
            f"tree is over {tree.node_count} nodes, graph has {g.node_count}"
        )
    if g.edge_count == 0:
        raise GraphError("structural information needs at least one edge")
    total = 0.0
    vol_g = g.volume
    anc_cache = {h: tree.leaf_ancestors(h) for h in range(tree.height + 1)}
    for h in range(1, tree.height + 1):
        anc = anc_cache[h]
        width = tree.widths[h]
        vol = np.bincount(anc, weights=g.degrees, minlength=width)
        cross = anc[g.i] != anc[g.j]
        boundary = np.zeros(width, dtype=np.float64)
        np.add.at(boundary, anc[g.i][cross], g.w[cross])
        np.add.at(boundary, anc[g.j][cross], g.w[cross])
        vol_parent = np.bincount(
            anc_cache[h - 1], weights=g.degrees, minlength=tree.widths[h - 1]
        )[tree.parent_links[h - 1]]
        active = boundary > 0
        total -= float(
            ((boundary[active] / vol_g) * np.log2(vol[active] / vol_parent[active])).sum()
        )
    return total


def _set_partitions(items: list[int]) -> Iterator[list[list[int]]]:
    """All partitions of `items` into nonempty blocks (Bell-number many)."""
    if len(items) == 1:
        yield [items[:]]
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[head] + part[k]] + part[k + 1 :]
        yield [[head]] + part


def _blocks_to_assignment(n: int, blocks: list[list[int]]) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    for c, block in enumerate(blocks):
        out[block] = c
    return out


def brute_force_optimal_tree(
    g: WeightedGraph, height: int = 2, max_nodes: int = BRUTE_FORCE_MAX_NODES
) -> tuple[HardTree, float]:
    """Exhaustive minimum of structural_info_hard over trees of the given height.

    Enumerates set partitions layer by layer; only meant as an oracle, hence
    the hard node-count cap (Bell numbers grow fast).
    """
    if g.node_count > max_nodes:
        raise GraphError(
            f"brute force capped at {max_nodes} nodes, got {g.node_count}"
        )
    if height not in (2, 3):
        raise GraphError("brute force supports heights 2 and 3 only")
    n = g.node_count
    best: tuple[HardTree, float] | None = None
    for blocks in _set_partitions(list(range(n))):
        cluster_of = _blocks_to_assignment(n, blocks)
        if height == 2:
            tree = HardTree.two_level(n, cluster_of)
            value = structural_info_hard(g, tree)
            if best is None or value < best[1]:
                best = (tree, value)
        else:
            n_blocks = len(blocks)
            for super_blocks in _set_partitions(list(range(n_blocks))):
                super_of = _blocks_to_assignment(n_blocks, super_blocks)
                tree = HardTree(
                    n,
                    [
                        np.zeros(len(super_blocks), dtype=np.int64),
                        super_of,
                        cluster_of,
                    ],
                )
                value = structural_info_hard(g, tree)
                if best is None or value < best[1]:
                    best = (tree, value)
    assert best is not None
    return best
