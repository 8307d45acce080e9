"""Anchor graph: collapse semantically similar messages into anchor nodes.

Messages are grouped by seeded Lloyd iterations on their raw embeddings
(farthest-point-weighted seeding, Euclidean metric). An anchor's feature is
the arithmetic mean of its members; the anchor adjacency C^T A C keeps all
inter-anchor mass, while intra-anchor mass lands on the diagonal and is
stored separately because self-loops play no role in any cut or volume
term downstream.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

LLOYD_MAX_ITER = 50
LLOYD_SHIFT_TOL = 1e-6


@dataclass
class AnchorGraph:
    """Coarsened message graph; `membership` rows are one-hot."""

    features: np.ndarray  # (M, d) anchor embeddings
    adjacency: np.ndarray  # (M, M) symmetric, zero diagonal
    intra_mass: np.ndarray  # (M,) mass that C^T A C put on the diagonal
    membership: np.ndarray  # (N, M) one-hot message -> anchor
    anchor_count: int

    def has_edges(self) -> bool:
        return bool((self.adjacency > 0).any())


def choose_anchor_count(n: int, epsilon: int) -> int:
    """M = ceil(n / epsilon), floored at one anchor."""
    if epsilon < 1:
        raise ValueError(f"epsilon must be >= 1, got {epsilon}")
    return max(1, math.ceil(n / epsilon))


def _seed_centroids(X: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Farthest-point-weighted seeding: next centre drawn with p ~ D^2."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < m:
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centre; take lowest new index
            remaining = np.setdiff1d(np.arange(n), np.asarray(chosen))
            chosen.append(int(remaining[0]))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, ((X - X[chosen[-1]]) ** 2).sum(axis=1))
    return X[chosen].copy()


def cluster_messages(X: np.ndarray, m: int, seed: int) -> np.ndarray:
    """One-hot membership matrix from seeded Lloyd iterations.

    Deterministic for a fixed seed. Runs at most LLOYD_MAX_ITER rounds or
    until the maximum centroid shift drops below LLOYD_SHIFT_TOL. Clusters
    that end up empty are pruned (the anchor count shrinks); columns are
    reordered by their smallest member index, so m == n yields the identity.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if m > n:
        raise ValueError(f"cannot form {m} anchors from {n} messages")
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(X, m, rng)
    assign = np.zeros(n, dtype=np.int64)
    x_sq = (X * X).sum(axis=1)
    for _ in range(LLOYD_MAX_ITER):
        d2 = x_sq[:, None] - 2.0 * (X @ centroids.T) + (centroids * centroids).sum(axis=1)[None, :]
        assign = d2.argmin(axis=1)  # ties resolve to the lowest index
        shift = 0.0
        for c in range(m):
            members = assign == c
            if members.any():
                new = X[members].mean(axis=0)
                shift = max(shift, float(np.linalg.norm(new - centroids[c])))
                centroids[c] = new
        if shift < LLOYD_SHIFT_TOL:
            break
    used = np.unique(assign)
    if used.size < m:
        logger.info("pruned %d empty anchors", m - used.size)
    # canonical order: anchors sorted by first member
    first_member = {c: int(np.argmax(assign == c)) for c in used}
    order = sorted(used, key=lambda c: first_member[c])
    remap = {c: k for k, c in enumerate(order)}
    dense = np.array([remap[c] for c in assign], dtype=np.int64)
    C = np.zeros((n, len(order)), dtype=np.float64)
    C[np.arange(n), dense] = 1.0
    return C


def anchor_features(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Row u = arithmetic mean of the member embeddings of anchor u."""
    counts = C.sum(axis=0)
    if (counts == 0).any():
        raise ValueError("membership has an empty anchor column")
    return (C.T @ X) / counts[:, None]


def anchor_adjacency(A: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(C^T A C with zero diagonal, intra-anchor mass that was on the diagonal)."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[0] != A.shape[1] or A.shape[0] != C.shape[0]:
        raise ValueError(f"adjacency {A.shape} does not match membership {C.shape}")
    coarse = C.T @ A @ C
    coarse = 0.5 * (coarse + coarse.T)
    intra = np.diag(coarse).copy()
    np.fill_diagonal(coarse, 0.0)
    return coarse, intra


def map_back(anchor_labels: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Label of message i = label of the anchor containing i."""
    anchor_labels = np.asarray(anchor_labels)
    if anchor_labels.shape[0] != C.shape[1]:
        raise ValueError("need exactly one label per anchor")
    return anchor_labels[C.argmax(axis=1)]


def build_anchor_graph(
    X: np.ndarray, A: np.ndarray, epsilon: int, seed: int
) -> AnchorGraph:
    """Full coarsening: pick M, cluster, average features, project adjacency."""
    m = choose_anchor_count(X.shape[0], epsilon)
    C = cluster_messages(X, m, seed)
    feats = anchor_features(X, C)
    adj, intra = anchor_adjacency(A, C)
    return AnchorGraph(
        features=feats,
        adjacency=adj,
        intra_mass=intra,
        membership=C,
        anchor_count=C.shape[1],
    )
