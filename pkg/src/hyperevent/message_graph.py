"""Weighted message graph from embedded short messages.

Two edge families: attribute edges between messages sharing a user /
hashtag / entity string, and semantic edges between messages whose cosine
similarity clears a threshold. The threshold is picked from a small grid by
looking for the point whose one-dimensional structural entropy sits closest
to the grid mean, i.e. the most "typical" graph structure, breaking ties
toward the smaller threshold so more edges survive. Edge weight is
max(similarity, 0) for both families.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Sequence

import numpy as np

from .graph_entropy import WeightedGraph

logger = logging.getLogger(__name__)

DEFAULT_GRID_LO = 0.4
DEFAULT_GRID_HI = 0.6
DEFAULT_GRID_STEP = 0.05

DENSE_SIMILARITY_LIMIT = 20_000
_BLOCK_ROWS = 2048


class CorpusError(ValueError):
    """Malformed message input."""


@dataclass(eq=False)
class MessageRecord:
    """One social message: identity, time, embedding, extracted attributes.

    Attributes are namespaced strings such as "user:alice", "hashtag:x",
    "entity:acme"; matching is exact string equality. `label` is the
    optional ground-truth event id (evaluation only, never consumed by
    detection).
    """

    id: str
    timestamp: datetime
    embedding: np.ndarray
    attributes: frozenset[str] = frozenset()
    label: int | None = None


@dataclass
class MessageGraph:
    """Assembled graph plus the provenance of every retained or dropped pair."""

    embeddings: np.ndarray
    graph: WeightedGraph
    threshold: float
    provenance: dict[tuple[int, int], str] = field(default_factory=dict)
    dropped: dict[tuple[int, int], str] = field(default_factory=dict)


def cosine_similarity(X: np.ndarray, ids: Sequence[str] | None = None) -> np.ndarray:
    """Dense cosine-similarity matrix with exact unit diagonal.

    Rows beyond DENSE_SIMILARITY_LIMIT are processed in chunks with
    identical results. A zero-norm row is a hard error naming the message.
    """
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    bad = np.where(norms == 0)[0]
    if bad.size:
        name = ids[bad[0]] if ids is not None else f"index {bad[0]}"
        raise CorpusError(f"message {name} has a zero-norm embedding")
    unit = X / norms[:, None]
    n = unit.shape[0]
    if n <= DENSE_SIMILARITY_LIMIT:
        S = unit @ unit.T
    else:
        S = np.empty((n, n), dtype=np.float64)
        for start in range(0, n, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, n)
            S[start:stop] = unit[start:stop] @ unit.T
    np.clip(S, -1.0, 1.0, out=S)
    np.fill_diagonal(S, 1.0)
    return S


def attribute_edges(messages: Sequence[MessageRecord]) -> set[tuple[int, int]]:
    """Pairs sharing at least one attribute, via an inverted index."""
    index: dict[str, list[int]] = {}
    for k, msg in enumerate(messages):
        for attr in msg.attributes:
            index.setdefault(attr, []).append(k)
    pairs: set[tuple[int, int]] = set()
    for members in index.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pairs.add((members[a], members[b]))
    return pairs


def _threshold_grid(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0:
        raise ValueError(f"grid step must be positive, got {step}")
    if lo > hi:
        raise ValueError(f"grid bounds inverted: [{lo}, {hi}]")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + k * step for k in range(count)]


def _semantic_one_dim_se(S: np.ndarray, pi: float) -> float:
    """1DSE of the graph keeping off-diagonal pairs with S_ij >= pi."""
    keep = S >= pi
    np.fill_diagonal(keep, False)
    degrees = np.where(keep, S, 0.0).sum(axis=1)
    pos = degrees[degrees > 0]
    if pos.size == 0:
        return 0.0
    p = pos / pos.sum()
    return float(-(p * np.log2(p)).sum())


def select_threshold(
    S: np.ndarray,
    grid_lo: float = DEFAULT_GRID_LO,
    grid_hi: float = DEFAULT_GRID_HI,
    step: float = DEFAULT_GRID_STEP,
) -> float:
    """Grid point whose 1DSE is closest to the grid-mean 1DSE.

    Ties break toward the smaller threshold (keeps more edges). A grid
    point yielding an empty graph contributes 1DSE = 0 and is flagged in
    the log; it is not an error.
    """
    grid = _threshold_grid(grid_lo, grid_hi, step)
    entropies = []
    for pi in grid:
        h = _semantic_one_dim_se(S, pi)
        if h == 0.0:
            logger.warning("threshold %.4f yields an empty semantic graph", pi)
        entropies.append(h)
    mean = float(np.mean(entropies))
    best = grid[0]
    best_dev = abs(entropies[0] - mean)
    for pi, h in zip(grid[1:], entropies[1:]):
        dev = abs(h - mean)
        if dev < best_dev:  # strict: ties keep the earlier, smaller threshold
            best, best_dev = pi, dev
    return best


def assemble_message_graph(
    messages: Sequence[MessageRecord], S: np.ndarray, tau: float
) -> MessageGraph:
    """Union of attribute and semantic edges, weighted by max(similarity, 0).

    Pairs whose clamped weight is zero carry no mass for any downstream
    volume or cut computation, so they are dropped from the graph and
    recorded in `dropped` instead.
    """
    n = len(messages)
    if S.shape != (n, n):
        raise ValueError(f"similarity matrix {S.shape} does not match {n} messages")
    att = attribute_edges(messages)
    iu, ju = np.triu_indices(n, k=1)
    sem_mask = S[iu, ju] >= tau
    sem = set(zip(iu[sem_mask].tolist(), ju[sem_mask].tolist()))

    provenance: dict[tuple[int, int], str] = {}
    dropped: dict[tuple[int, int], str] = {}
    edges: list[tuple[int, int, float]] = []
    # sorted order keeps degree sums bit-identical across interpreter runs
    for pair in sorted(att | sem):
        kind = "both" if pair in att and pair in sem else ("attribute" if pair in att else "semantic")
        weight = max(float(S[pair]), 0.0)
        if weight == 0.0:
            dropped[pair] = f"{kind}, zero-weight"
            continue
        provenance[pair] = kind
        edges.append((pair[0], pair[1], weight))
    graph = WeightedGraph(n, edges)
    X = np.asarray([m.embedding for m in messages], dtype=np.float64)
    return MessageGraph(embeddings=X, graph=graph, threshold=float(tau), provenance=provenance, dropped=dropped)


def write_graph_files(
    mg: MessageGraph,
    graph_path,
    messages: Sequence[MessageRecord] | None = None,
    mapping_path=None,
) -> None:
    """Dump the weighted graph in the shared text format, plus an optional
    "index<TAB>message id" sidecar."""
    mg.graph.write_text(graph_path)
    if mapping_path is not None:
        if messages is None:
            raise ValueError("id mapping requested but no messages given")
        lines = [f"{k}\t{m.id}" for k, m in enumerate(messages)]
        with open(mapping_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
