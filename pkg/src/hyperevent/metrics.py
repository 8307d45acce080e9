"""Clustering agreement metrics: NMI, AMI, ARI over two labelings.

All three are computed from the contingency table. Mutual information and
entropies use natural logs internally; the normalisations cancel the base.
NMI and AMI normalise by the arithmetic mean of the two entropies, matching
the prevailing reference implementations. The AMI expectation E[MI] is taken
under the hypergeometric permutation model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEGENERATE_EPS = 1e-12


@dataclass
class ContingencyTable:
    """Joint counts of predicted cluster x true class, with marginals."""

    counts: np.ndarray  # (U, V) int64
    a: np.ndarray  # row marginals, predicted cluster sizes
    b: np.ndarray  # column marginals, true class sizes
    n: int


def contingency(pred, truth) -> ContingencyTable:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"label arrays must be equal-length vectors, got {pred.shape} vs {truth.shape}")
    if pred.shape[0] < 1:
        raise ValueError("need at least one item")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    counts = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(counts, (pi, ti), 1)
    return ContingencyTable(
        counts=counts,
        a=counts.sum(axis=1),
        b=counts.sum(axis=0),
        n=int(pred.shape[0]),
    )


def _entropy(marginal: np.ndarray, n: int) -> float:
    p = marginal[marginal > 0] / n
    return float(-(p * np.log(p)).sum())


def _mutual_info(t: ContingencyTable) -> float:
    nz = t.counts > 0
    nij = t.counts[nz].astype(np.float64)
    outer = np.outer(t.a, t.b)[nz].astype(np.float64)
    return float((nij / t.n * (np.log(nij * t.n) - np.log(outer))).sum())


def _identical_partitions(t: ContingencyTable) -> bool:
    # identical grouping <=> exactly one nonzero cell per row and per column
    nz_rows = (t.counts > 0).sum(axis=1)
    nz_cols = (t.counts > 0).sum(axis=0)
    return bool((nz_rows == 1).all() and (nz_cols == 1).all())


def nmi(t: ContingencyTable) -> float:
    """MI normalised by the arithmetic mean of the two entropies.

    Identical partitions give exactly 1 (the ratio is taken analytically,
    not through two separately rounded summations). Both partitions trivial
    gives 1; otherwise a zero entropy on either side gives 0.
    """
    hu = _entropy(t.a, t.n)
    hv = _entropy(t.b, t.n)
    if hu == 0.0 and hv == 0.0:
        return 1.0
    if hu == 0.0 or hv == 0.0:
        return 0.0
    if _identical_partitions(t):
        return 1.0
    return _mutual_info(t) / (0.5 * (hu + hv))


def _expected_mi(t: ContingencyTable) -> float:
    """E[MI] over the hypergeometric permutation model (fixed marginals).

    Hypergeometric probabilities come from exact integer binomials, so the
    expectation is accurate to float rounding at any corpus size this
    package handles.
    """
    n = t.n
    total = 0.0
    for a_u in t.a:
        a_u = int(a_u)
        denom = math.comb(n, a_u)
        for b_v in t.b:
            b_v = int(b_v)
            lo = max(1, a_u + b_v - n)
            hi = min(a_u, b_v)
            for nij in range(lo, hi + 1):
                p = math.comb(b_v, nij) * math.comb(n - b_v, a_u - nij) / denom
                total += (nij / n) * (math.log(n * nij) - math.log(a_u * b_v)) * p
    return float(total)


def ami(t: ContingencyTable) -> float:
    """(MI - E[MI]) / (mean entropy - E[MI]); 1 for identical partitions.

    A degenerate denominator (|.| < 1e-12) yields 0 unless the partitions
    are identical, in which case 1.
    """
    if _identical_partitions(t):
        return 1.0
    hu = _entropy(t.a, t.n)
    hv = _entropy(t.b, t.n)
    mean_h = 0.5 * (hu + hv)
    emi = _expected_mi(t)
    denom = mean_h - emi
    if abs(denom) < DEGENERATE_EPS:
        return 0.0
    return (_mutual_info(t) - emi) / denom


def _comb2_sum(marginal: np.ndarray) -> float:
    m = marginal.astype(np.float64)
    return float((m * (m - 1) / 2).sum())


def ari(t: ContingencyTable) -> float:
    """Adjusted Rand index from the pair-counting closed form."""
    if t.n < 2:
        raise ValueError("adjusted Rand index needs at least two items")
    sum_c = _comb2_sum(t.counts.ravel())
    sum_a = _comb2_sum(t.a)
    sum_b = _comb2_sum(t.b)
    pairs = t.n * (t.n - 1) / 2
    expected = sum_a * sum_b / pairs
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    if abs(denom) < DEGENERATE_EPS:
        return 1.0 if _identical_partitions(t) else 0.0
    return (sum_c - expected) / denom


def scores(pred, truth) -> dict[str, float]:
    """All three metrics at once from raw label vectors."""
    t = contingency(pred, truth)
    return {"nmi": nmi(t), "ami": ami(t), "ari": ari(t)}
