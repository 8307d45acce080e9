"""Hyperbolic graph autoencoder and differentiable structural information.

Encoder: lift Euclidean anchor features to the ball, then hyperbolic
convolutions z_i = exp_o(sum_j w_ij (W log_o(h_j) + b)) with attention
weights w_ij = softmax(-d^2(h_i, h_j)/sqrt(M)) over graph neighbours plus
self. Decoder: Fermi-Dirac edge probabilities 1/(exp((d^2 - q)/t) + 1),
trained with class-weighted binary cross-entropy against the binarised
anchor adjacency.

The partitioning tree is built bottom-up: each layer gets a row-stochastic
assignment C = softmax(A relu(log_o(PConv(Z)))), parents are weighted
Frechet means of their children, and the parent adjacency is C^T A C. The
structural-information loss charges every tree layer its soft entropy term
and anchors the root to the origin through a geodesic-distance penalty.

Everything is plain torch on float64 tensors; gradients flow through every
step, including the unrolled Frechet iterations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import torch

from . import geometry

logger = logging.getLogger(__name__)

VOLUME_EPS = 1e-12
PROB_EPS = 1e-12
LOG2 = math.log(2.0)


class TrainingDivergedError(RuntimeError):
    """A loss component became non-finite."""


class ConfigurationError(ValueError):
    """Model inputs that cannot be trained on (e.g. an edgeless graph)."""


@dataclass
class PConvParams:
    """One hyperbolic convolution: tangent-space affine map plus dropout."""

    weight: torch.Tensor  # (d_in, d_out)
    bias: torch.Tensor  # (d_out,)
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.weight.shape[1] != self.bias.shape[0]:
            raise ValueError("bias length must match weight output dimension")


@dataclass
class DecoderParams:
    """Fermi-Dirac decoder hyperparameters."""

    q: float = 2.0
    t: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"decoder temperature t must be positive, got {self.t}")


def pairwise_sq_distance(Z: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """All-pairs squared geodesic distances, (N, N), exact zeros on the diagonal."""
    return geometry.sq_distance(Z.unsqueeze(1), Z.unsqueeze(0), kappa)


def attention_weights(
    Z: torch.Tensor,
    adjacency: torch.Tensor,
    kappa: float = -1.0,
    masked: bool = True,
) -> torch.Tensor:
    """Row-stochastic w_ij ~ exp(-d^2(z_i, z_j)/sqrt(M)).

    With `masked` (the default) the softmax runs over graph neighbours plus
    self, so structure enters the aggregation; the unmasked variant keeps
    the dense form.
    """
    n = Z.shape[0]
    logits = -pairwise_sq_distance(Z, kappa) / math.sqrt(n)
    if masked:
        allow = (adjacency > 0) | torch.eye(n, dtype=torch.bool)
        logits = logits.masked_fill(~allow, float("-inf"))
    return torch.softmax(logits, dim=1)


def pconv(
    Z: torch.Tensor,
    params: PConvParams,
    omega: torch.Tensor,
    kappa: float = -1.0,
    training: bool = False,
) -> torch.Tensor:
    """Hyperbolic convolution: log at origin, affine, aggregate, exp back."""
    if Z.shape[1] != params.weight.shape[0]:
        raise ValueError(
            f"input dimension {Z.shape[1]} does not match weight {tuple(params.weight.shape)}"
        )
    origin = torch.zeros_like(Z[:1])
    tang = geometry.log_map(origin, Z, kappa)
    affine = tang @ params.weight + params.bias
    affine = torch.nn.functional.dropout(affine, p=params.dropout, training=training)
    out = geometry.exp_map(torch.zeros_like(affine[:1]), omega @ affine, kappa)
    return geometry.project_to_ball(out, kappa)


def hgae_encode(
    X: torch.Tensor,
    adjacency: torch.Tensor,
    layers: Sequence[PConvParams],
    kappa: float = -1.0,
    training: bool = False,
    masked_attention: bool = True,
) -> torch.Tensor:
    """Lift Euclidean features into the ball and run the convolution stack.

    Attention is recomputed from the current embeddings before every layer.
    """
    off_diag = adjacency - torch.diag(torch.diag(adjacency))
    if not bool((off_diag > 0).any()):
        raise ConfigurationError("anchor graph has no edges: no structure to encode")
    h = geometry.exp_map(
        torch.zeros_like(X[:1]), geometry.project_to_ball(X, kappa), kappa
    )
    for params in layers:
        omega = attention_weights(h, adjacency, kappa, masked=masked_attention)
        h = pconv(h, params, omega, kappa, training=training)
    return h


def fermi_dirac(Z: torch.Tensor, decoder: DecoderParams, kappa: float = -1.0) -> torch.Tensor:
    """Edge probabilities 1/(exp((d^2 - q)/t) + 1), symmetric, in (0, 1)."""
    d2 = pairwise_sq_distance(Z, kappa)
    return torch.sigmoid((decoder.q - d2) / decoder.t)


def hgae_loss(A_hat: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
    """Class-weighted BCE between predicted probabilities and binarised edges.

    Off-diagonal pairs only; the positive class is upweighted by neg/pos to
    counter sparsity (weight clamps to 1 when either class is absent).
    """
    if A_hat.shape != adjacency.shape:
        raise ValueError(f"shape mismatch {tuple(A_hat.shape)} vs {tuple(adjacency.shape)}")
    n = A_hat.shape[0]
    off = ~torch.eye(n, dtype=torch.bool)
    pred = A_hat[off].clamp(PROB_EPS, 1.0 - PROB_EPS)
    target = (adjacency[off] > 0).to(pred.dtype)
    pos = float(target.sum())
    neg = float(target.numel()) - pos
    pos_weight = neg / pos if pos > 0 and neg > 0 else 1.0
    per_pair = -(pos_weight * target * torch.log(pred) + (1 - target) * torch.log(1 - pred))
    return per_pair.mean()


def _standardize_logits(L: torch.Tensor) -> torch.Tensor:
    """Column-centre and scale by the global std; zero matrix stays zero."""
    L = L - L.mean(dim=0, keepdim=True)
    return L / L.std().clamp_min(1e-12)


def assignment_prior(adjacency: torch.Tensor, width: int) -> torch.Tensor:
    """Standardised affinity prior for the assignment logits.

    Column j is anchored to node j: a node's prior logit toward column j is
    its direct affinity to j plus the one-step consensus affinity (A P with
    P the row-normalised adjacency). Nodes of one community share their
    strongest columns, so the row softmax starts from a partition shaped by
    the graph itself instead of an arbitrary function of random weights.
    """
    if width > adjacency.shape[0]:
        raise ValueError("assignment width cannot exceed the node count")
    P = adjacency / adjacency.sum(dim=1, keepdim=True).clamp_min(1e-15)
    affinity = adjacency + adjacency @ P
    return _standardize_logits(affinity[:, :width])


def level_assignment(
    Z: torch.Tensor,
    adjacency: torch.Tensor,
    params: PConvParams,
    omega: torch.Tensor,
    kappa: float = -1.0,
    training: bool = False,
) -> torch.Tensor:
    """Row-stochastic assignment from graph structure and learned features.

    C = softmax( standardise(A relu(log_o(PConv(Z)))) + affinity prior ).

    The raw product A sigma(PConv(.)) carries the adjacency's arbitrary
    scale: large weights saturate the softmax into a frozen one-hot state
    and small ones leave it uniform with dead gradients, either way
    untrainable within a fixed epoch budget. Standardising the logits and
    adding the (equally standardised) affinity prior keeps the softmax in
    its responsive range at any graph scale and seeds it with the graph's
    own community structure, which the trained term then refines. With a
    single parent column every row is exactly [1.0].
    """
    proj = pconv(Z, params, omega, kappa, training=training)
    origin = torch.zeros_like(proj[:1])
    scores = torch.relu(geometry.log_map(origin, proj, kappa))
    logits = _standardize_logits(adjacency @ scores)
    logits = logits + assignment_prior(adjacency, params.weight.shape[1])
    return torch.softmax(logits, dim=1)


def lift_layer(
    Z: torch.Tensor,
    adjacency: torch.Tensor,
    C: torch.Tensor,
    kappa: float = -1.0,
    frechet_iters: int = 4,
    one_shot: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Parents from children: weighted Frechet means and C^T A C adjacency.

    A column of C with (numerically) no weight would leave its parent
    unconstrained; such parents fall back to the unweighted mean of all
    children, and the event is logged.
    """
    if C.shape[0] != Z.shape[0]:
        raise ValueError("assignment rows must match child count")
    col = C.sum(dim=0)
    starved = col < VOLUME_EPS
    if bool(starved.any()):
        logger.warning("%d parent(s) received ~zero assignment mass", int(starved.sum()))
        fallback = torch.full_like(C, 1.0 / C.shape[0])
        C_eff = torch.where(starved.unsqueeze(0), fallback, C)
    else:
        C_eff = C
    Z_parent = geometry.frechet_mean(
        Z, C_eff, kappa, fixed_iters=frechet_iters, one_shot=one_shot
    )
    A_parent = C.transpose(0, 1) @ adjacency @ C
    A_parent = A_parent - torch.diag(torch.diag(A_parent))
    return Z_parent, A_parent


def leaf_membership(assignments: Sequence[torch.Tensor]) -> torch.Tensor:
    """Compose the assignment chain C^H C^(H-1) ... down to the target layer."""
    out: torch.Tensor | None = None
    for C in assignments:
        if out is None:
            out = C
        else:
            if out.shape[1] != C.shape[0]:
                raise ValueError("assignment chain shapes do not connect")
            out = out @ C
    if out is None:
        raise ValueError("need at least one assignment matrix")
    return out


def dsi_layer_entropy(
    adjacency: torch.Tensor,
    S: torch.Tensor,
    C: torch.Tensor,
    parent_volumes: torch.Tensor,
) -> torch.Tensor:
    """Soft structural information of one tree layer, in bits.

    With leaf degrees d and leaf membership S at this layer:
      v_k  = sum_i S_ik d_i                       (soft module volume)
      w_k  = sum_{ordered leaf pairs with an edge} S_ik S_jk A_ij
      term = -(v_k - w_k)/vol * (log2 v_k - sum_j C_kj log2 parent_volume_j)
    Each undirected edge is counted twice in w_k, so (v - w) reduces to the
    module's boundary weight when the assignments are one-hot, and the
    C-expected parent log-volume collapses to the parent's log-volume, which
    together reproduce the hard definition exactly.

    The parent volume enters as the expectation of the log rather than the
    log of the expectation: the two agree on hard trees, but the log-of-mean
    form is strictly concave in the assignment row and litters the soft
    landscape with interior minima that trap gradient descent far from any
    hard partition; the mean-of-log form is linear in each row, so descent
    sharpens assignments toward vertices. Modules with v_k <= 1e-12
    contribute zero.
    """
    degrees = adjacency.sum(dim=1)
    vol = degrees.sum()
    if float(vol) <= 0:
        raise ValueError("leaf graph has zero volume")
    v = S.transpose(0, 1) @ degrees
    w = ((adjacency @ S) * S).sum(dim=0)
    expected_log_parent = C @ torch.log(parent_volumes.clamp_min(1e-30))
    terms = (v - w) * (torch.log(v.clamp_min(1e-30)) - expected_log_parent)
    terms = torch.where(v > VOLUME_EPS, terms, torch.zeros_like(terms))
    return -terms.sum() / (vol * LOG2)


@dataclass
class SoftTree:
    """Differentiable partitioning tree, layer 0 = root .. height = leaves.

    Per layer: embeddings Z, adjacency A, assignment C (layer -> layer-1,
    None at the root), and leaf membership S (leaves x layer nodes).
    """

    kappa: float
    Z: list  # [Tensor (N_l, d)]
    A: list  # [Tensor (N_l, N_l)]
    C: list  # [None, Tensor (N_1, 1), ..., Tensor (N_H, N_{H-1})]
    S: list  # [Tensor (N_H, N_l)]

    @property
    def height(self) -> int:
        return len(self.Z) - 1

    @property
    def widths(self) -> list[int]:
        return [z.shape[0] for z in self.Z]

    def layer_volumes(self, degrees: torch.Tensor) -> list[torch.Tensor]:
        """Soft volume vector per layer; each sums to vol(G) by row-stochasticity."""
        return [S.transpose(0, 1) @ degrees for S in self.S]


def build_tree(
    Z_leaf: torch.Tensor,
    adjacency: torch.Tensor,
    assign_nets: Sequence[Sequence[PConvParams]],
    kappa: float = -1.0,
    training: bool = False,
    masked_attention: bool = True,
    frechet_iters: int = 4,
    one_shot: bool = False,
) -> SoftTree:
    """Assemble the soft tree bottom-up from the leaf embeddings.

    `assign_nets[0]` assigns the leaf layer H to layer H-1 and so on; the
    final step to the single root is the trivial all-ones assignment. Each
    net is a pconv stack whose last output width is the parent layer size.
    """
    height = len(assign_nets) + 1
    Zs = [Z_leaf]
    As = [adjacency]
    Cs: list[torch.Tensor | None] = []
    for net in assign_nets:
        Z_cur, A_cur = Zs[-1], As[-1]
        h = Z_cur
        for params in net[:-1]:
            omega = attention_weights(h, A_cur, kappa, masked=masked_attention)
            h = pconv(h, params, omega, kappa, training=training)
        omega = attention_weights(h, A_cur, kappa, masked=masked_attention)
        C = level_assignment(h, A_cur, net[-1], omega, kappa, training=training)
        Z_next, A_next = lift_layer(Z_cur, A_cur, C, kappa, frechet_iters, one_shot)
        Zs.append(Z_next)
        As.append(A_next)
        Cs.append(C)
    # root: single node, all-ones assignment (softmax over one logit is 1)
    ones = torch.ones(Zs[-1].shape[0], 1, dtype=Z_leaf.dtype)
    Z_root, A_root = lift_layer(Zs[-1], As[-1], ones, kappa, frechet_iters, one_shot)
    Zs.append(Z_root)
    As.append(A_root)
    Cs.append(ones)

    # reorder to root-first and build leaf memberships
    Zs, As = Zs[::-1], As[::-1]
    Cs = [None] + Cs[::-1]
    n_leaf = Z_leaf.shape[0]
    S_layers = [torch.eye(n_leaf, dtype=Z_leaf.dtype)]
    for level in range(height, 0, -1):
        S_layers.append(S_layers[-1] @ Cs[level])
    return SoftTree(kappa=kappa, Z=Zs, A=As, C=Cs, S=S_layers[::-1])


def se_loss(tree: SoftTree, adjacency: torch.Tensor, kappa: float = -1.0):
    """Root-anchoring distance plus the per-layer entropy sum.

    Returns (loss, parts) where parts holds the root distance and each
    layer's entropy contribution for reporting.
    """
    degrees = adjacency.sum(dim=1)
    vol = degrees.sum()
    if float(vol) <= 0:
        raise ValueError("leaf graph has zero volume")
    origin = torch.zeros_like(tree.Z[0][0])
    root_dist = geometry.distance(origin, tree.Z[0][0], kappa)
    volumes = tree.layer_volumes(degrees)
    entropy = torch.zeros((), dtype=adjacency.dtype)
    layer_terms = []
    for h in range(1, tree.height + 1):
        term = dsi_layer_entropy(adjacency, tree.S[h], tree.C[h], volumes[h - 1])
        layer_terms.append(term)
        entropy = entropy + term
    return root_dist + entropy, {"root_distance": root_dist, "layer_entropies": layer_terms}


def total_loss(l_hgae: torch.Tensor, l_se: torch.Tensor) -> torch.Tensor:
    """Unweighted sum of the reconstruction and structural-information losses."""
    out = l_hgae + l_se
    if not bool(torch.isfinite(out)):
        raise TrainingDivergedError(
            f"non-finite loss: reconstruction={float(l_hgae.detach())}, "
            f"structure={float(l_se.detach())}"
        )
    return out
