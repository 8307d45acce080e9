"""Gyrovector-space primitives for the Poincare ball model.

All operations work on torch tensors whose last dimension holds the point
coordinates; leading dimensions broadcast. Curvature kappa < 0 is passed as
a plain float (default -1.0). Points live strictly inside the open ball of
radius 1/sqrt(-kappa); `project_to_ball` is the numeric-stability guard that
keeps them there.

Everything here is a pure function of its inputs and differentiable through
torch autograd, which is what the training loop relies on.
"""

from __future__ import annotations

import math

import torch

MIN_NORM = 1e-15
ATANH_MAX = 1.0 - 1e-10
BALL_MARGIN = 1e-5


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not (math.isfinite(kappa) and kappa < 0):
        raise ValueError(f"curvature must be finite and strictly negative, got {kappa}")
    return kappa


def _check_same_dim(x: torch.Tensor, y: torch.Tensor) -> None:
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")


def _sqnorm(x: torch.Tensor) -> torch.Tensor:
    return (x * x).sum(dim=-1, keepdim=True)


def _atanh(x: torch.Tensor) -> torch.Tensor:
    # arguments clamped below 1 so the boundary never produces an infinity
    return torch.atanh(x.clamp(min=0.0, max=ATANH_MAX))


def check_in_ball(x: torch.Tensor, kappa: float = -1.0) -> None:
    """Raise if any point lies on or outside the ball boundary ||x||^2 = -1/kappa."""
    kappa = _check_kappa(kappa)
    if not torch.isfinite(x).all():
        raise ValueError("point has non-finite coordinates")
    if bool((_sqnorm(x) >= -1.0 / kappa).any()):
        raise ValueError("point lies on or outside the ball boundary")


def conformal_factor(x: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """lambda_x = 2 / (1 + kappa ||x||^2), the local metric scaling."""
    check_in_ball(x, kappa)
    return 2.0 / (1.0 + kappa * _sqnorm(x))


def _mobius_add_raw(x: torch.Tensor, y: torch.Tensor, kappa: float) -> torch.Tensor:
    """Mobius addition without the stability projection (internal)."""
    x2 = _sqnorm(x)
    y2 = _sqnorm(y)
    xy = (x * y).sum(dim=-1, keepdim=True)
    num = (1.0 - 2.0 * kappa * xy - kappa * y2) * x + (1.0 + kappa * x2) * y
    den = 1.0 - 2.0 * kappa * xy + kappa**2 * x2 * y2
    return num / den.clamp_min(MIN_NORM)


def mobius_add(x: torch.Tensor, y: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """Mobius addition x (+) y on the kappa-ball.

    x (+) y = ((1 - 2k<x,y> - k|y|^2) x + (1 + k|x|^2) y)
              / (1 - 2k<x,y> + k^2 |x|^2 |y|^2)
    """
    kappa = _check_kappa(kappa)
    _check_same_dim(x, y)
    return project_to_ball(_mobius_add_raw(x, y, kappa), kappa)


def distance(x: torch.Tensor, y: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """Geodesic distance d(x, y) = (2/sqrt(-k)) atanh(sqrt(-k) ||(-x) (+) y||).

    Uses the unprojected addition: the atanh clamp already makes boundary
    rounding harmless, and the projection pass costs a full sweep over the
    broadcast pair tensor.
    """
    kappa = _check_kappa(kappa)
    _check_same_dim(x, y)
    sc = (-kappa) ** 0.5
    un = _mobius_add_raw(-x, y, kappa).norm(dim=-1)
    return (2.0 / sc) * _atanh(sc * un)


def sq_distance(x: torch.Tensor, y: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """Squared geodesic distance; smooth in both arguments, including x = y."""
    d = distance(x, y, kappa)
    return d * d


def exp_map(x: torch.Tensor, v: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """Exponential map at x applied to tangent vector v.

    exp_x(v) = x (+) tanh(sqrt(-k) lambda_x |v| / 2) v / (sqrt(-k) |v|);
    v = 0 returns x.
    """
    kappa = _check_kappa(kappa)
    _check_same_dim(x, v)
    sc = (-kappa) ** 0.5
    vn = v.norm(dim=-1, keepdim=True).clamp_min(MIN_NORM)
    lam = 2.0 / (1.0 + kappa * _sqnorm(x)).clamp_min(MIN_NORM)
    step = torch.tanh(sc * lam * vn / 2.0) * v / (sc * vn)
    return mobius_add(x, step, kappa)


def log_map(x: torch.Tensor, y: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """Logarithmic map at x of point y; inverse of exp_map, y = x gives 0.

    log_x(y) = (2 / (sqrt(-k) lambda_x)) atanh(sqrt(-k) ||u||) u / ||u||,
    u = (-x) (+) y.
    """
    kappa = _check_kappa(kappa)
    _check_same_dim(x, y)
    sc = (-kappa) ** 0.5
    u = _mobius_add_raw(-x, y, kappa)
    un = u.norm(dim=-1, keepdim=True).clamp_min(MIN_NORM)
    lam = 2.0 / (1.0 + kappa * _sqnorm(x)).clamp_min(MIN_NORM)
    return (2.0 / (sc * lam)) * _atanh(sc * un) * u / un


def project_to_ball(
    x: torch.Tensor, kappa: float = -1.0, margin: float = BALL_MARGIN
) -> torch.Tensor:
    """Radially rescale rows with ||x|| >= (1 - margin)/sqrt(-k); leave the rest."""
    kappa = _check_kappa(kappa)
    if not 0.0 < margin < 1.0:
        raise ValueError(f"margin must lie in (0, 1), got {margin}")
    if not torch.isfinite(x).all():
        raise ValueError("cannot project non-finite coordinates")
    max_norm = (1.0 - margin) / (-kappa) ** 0.5
    nrm = x.norm(dim=-1, keepdim=True)
    # clamp keeps the untaken branch NaN-free for rows at the origin
    scale = torch.where(nrm >= max_norm, max_norm / nrm.clamp_min(MIN_NORM), torch.ones_like(nrm))
    return x * scale


def tangent_mean(points: torch.Tensor, weights: torch.Tensor, kappa: float = -1.0) -> torch.Tensor:
    """One-shot mean: log to the origin, weighted Euclidean average, exp back.

    `points` is (N, d); `weights` is (N,) or (N, P) with columns already
    normalised. Cheap stand-in for the iterated Frechet mean.
    """
    origin = torch.zeros_like(points[:1])
    tang = log_map(origin, points, kappa)
    if weights.dim() == 1:
        return exp_map(origin[0], weights @ tang, kappa)
    return exp_map(torch.zeros_like(points[0]), weights.transpose(0, 1) @ tang, kappa)


def frechet_mean(
    points: torch.Tensor,
    weights: torch.Tensor | None = None,
    kappa: float = -1.0,
    tol: float = 1e-6,
    max_iter: int = 100,
    fixed_iters: int | None = None,
    one_shot: bool = False,
) -> torch.Tensor:
    """Weighted Frechet mean: argmin_z sum_i w_i d^2(z, p_i).

    Solved by iterated tangent-space averaging: at the current estimate z,
    average log_z(p_i) under the (normalised) weights and step through exp_z.
    Stops when the step norm drops below `tol` or after `max_iter` rounds.

    `points` is (N, d). `weights` may be (N,) for a single mean or (N, P)
    for P means computed in one batch (each column one weighting); columns
    are normalised internally, so only relative weights matter.

    `fixed_iters` runs exactly that many steps with no convergence test,
    which keeps the computation graph identical under small input
    perturbations (used when differentiating through the mean).
    `one_shot` returns the tangent-space approximation directly.
    """
    kappa = _check_kappa(kappa)
    if points.dim() != 2 or points.shape[0] == 0:
        raise ValueError("need a non-empty (N, d) matrix of points")
    n = points.shape[0]
    if weights is None:
        weights = torch.ones(n, dtype=points.dtype)
    if weights.shape[0] != n:
        raise ValueError(f"weights length {weights.shape[0]} != point count {n}")
    if bool((weights < 0).any()):
        raise ValueError("weights must be nonnegative")
    squeeze = weights.dim() == 1
    w = weights.reshape(n, -1)
    col_tot = w.sum(dim=0)
    if bool((col_tot <= 0).any()):
        raise ValueError("each weight column must have positive total")
    w = w / col_tot

    z = tangent_mean(points, w, kappa)  # (P, d) initial guess
    if not one_shot:
        iters = max_iter if fixed_iters is None else fixed_iters
        for _ in range(iters):
            tang = log_map(z.unsqueeze(1), points.unsqueeze(0), kappa)  # (P, N, d)
            m = (w.transpose(0, 1).unsqueeze(-1) * tang).sum(dim=1)  # (P, d)
            if fixed_iters is None and float(m.norm(dim=-1).max()) < tol:
                break
            z = exp_map(z, m, kappa)
    return z[0] if squeeze else z
