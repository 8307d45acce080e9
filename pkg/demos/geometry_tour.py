#!/usr/bin/env python3
"""A small tour of the ball-model primitives.

Run with: python3 demos/geometry_tour.py
"""
import numpy as np
import torch

from hyperevent import geometry as geo

torch.set_default_dtype(torch.float64)

print("=" * 60)
print("Mobius addition and geodesic distance (curvature -1)")
print("=" * 60)

o = torch.zeros(2)
x = torch.tensor([0.3, 0.0])
y = torch.tensor([0.4, 0.0])

print("o (+) y          :", geo.mobius_add(o, y).tolist())
print("x (+) (-x)       :", geo.mobius_add(x, -x).tolist())
print("x (+) y (1-D law):", geo.mobius_add(x, y).tolist(), " tanh-addition gives 0.625")
print("d(o, (0.5, 0))   :", float(geo.distance(o, torch.tensor([0.5, 0.0]))),
      " = 2*atanh(0.5) = ln 3")

print()
print("=" * 60)
print("Exponential / logarithmic maps are inverse to each other")
print("=" * 60)
v = torch.tensor([0.6, 0.0])
p = geo.exp_map(o, v)
print("exp_o((0.6, 0))  :", p.tolist(), " = (tanh 0.6, 0)")
print("log_o(exp_o(v))  :", geo.log_map(o, p).tolist())

base = torch.tensor([0.2, -0.3])
target = torch.tensor([-0.5, 0.1])
roundtrip = geo.exp_map(base, geo.log_map(base, target))
print("based away from o, |roundtrip - target| =",
      float((roundtrip - target).norm()))

# the conformal factor turns tangent norms into geodesic lengths
lam = float(geo.conformal_factor(base))
print("lambda_x * |log_x(y)| =", lam * float(geo.log_map(base, target).norm()),
      " vs d(x, y) =", float(geo.distance(base, target)))

print()
print("=" * 60)
print("Weighted Frechet means")
print("=" * 60)
rng = np.random.default_rng(0)
pts = torch.tensor([[0.2, 0.0], [0.6, 0.0]])
mean = geo.frechet_mean(pts)
print("mean of (0.2,0) and (0.6,0):", mean.tolist())

# the returned point satisfies the first-order condition: the weighted
# average of log-maps at the mean vanishes
cloud = torch.from_numpy(rng.uniform(-0.5, 0.5, size=(12, 3)))
w = torch.from_numpy(rng.uniform(0.2, 2.0, size=12))
z = geo.frechet_mean(cloud, w, tol=1e-8)
resid = ((w / w.sum()).unsqueeze(-1) * geo.log_map(z, cloud)).sum(0)
print("first-order residual:", float(resid.norm()))

# antipodal pairs average to the origin
pair = torch.tensor([[0.5, 0.2], [-0.5, -0.2]])
print("mean of antipodal pair:", geo.frechet_mean(pair).tolist())

# points near the boundary are pulled back inside by the projection guard
wild = torch.tensor([3.0, 4.0])
print("project_to_ball((3,4)):", geo.project_to_ball(wild).tolist())
