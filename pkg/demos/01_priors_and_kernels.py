#!/usr/bin/env python3
"""Tour of the sparsifying prior family and the repulsive kernels.

The prior density per coordinate is lam*c1(alpha)*exp(-lam^alpha*c2(alpha)*|t|^alpha).
alpha=2 is a Gaussian; shrinking alpha concentrates mass on the axes, and the
score (the force the Stein flow feels) blows up near zero for alpha < 1 --
that singular pull is what drives weights to exactly zero.
"""

import numpy as np

from csvgd.kernels import (KernelSpec, kernel_eval, kernel_grad,
                           median_bandwidth, silverman_bandwidth)
from csvgd.priors import PriorSpec, prior_constants, prior_score

print("=== prior constants ===")
for alpha in (0.25, 0.5, 1.0, 2.0):
    c1, c2 = prior_constants(alpha)
    print(f"alpha={alpha:<5} c1={c1:.6f}  c2={c2:.6f}")

print("\n=== scores at a few points (lam = 1) ===")
theta = np.array([-1.0, -0.1, -0.01, 0.0, 0.01, 0.1, 1.0])
for alpha in (0.5, 1.0, 2.0):
    s = prior_score(PriorSpec(alpha, 1.0), theta)
    print(f"alpha={alpha:<4}", np.array2string(s, precision=3, suppress_small=True))
print("note the alpha=0.5 pull grows as |t| -> 0 while alpha=2 fades linearly")

print("\n=== kernel family ===")
a = np.zeros(2)
for beta in (1, 2):
    spec = KernelSpec(beta, 1.0)
    for d in (0.1, 1.0, 3.0):
        b = np.array([d, 0.0])
        k = kernel_eval(spec, a, b)
        g = kernel_grad(spec, a, b)
        print(f"beta={beta} |d|={d:<4} kappa={k:.4f}  grad_a={g}")

print("\n=== bandwidth selection ===")
rng = np.random.default_rng(0)
cloud = rng.normal(size=(30, 5))
D = np.linalg.norm(cloud[:, None] - cloud[None], axis=-1)
med = float(np.median(D[np.triu_indices(30, 1)]))
print(f"median pairwise distance  {med:.3f}")
print(f"median-rule bandwidth     {median_bandwidth(med, 30):.3f}")
print(f"silverman bandwidth       {silverman_bandwidth(cloud):.3f}")
