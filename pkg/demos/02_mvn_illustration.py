#!/usr/bin/env python3
"""Stein flow on the 3-D illustration target.

The target is a multivariate normal whose third coordinate is nearly
unidentified (precision 0.0025, i.e. standard deviation 20).  A sparsifying
prior should park theta3 at zero while the ensemble still recovers the
(theta1, theta2) moments; cranking the penalty trades distribution accuracy
for sparsity.
"""

import numpy as np

from csvgd.engine import SvgdConfig, init_vector_ensemble, run_csvgd
from csvgd.experiments import MVN_MEAN, MVN_PRECISION, mvn_ensemble_error
from csvgd.kernels import KernelSpec
from csvgd.likelihoods import MvnTarget
from csvgd.metrics import sparsity_l1
from csvgd.priors import PriorSpec

target = MvnTarget(MVN_MEAN, MVN_PRECISION)
print(f"target mean {MVN_MEAN}, theta3 std {1/np.sqrt(MVN_PRECISION[2,2]):.0f}")

for lam in (0.1, 1.0):
    cfg = SvgdConfig(step_size=1e-2, max_iters=3000,
                     kernel=KernelSpec(2, 1.0, "median"),
                     prior=PriorSpec(1.0, lam), condense_enabled=False)
    ens = init_vector_ensemble(3, 128, seed=0)
    ens, report = run_csvgd(ens, target, cfg)
    P = ens.particles
    print(f"\nlambda = {lam}")
    print(f"  ensemble mean      {np.array2string(P.mean(axis=0), precision=3)}")
    print(f"  ensemble std       {np.array2string(P.std(axis=0), precision=3)}")
    print(f"  theta3 L1 sparsity {sparsity_l1(P, [2]):.3f}")
    print(f"  bhattacharyya      {mvn_ensemble_error(P):.3f} (full)  "
          f"{mvn_ensemble_error(P, dims=(0, 1)):.4f} (theta1, theta2)")

print("\nhigher lambda: theta3 collapses toward 0 and the full-space distance")
print("grows; the identified (theta1, theta2) marginal degrades far less.")
