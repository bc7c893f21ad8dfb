from mlmoments import (SolverConfig, estimate_lmoments, gaussian_lmoment,
                       lmoment_rosenblatt_unbiased, solve)
from mlmoments.result import MultiIndex
import numpy as np

A = np.array([[1.0, 0.0], [0.0, 0.5]])
x = np.random.default_rng(seed=1).standard_normal((100, 2)) @ A.T

sol = solve(x, 'uniform', SolverConfig(seed=1))

alphas = [MultiIndex((2, 1)), MultiIndex((1, 2))]
for res in estimate_lmoments(sol, alphas, mc_samples=100_000, seed=2):
    print(f"lambda{res.alpha.indices}:", res.value,
          "model:", gaussian_lmoment([0.0, 0.0], A, res.alpha))

print("status:", sol.status, "after", sol.niter, "iterations")
print("rosenblatt lambda2:", lmoment_rosenblatt_unbiased(x, 2))
