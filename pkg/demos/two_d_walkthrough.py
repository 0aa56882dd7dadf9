"""Two queries over two cells: solver output against the closed forms."""

# %%
import numpy as np

from ffu import oracles, workloads
from ffu.optimizer import OptimizerConfig, solve, solve_sum_squared
from ffu.privacy import epsilon_for_delta, privacy_profile, query_variances

w = np.array([[1.0, 1.0], [1.0, 0.0]])
# answer the two queries directly: the basis is the workload, L is the identity
dec = workloads.Decomposition("explicit", w, np.eye(2))

# %% every query gets variance at most 1
res = solve(dec, np.ones(2), OptimizerConfig(tol=1e-7))
print("solver sigma\n", res.sigma.sigma.round(6))
print("closed form\n", oracles.twod_fitness(1.0).sigma)
print("squared cost", round(res.alpha, 6), "(4/3 =", round(4 / 3, 6), ")")
print("variances", query_variances(dec, res.sigma).round(6))

# %% minimizing total variance instead, at the same privacy cost
ssq = solve_sum_squared(dec, budget=res.cost)
print("sum-squared variances", query_variances(dec, ssq.sigma).round(4))
print("worst ratio", query_variances(dec, ssq.sigma).max().round(4))

# %% what the cost means in (epsilon, delta) terms
for delta in (1e-5, 1e-9):
    print(f"delta={delta:g}: epsilon={epsilon_for_delta(res.cost, delta):.4f}")
print("profile", privacy_profile(dec, res.sigma).round(6))
