"""Squared privacy cost of the solver on prefix-sum workloads of growing size."""

# %%
import time

import numpy as np

from ffu.baselines import baseline_ip
from ffu.optimizer import solve
from ffu.workloads import decompose, gen_prefix

# %%
print(f"{'d':>4} {'squared cost':>13} {'ip ratio':>9} {'seconds':>8}")
for d in (2, 4, 8, 16, 32, 64, 128):
    w = gen_prefix(d)
    t0 = time.perf_counter()
    res = solve(decompose(w, "identity"), np.ones(d))
    took = time.perf_counter() - t0
    ip = baseline_ip(w, np.ones(d), res.cost)
    print(f"{d:>4} {res.alpha:>13.4f} {ip.max_ratio:>9.2f} {took:>8.2f}")

# %% the prefix basis gives the same answer with a much sparser L
a = solve(decompose(gen_prefix(16), "identity"), np.ones(16)).alpha
b = solve(decompose(gen_prefix(16), "prefix"), np.ones(16)).alpha
print("identity basis", round(a, 6), " prefix basis", round(b, 6))
