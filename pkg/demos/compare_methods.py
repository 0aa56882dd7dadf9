"""Max variance-to-target ratio of each method at a shared privacy cost."""

# %%
import sys

import numpy as np

from ffu import baselines
from ffu.workloads import gen_identity_sum, gen_marginals, gen_random_range, targets_random

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0

# %%
cases = {
    "random-range-64": (gen_random_range(64, 128, seed), np.ones(128)),
    "identity-sum-64": (gen_identity_sum(64), np.ones(65)),
    "marginals-3x4": (gen_marginals(3, 4), np.ones(gen_marginals(3, 4).m)),
}
w = gen_random_range(32, 64, seed)
cases["random-range-32, random targets"] = (w, targets_random(64, 1, 10, seed).values)

results = {name: baselines.compare(w, c) for name, (w, c) in cases.items()}
print(baselines.comparison_csv(results))
