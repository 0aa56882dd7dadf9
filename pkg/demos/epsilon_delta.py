"""The (epsilon, delta) trade-off for a few privacy costs, as CSV."""

# %%
import numpy as np

from ffu.privacy import delta_for_epsilon, epsilon_for_delta

costs = (0.2, 0.4, 0.6, 1.0)
eps = np.round(np.linspace(0.1, 3.0, 30), 3)

print("epsilon," + ",".join(f"cost={c}" for c in costs))
for e in eps:
    print(f"{e}," + ",".join(f"{delta_for_epsilon(c, e):.3e}" for c in costs))

# %% epsilon needed for a fixed delta
for c in costs:
    print(f"cost {c}: epsilon at delta=1e-6 is {epsilon_for_delta(c, 1e-6):.4f}")
