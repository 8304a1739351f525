"""
The coin grid world
===================

Collect the coins, reach the goal, avoid the danger cell.  Moves succeed with
probability 0.91 and slip to each other direction with probability 0.03.
"""

# %%
import numpy as np

from kfeed import (label_table, load_grid, scripted_policy, sample_trajectories,
                   synthesize_true_weights, to_tabular_mdp)

spec = load_grid("paper_8x8")
print("\n".join(spec.rows))
mdp = to_tabular_mdp(spec)
print(f"{spec.num_coins} coins -> {mdp.num_states} cell x coin-mask states, "
      f"feature dimension {spec.feature_dim}")

# %%
# Rule-based levels for K=4: danger 0, one level per coin, all coins plus goal 3.
rng = np.random.default_rng(3)
labels = label_table(spec, 4)
for name, policy in [("uniform", np.full((mdp.num_states, 4), 0.25)),
                     ("scripted", scripted_policy(spec))]:
    final = sample_trajectories(mdp, policy, 2000, rng).states[:, -1]
    print(f"{name:8s} level frequencies:", np.round(np.bincount(labels[final], minlength=4) / 2000, 3))

# %%
# Ground-truth weights fitted so that the most likely level matches the rule.
w_star = synthesize_true_weights(spec, 4, 20.0, rng)
print("block norms:", np.round(w_star.block_norms(), 3), "limit", w_star.bound / w_star.k)
