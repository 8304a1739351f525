"""
REINFORCE against an exact gradient
===================================

On a small MDP every trajectory can be listed, so the policy gradient can be
computed exactly and compared with the sampled estimate.
"""

# %%
import numpy as np

from kfeed import (PlannerConfig, exact_policy_gradient, exact_value, optimize_policy,
                   random_mdp, reinforce_gradient)

rng = np.random.default_rng(2)
mdp = random_mdp(4, 2, 3, rng)
theta = rng.normal(size=(4, 2))


def reward_fn(batch):
    # a reward on the whole trajectory: where it ends, plus how often action 1 was used
    return (batch.states[:, -1] == 3) + 0.2 * batch.actions.sum(axis=1)


exact = exact_policy_gradient(mdp, theta, reward_fn)
for rollouts in (100, 10_000, 100_000):
    est = reinforce_gradient(mdp, theta, reward_fn, PlannerConfig(rollouts=rollouts), rng)
    print(f"{rollouts:6d} rollouts: relative error {np.linalg.norm(est - exact) / np.linalg.norm(exact):.3f}")

# %%
# Gradient ascent with sampled gradients, checked with the exact value.
fit = optimize_policy(mdp, reward_fn, PlannerConfig(step_size=0.5, rollouts=200, max_iters=200),
                      rng=rng)
print("value: uniform", round(exact_value(mdp, np.zeros((4, 2)), reward_fn), 4),
      "-> planned", round(exact_value(mdp, fit.theta, reward_fn), 4),
      f"after {fit.iterations} iterations")
