"""
Multilevel feedback from a softmax model
========================================

An episode is scored on a scale 0..K-1.  Each level i has its own weight
block w_i, and the chance of level i is proportional to exp(w_i . phi).
"""

# %%
# Probabilities and the expected level
import numpy as np

from kfeed import WeightBlocks, feedback_probabilities, true_expected_reward

rng = np.random.default_rng(0)
k, d = 4, 3
w = WeightBlocks(rng.normal(size=(k, d)), bound=10.0)
phi = np.array([0.2, -0.5, 0.4])

p = feedback_probabilities(w, phi)
print("P(level):", np.round(p, 4))
print("expected level:", true_expected_reward(w, phi))

# %%
# Adding the same vector to every block changes nothing, which is why only
# the differences between blocks can ever be learned.
shift = rng.normal(size=d)
print("after a common shift:", np.round(feedback_probabilities(w.blocks + shift, phi), 4))

# %%
# Noisy raters: with probability eps the level is drawn uniformly instead.
from kfeed import mix_with_uniform_noise, sample_feedback

for eps in (0.0, 0.2, 0.4):
    levels = [sample_feedback(w, phi, rng, noise_level=eps) for _ in range(20000)]
    freq = np.bincount(levels, minlength=k) / len(levels)
    print(f"eps={eps}: empirical {np.round(freq, 3)}  model {np.round(mix_with_uniform_noise(p, eps), 3)}")
