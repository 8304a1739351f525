"""
Estimating the feedback weights
===============================

Projected gradient descent on the negative log-likelihood, constrained to a
ball of radius B.  The error shrinks roughly like 1/sqrt(n).
"""

# %%
import numpy as np

from kfeed import (FeedbackDataset, fit_mle, negative_log_likelihood, practical_confidence_width,
                   sample_level, feedback_probabilities)

rng = np.random.default_rng(1)
k, d, B = 3, 3, 2.0
w_star = rng.normal(size=(k, d))
w_star -= w_star.mean(axis=0)  # centred blocks: the identifiable representative
w_star *= 1.5 / np.linalg.norm(w_star)

phi = rng.normal(size=(4000, d))
phi /= np.maximum(1.0, np.linalg.norm(phi, axis=1))[:, None]
y = sample_level(feedback_probabilities(w_star, phi), rng)

# %%
# Fit on growing prefixes of the same stream.
for n in (250, 1000, 4000):
    data = FeedbackDataset.from_arrays(phi[:n], y[:n], k)
    fit = fit_mle(data, B)
    print(f"n={n:5d}  ||w_hat - w*|| = {np.linalg.norm(fit.weights - w_star.ravel()):.3f}  "
          f"loss {fit.loss:.4f} vs truth {negative_log_likelihood(w_star.ravel(), data):.4f}  "
          f"({fit.iterations} iterations)")

# %%
# The bonus the agent adds in practice is c / sqrt(n).
print([round(practical_confidence_width(10.0, n), 3) for n in (1, 4, 100, 1500)])

# %%
# The high-probability width from the theory is astronomically large here:
# the design matrix is singular along the shift direction, so only the ridge
# keeps its smallest eigenvalue positive.
from kfeed import ConfidenceConstants, design_matrix_sigma, min_eigenvalue, theoretical_confidence_width

lam = min_eigenvalue(design_matrix_sigma(data), ridge=1e-6)
consts = ConfidenceConstants.from_bound(B, k, delta=0.1)
print("lambda_min:", lam, " width:", theoretical_confidence_width(consts, k, B, lam, len(data)))
