"""Exhaustive reference computations used to check the sampled estimators."""
from __future__ import annotations

import numpy as np

from .mdp import MAX_ENUMERATION, TabularMdp, enumerate_trajectory_arrays
from .policy import action_probabilities, batch_score


def exact_value(mdp: TabularMdp, theta, reward_fn, max_entries=MAX_ENUMERATION) -> float:
    """sum over realizable tau of Pr(tau) * reward_fn(tau)."""
    batch, prob = enumerate_trajectory_arrays(mdp, action_probabilities(theta), max_entries)
    return float(prob @ np.asarray(reward_fn(batch), dtype=float))


def exact_policy_gradient(mdp: TabularMdp, theta, reward_fn, max_entries=MAX_ENUMERATION):
    """sum over tau of R(tau) Pr(tau) grad log Pr(tau).

    Transition and initial-state factors do not depend on theta, so
    grad log Pr(tau) is the summed policy score.
    """
    batch, prob = enumerate_trajectory_arrays(mdp, action_probabilities(theta), max_entries)
    rewards = np.asarray(reward_fn(batch), dtype=float)
    return batch_score(theta, batch, rewards * prob)


def finite_difference(fn, x, step=1e-6):
    """Central differences of scalar ``fn`` at ``x``, one coordinate at a time."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + step
        f_plus = fn(x)
        flat_x[i] = orig - step
        f_minus = fn(x)
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_error(approx, exact):
    """Norm-wise relative error; falls back to absolute error when ``exact`` is zero."""
    approx, exact = np.asarray(approx, dtype=float), np.asarray(exact, dtype=float)
    scale = np.linalg.norm(exact)
    diff = np.linalg.norm(approx - exact)
    return float(diff / scale) if scale > 0 else float(diff)
