"""Quick oracle and invariant self-checks, run by ``kfeed check``.

Each check compares a production code path with an independent reference on
small random instances and returns ``(passed, detail)``.
"""
from __future__ import annotations

import numpy as np

from .feedback import feedback_probabilities, stack_features, true_expected_reward
from .mdp import enumerate_trajectory_arrays, random_mdp, sample_trajectories
from .mle import FeedbackDataset, negative_log_likelihood, nll_gradient
from .optimism import OptimisticRewardSpec, optimistic_reward
from .oracle import exact_policy_gradient, exact_value, finite_difference, relative_error
from .policy import action_probabilities, batch_score, policy_value_estimate


def random_trajectory_reward(mdp, rng):
    """A non-Markovian reward: a table over (first state, last state, first action)."""
    table = rng.random((mdp.num_states, mdp.num_states, mdp.num_actions))

    def reward_fn(batch):
        return table[batch.states[:, 0], batch.states[:, -1], batch.actions[:, 0]]
    return reward_fn


def check_enumeration_mass(rng, instances=10):
    worst = 0.0
    for _ in range(instances):
        mdp = random_mdp(rng.integers(2, 5), rng.integers(2, 4), rng.integers(1, 4), rng)
        theta = rng.normal(size=(mdp.num_states, mdp.num_actions))
        _, prob = enumerate_trajectory_arrays(mdp, action_probabilities(theta))
        worst = max(worst, abs(prob.sum() - 1.0))
    return worst <= 1e-9, f"max |sum Pr - 1| = {worst:.2e}"


def check_value_vs_sampling(rng, instances=5, rollouts=20000):
    worst = 0.0
    for _ in range(instances):
        mdp = random_mdp(rng.integers(2, 5), rng.integers(2, 4), rng.integers(1, 4), rng)
        theta = rng.normal(size=(mdp.num_states, mdp.num_actions))
        reward_fn = random_trajectory_reward(mdp, rng)
        exact = exact_value(mdp, theta, reward_fn)
        mean, sem = policy_value_estimate(mdp, theta, reward_fn, rollouts, rng, return_stderr=True)
        worst = max(worst, abs(mean - exact) / max(sem, 1e-12))
    return worst <= 4.0, f"max deviation {worst:.2f} standard errors"


def check_policy_gradient(rng, instances=5):
    worst = 0.0
    for _ in range(instances):
        mdp = random_mdp(rng.integers(2, 4), rng.integers(2, 4), rng.integers(1, 4), rng)
        theta = rng.normal(size=(mdp.num_states, mdp.num_actions))
        reward_fn = random_trajectory_reward(mdp, rng)
        grad = exact_policy_gradient(mdp, theta, reward_fn)
        fd = finite_difference(lambda th: exact_value(mdp, th, reward_fn), theta)
        worst = max(worst, relative_error(fd, grad))
    return worst <= 1e-7, f"max relative error {worst:.2e}"


def check_nll_gradient(rng, instances=20):
    worst = 0.0
    for _ in range(instances):
        k, d, n = rng.integers(2, 6), rng.integers(1, 6), rng.integers(1, 51)
        phi = rng.normal(size=(n, d))
        phi /= np.maximum(1.0, np.linalg.norm(phi, axis=1))[:, None]
        data = FeedbackDataset.from_arrays(phi, rng.integers(0, k, size=n), k)
        w = rng.normal(size=k * d)
        fd = finite_difference(lambda v: negative_log_likelihood(v, data), w)
        worst = max(worst, relative_error(fd, nll_gradient(w, data)))
    return worst <= 1e-6, f"max relative error {worst:.2e}"


def check_log_policy_gradient(rng, instances=20):
    worst = 0.0
    for _ in range(instances):
        mdp = random_mdp(rng.integers(2, 6), rng.integers(2, 5), rng.integers(1, 6), rng)
        theta = rng.normal(size=(mdp.num_states, mdp.num_actions))
        traj = sample_trajectories(mdp, action_probabilities(theta), 1, rng)

        def log_prob(th):
            pi = action_probabilities(th)
            return float(np.log(pi[traj.states[0, :-1], traj.actions[0]]).sum())

        fd = finite_difference(log_prob, theta)
        worst = max(worst, relative_error(fd, batch_score(theta, traj)))
    return worst <= 1e-6, f"max relative error {worst:.2e}"


def check_stacked_reward(rng, instances=200):
    worst = 0.0
    for _ in range(instances):
        k, d = rng.integers(2, 7), rng.integers(1, 6)
        w = rng.normal(size=(k, d))
        phi = rng.normal(size=d)
        stacked = stack_features(phi, k) @ w.reshape(-1)
        p = np.exp(stacked - stacked.max())
        p /= p.sum()
        worst = max(worst, abs(p @ np.arange(k) - true_expected_reward(w, phi)))
        worst = max(worst, float(np.abs(p - feedback_probabilities(w, phi)).max()))
    return worst <= 1e-12, f"max discrepancy {worst:.2e}"


def check_optimistic_clamp(rng, draws=20000):
    k, d = 4, 5
    worst = -np.inf
    for _ in range(20):
        w = rng.normal(scale=5.0, size=k * d)
        phi = rng.normal(size=(draws // 20, d))
        spec = OptimisticRewardSpec(w, k, int(rng.integers(1, 100)), c_conf=float(rng.uniform(0.1, 20)))
        worst = max(worst, float(optimistic_reward(spec, phi).max()))
    return worst <= k - 1, f"max optimistic reward {worst:.6f} (cap {k - 1})"


CHECKS = {
    "enumeration probabilities sum to one": check_enumeration_mass,
    "exact value agrees with Monte-Carlo": check_value_vs_sampling,
    "exact policy gradient matches finite differences": check_policy_gradient,
    "NLL gradient matches finite differences": check_nll_gradient,
    "log-policy gradient matches finite differences": check_log_policy_gradient,
    "stacked and blockwise rewards agree": check_stacked_reward,
    "optimistic reward never exceeds K-1": check_optimistic_clamp,
}


def run_checks(seed=0, out=print):
    rng = np.random.default_rng(seed)
    ok = True
    for name, fn in CHECKS.items():
        passed, detail = fn(rng)
        ok &= passed
        out(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return ok
