"""Tabular softmax policies and REINFORCE policy-gradient ascent.

``theta`` is an ``(S, A)`` array of logits; row ``s`` defines pi(.|s).
Reward functions map a :class:`~kfeed.mdp.TrajectoryBatch` to one value per
trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .feedback import softmax
from .mdp import TabularMdp, Trajectory, TrajectoryBatch, sample_trajectories


@dataclass
class PlannerConfig:
    step_size: float = 0.1
    rollouts: int = 50
    epsilon: float = 1e-3
    max_iters: int = 300

    def __post_init__(self):
        if not self.step_size > 0 or not self.epsilon > 0:
            raise ValueError("step_size and epsilon must be positive")
        if self.rollouts < 1 or self.max_iters < 1:
            raise ValueError("rollouts and max_iters must be at least 1")


@dataclass
class PolicyFit:
    theta: np.ndarray
    iterations: int
    converged: bool


def uniform_theta(mdp: TabularMdp):
    return np.zeros((mdp.num_states, mdp.num_actions))


def action_probabilities(theta, s=None):
    """pi(.|s), or the full (S, A) table when ``s`` is None."""
    theta = np.asarray(theta, dtype=float)
    return softmax(theta if s is None else theta[s])


def batch_score(theta, batch: TrajectoryBatch, weights=None):
    """sum_r weights[r] * sum_t grad log pi(a_t|s_t) for trajectories r of ``batch``.

    d log pi(a_t|s_t) / d theta[s, a] = 1{s_t = s} (1{a_t = a} - pi(a|s)).
    """
    theta = np.asarray(theta, dtype=float)
    S, A = theta.shape
    pi = action_probabilities(theta)
    s = batch.states[:, :-1]
    H = s.shape[1]
    w = np.ones(len(batch)) if weights is None else np.asarray(weights, dtype=float)
    w = np.repeat(w, H)
    s = s.reshape(-1)
    taken = np.bincount(s * A + batch.actions.reshape(-1), weights=w, minlength=S * A)
    visits = np.bincount(s, weights=w, minlength=S)
    return taken.reshape(S, A) - visits[:, None] * pi


def log_policy_gradient(theta, trajectory: Trajectory):
    """Gradient of sum_t log pi(a_t|s_t) with respect to ``theta``."""
    return batch_score(theta, trajectory.as_batch())


def reinforce_gradient(mdp: TabularMdp, theta, reward_fn, config: PlannerConfig, rng):
    """Monte-Carlo estimate of E[R(tau) sum_t grad log pi(a_t|s_t)]."""
    batch = sample_trajectories(mdp, action_probabilities(theta), config.rollouts, rng, check=False)
    rewards = np.asarray(reward_fn(batch), dtype=float)
    return batch_score(theta, batch, rewards / config.rollouts)


def optimize_policy(mdp: TabularMdp, reward_fn, config: PlannerConfig, theta=None, rng=None,
                    gradient_fn=None, value_fn=None) -> PolicyFit:
    """Gradient ascent ``theta += step * grad`` until ``||delta theta|| < epsilon``.

    ``gradient_fn(theta)`` overrides the REINFORCE estimate (for instance with
    an exact gradient).  If ``value_fn(theta)`` is given, a step that lowers
    the value is retried at half the step size.
    """
    theta = uniform_theta(mdp) if theta is None else np.array(theta, dtype=float)
    if gradient_fn is None:
        if rng is None:
            raise ValueError("an rng is needed for sampled gradients")

        def gradient_fn(th):
            return reinforce_gradient(mdp, th, reward_fn, config, rng)

    value = value_fn(theta) if value_fn is not None else None
    for it in range(1, config.max_iters + 1):
        grad = gradient_fn(theta)
        step = config.step_size
        new = theta + step * grad
        if value_fn is not None:
            for _ in range(50):
                new_value = value_fn(new)
                if new_value >= value:
                    break
                step *= 0.5
                new = theta + step * grad
            else:
                return PolicyFit(theta, it, True)
            value = new_value
        if not np.all(np.isfinite(new)):
            raise NumericError(f"non-finite policy parameters at ascent iteration {it}")
        moved = np.linalg.norm(new - theta)
        theta = new
        if moved < config.epsilon:
            return PolicyFit(theta, it, True)
    return PolicyFit(theta, config.max_iters, False)


def policy_value_estimate(mdp: TabularMdp, theta, reward_fn, num_rollouts, rng,
                          return_stderr=False):
    """Monte-Carlo mean of ``reward_fn`` over episodes drawn from pi_theta."""
    if num_rollouts < 1:
        raise ValueError("num_rollouts must be at least 1")
    batch = sample_trajectories(mdp, action_probabilities(theta), num_rollouts, rng, check=False)
    rewards = np.asarray(reward_fn(batch), dtype=float)
    mean = math.fsum(rewards) / num_rollouts  # correctly rounded, exact for constants
    if return_stderr:
        sem = float(rewards.std(ddof=1) / np.sqrt(num_rollouts)) if num_rollouts > 1 else 0.0
        return mean, sem
    return mean
