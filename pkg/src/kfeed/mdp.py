"""Finite episodic MDPs with known transitions.

States and actions are integer indices.  A policy is an ``(S, A)`` array whose
rows are action distributions.  Reward functions act on a whole
:class:`TrajectoryBatch` and return one value per row, which keeps rollouts
vectorized.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapacityError

ROW_TOL = 1e-9
MAX_ENUMERATION = 10**6


def _check_distribution(p, what, axis=-1):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{what} has negative or non-finite entries")
    if np.any(np.abs(p.sum(axis=axis) - 1.0) > ROW_TOL):
        raise ValueError(f"{what} rows must sum to 1")
    return p


def _cumulative(p):
    # last column pinned to 1 so a uniform draw in [0, 1) always lands in range
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


@dataclass(frozen=True, eq=False)
class TabularMdp:
    num_states: int
    num_actions: int
    horizon: int
    transition: np.ndarray  # (S, A, S), P(s'|s, a)
    initial_dist: np.ndarray  # (S,)

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1 or self.horizon < 1:
            raise ValueError("num_states, num_actions and horizon must be positive")
        P = np.asarray(self.transition, dtype=float)
        if P.shape != (self.num_states, self.num_actions, self.num_states):
            raise ValueError(f"transition has shape {P.shape}")
        _check_distribution(P, "transition")
        rho = np.asarray(self.initial_dist, dtype=float)
        if rho.shape != (self.num_states,):
            raise ValueError(f"initial_dist has shape {rho.shape}")
        _check_distribution(rho, "initial_dist")
        P.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial_dist", rho)

    @cached_property
    def _cum_transition(self):
        return _cumulative(self.transition)

    @cached_property
    def _cum_initial(self):
        return _cumulative(self.initial_dist)

    def check_state(self, s):
        if not 0 <= s < self.num_states:
            raise IndexError(f"state {s} out of range [0, {self.num_states})")

    def check_action(self, a):
        if not 0 <= a < self.num_actions:
            raise IndexError(f"action {a} out of range [0, {self.num_actions})")

    def check_policy(self, policy):
        policy = np.asarray(policy, dtype=float)
        if policy.shape != (self.num_states, self.num_actions):
            raise ValueError(f"policy has shape {policy.shape}")
        return _check_distribution(policy, "policy")


@dataclass(frozen=True)
class Trajectory:
    """``states`` holds s_0..s_H, ``actions`` holds a_0..a_{H-1}."""

    states: tuple
    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("a trajectory needs exactly one more state than actions")

    @property
    def horizon(self):
        return len(self.actions)

    def validate(self, mdp: TabularMdp):
        if self.horizon != mdp.horizon:
            raise ValueError(f"trajectory length {self.horizon} != horizon {mdp.horizon}")
        for s in self.states:
            mdp.check_state(s)
        for a in self.actions:
            mdp.check_action(a)

    def as_batch(self) -> TrajectoryBatch:
        return TrajectoryBatch(np.array([self.states]), np.array([self.actions]))


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Row-stacked trajectories: ``states`` is (M, H+1), ``actions`` is (M, H)."""

    states: np.ndarray
    actions: np.ndarray

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(self.states[i], self.actions[i])

    @classmethod
    def from_trajectories(cls, trajectories):
        trajectories = list(trajectories)
        return cls(np.array([t.states for t in trajectories], dtype=np.int64),
                   np.array([t.actions for t in trajectories], dtype=np.int64))


def sample_transition(mdp: TabularMdp, s: int, a: int, rng: np.random.Generator) -> int:
    mdp.check_state(s)
    mdp.check_action(a)
    return int(np.searchsorted(mdp._cum_transition[s, a], rng.random(), side="right"))


def sample_trajectory(mdp: TabularMdp, policy, rng: np.random.Generator) -> Trajectory:
    """Roll out one episode: s_0 ~ rho, a_t ~ policy(.|s_t), s_{t+1} ~ P(.|s_t, a_t)."""
    cum_pi = _cumulative(mdp.check_policy(policy))
    s = int(np.searchsorted(mdp._cum_initial, rng.random(), side="right"))
    states, actions = [s], []
    for _ in range(mdp.horizon):
        a = int(np.searchsorted(cum_pi[s], rng.random(), side="right"))
        s = sample_transition(mdp, s, a, rng)
        actions.append(a)
        states.append(s)
    return Trajectory(states, actions)


def sample_trajectories(mdp: TabularMdp, policy, num: int, rng: np.random.Generator,
                        check: bool = True) -> TrajectoryBatch:
    """Vectorized version of :func:`sample_trajectory` for ``num`` independent episodes."""
    if num < 1:
        raise ValueError("num must be positive")
    policy = mdp.check_policy(policy) if check else policy
    cum_pi = _cumulative(policy)
    cum_P = mdp._cum_transition
    H = mdp.horizon
    u = rng.random((num, 2 * H + 1))
    states = np.empty((num, H + 1), dtype=np.int64)
    actions = np.empty((num, H), dtype=np.int64)
    s = (mdp._cum_initial[None, :] <= u[:, :1]).sum(axis=1)
    states[:, 0] = s
    for t in range(H):
        a = (cum_pi[s] <= u[:, 2 * t + 1:2 * t + 2]).sum(axis=1)
        s = (cum_P[s, a] <= u[:, 2 * t + 2:2 * t + 3]).sum(axis=1)
        actions[:, t] = a
        states[:, t + 1] = s
    return TrajectoryBatch(states, actions)


def enumeration_size(mdp: TabularMdp) -> int:
    return mdp.num_states ** (mdp.horizon + 1) * mdp.num_actions ** mdp.horizon


def enumerate_trajectory_arrays(mdp: TabularMdp, policy, max_entries: int = MAX_ENUMERATION):
    """All realizable trajectories as a batch plus their exact probabilities.

    Probabilities follow rho(s_0) pi(a_0|s_0) P(s_1|s_0,a_0) ...; branches of
    probability zero are dropped.
    """
    size = enumeration_size(mdp)
    if size > max_entries:
        raise CapacityError(f"{size} candidate trajectories exceed the guard of {max_entries}")
    policy = mdp.check_policy(policy)
    P = mdp.transition
    S, A = mdp.num_states, mdp.num_actions
    start = np.flatnonzero(mdp.initial_dist > 0)
    states = start[:, None]
    actions = np.empty((len(start), 0), dtype=np.int64)
    prob = mdp.initial_dist[start]
    for _ in range(mdp.horizon):
        s = states[:, -1]
        branch = prob[:, None, None] * policy[s][:, :, None] * P[s]  # (M, A, S)
        row, a, s_next = np.nonzero(branch > 0)
        prob = branch[row, a, s_next]
        states = np.column_stack([states[row], s_next])
        actions = np.column_stack([actions[row], a])
    return TrajectoryBatch(states.astype(np.int64), actions.astype(np.int64)), prob


def enumerate_trajectories(mdp: TabularMdp, policy, max_entries: int = MAX_ENUMERATION):
    """List of ``(Trajectory, probability)`` pairs covering every realizable episode."""
    batch, prob = enumerate_trajectory_arrays(mdp, policy, max_entries)
    return [(batch[i], float(prob[i])) for i in range(len(batch))]


def random_mdp(num_states, num_actions, horizon, rng, sparsity=0.0) -> TabularMdp:
    """Dirichlet-random instance; used by tests and the oracle checks."""
    P = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    if sparsity > 0:
        mask = rng.random(P.shape) < sparsity
        mask[..., 0] = False
        P = np.where(mask, 0.0, P)
        P /= P.sum(axis=-1, keepdims=True)
    rho = rng.dirichlet(np.ones(num_states))
    return TabularMdp(num_states, num_actions, horizon, P, rho)
