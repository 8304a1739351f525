"""Grid worlds with coins, a goal and a danger cell.

The simulator state is the agent cell plus a bitmask of collected coins, so
the environment is Markov even though feedback depends on what happened
during the whole episode.  Goal and danger cells are absorbing.  Each move
goes in the intended direction with probability ``intended_prob`` and in each
other direction with the remaining mass split evenly; a move into a wall or
off the grid leaves the agent in place.

Augmented states are indexed ``mask * width * height + row * width + col``.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import CapacityError, ConfigurationError, GridParseError, SynthesisError
from .feedback import WeightBlocks, feedback_probabilities
from .mdp import TabularMdp, Trajectory, TrajectoryBatch, sample_trajectories
from .mle import FeedbackDataset, SolverConfig, fit_mle

log = logging.getLogger(__name__)

ACTIONS = ("up", "down", "left", "right")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
SYMBOLS = set(".#SGDC")
MAX_STATES = 10**6


class GridState(NamedTuple):
    cell: tuple
    mask: int = 0


@dataclass(frozen=True, eq=False)
class GridSpec:
    rows: tuple  # map text, one string per row
    start: tuple
    goal: tuple
    danger: tuple | None
    coins: tuple  # coin cells, numbered row-major
    horizon: int = 50
    intended_prob: float = 0.91

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError("horizon must be positive")
        if not 0.0 <= self.intended_prob <= 1.0:
            raise ConfigurationError("intended_prob must lie in [0, 1]")

    @property
    def height(self):
        return len(self.rows)

    @property
    def width(self):
        return len(self.rows[0])

    @property
    def num_coins(self):
        return len(self.coins)

    @property
    def num_cells(self):
        return self.width * self.height

    @property
    def num_states(self):
        return self.num_cells << self.num_coins

    @property
    def feature_dim(self):
        return 4 + self.num_coins

    def is_wall(self, cell):
        r, c = cell
        return self.rows[r][c] == "#"

    def in_bounds(self, cell):
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_absorbing(self, cell):
        return cell == self.goal or cell == self.danger

    def with_options(self, horizon=None, intended_prob=None):
        return GridSpec(self.rows, self.start, self.goal, self.danger, self.coins,
                        self.horizon if horizon is None else horizon,
                        self.intended_prob if intended_prob is None else intended_prob)

    def state_index(self, state: GridState):
        r, c = state.cell
        return state.mask * self.num_cells + r * self.width + c

    def decode(self, index) -> GridState:
        mask, cell = divmod(int(index), self.num_cells)
        return GridState(divmod(cell, self.width), mask)

    @cached_property
    def _coin_bit(self):
        return {cell: 1 << i for i, cell in enumerate(self.coins)}

    def direction_probs(self, action):
        other = (1.0 - self.intended_prob) / 3.0
        p = np.full(4, other)
        p[action] = self.intended_prob
        return p

    def move(self, state: GridState, direction) -> GridState:
        """Deterministic outcome once the realized direction is known."""
        if self.is_absorbing(state.cell):
            return state
        dr, dc = MOVES[direction]
        nxt = (state.cell[0] + dr, state.cell[1] + dc)
        if not self.in_bounds(nxt) or self.is_wall(nxt):
            return state
        return GridState(nxt, state.mask | self._coin_bit.get(nxt, 0))

    def initial_state(self):
        return GridState(self.start, 0)


def parse_grid_map(text, horizon=50, intended_prob=0.91) -> GridSpec:
    """Parse an ASCII map: ``.`` empty, ``#`` wall, ``S`` start, ``G`` goal,
    ``D`` danger, ``C`` coin."""
    lines = text.replace("\r\n", "\n").split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise GridParseError("empty map")
    width = len(lines[0])
    if width == 0:
        raise GridParseError("empty first row", line=1)
    start = goal = danger = None
    coins = []
    for r, line in enumerate(lines):
        if len(line) != width:
            raise GridParseError(f"row has length {len(line)}, expected {width}", line=r + 1)
        for c, ch in enumerate(line):
            where = dict(line=r + 1, column=c + 1)
            if ch not in SYMBOLS:
                raise GridParseError(f"unknown symbol {ch!r}", **where)
            if ch == "S":
                if start is not None:
                    raise GridParseError("second start cell", **where)
                start = (r, c)
            elif ch == "G":
                if goal is not None:
                    raise GridParseError("second goal cell", **where)
                goal = (r, c)
            elif ch == "D":
                if danger is not None:
                    raise GridParseError("second danger cell", **where)
                danger = (r, c)
            elif ch == "C":
                coins.append((r, c))
    if start is None:
        raise GridParseError("map has no start cell 'S'")
    if goal is None:
        raise GridParseError("map has no goal cell 'G'")
    return GridSpec(tuple(lines), start, goal, danger, tuple(coins), horizon, intended_prob)


def load_grid(path_or_name, horizon=50, intended_prob=0.91) -> GridSpec:
    """Load a map file, or a shipped map by name (``paper_8x8``, ``desk_5x5``)."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        name = path.name if path.suffix == ".txt" else path.name + ".txt"
        shipped = resources.files("kfeed").joinpath("grids", name)
        if not shipped.is_file():
            raise FileNotFoundError(f"no map file or shipped map named {path_or_name!r}")
        text = shipped.read_text(encoding="utf-8")
    return parse_grid_map(text, horizon, intended_prob)


def grid_step(spec: GridSpec, state: GridState, action, rng) -> GridState:
    direction = int(np.searchsorted(np.cumsum(spec.direction_probs(action))[:-1],
                                    rng.random(), side="right"))
    return spec.move(state, direction)


def to_tabular_mdp(spec: GridSpec) -> TabularMdp:
    """Exact product-space MDP; wall cells are kept as unreachable self-loops."""
    S = spec.num_states
    if S > MAX_STATES:
        raise CapacityError(f"{S} augmented states exceed the guard of {MAX_STATES}")
    P = np.zeros((S, 4, S))
    for index in range(S):
        state = spec.decode(index)
        if spec.is_wall(state.cell):
            P[index, :, index] = 1.0
            continue
        for action in range(4):
            for direction, p in enumerate(spec.direction_probs(action)):
                if p > 0:
                    P[index, action, spec.state_index(spec.move(state, direction))] += p
    rho = np.zeros(S)
    rho[spec.state_index(spec.initial_state())] = 1.0
    return TabularMdp(S, 4, spec.horizon, P, rho)


def _manhattan(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def state_features(spec: GridSpec, state: GridState):
    """Features of an episode that ends in ``state``.

    Distances to goal and danger are divided by ``width + height - 2``, and
    the whole vector by ``sqrt(4 + c)``, so its norm is at most one.
    """
    span = max(spec.width + spec.height - 2, 1)
    cell = state.cell
    d_goal = _manhattan(cell, spec.goal) / span
    d_danger = _manhattan(cell, spec.danger) / span if spec.danger is not None else 0.0
    coins = [(state.mask >> i) & 1 for i in range(spec.num_coins)]
    raw = np.array([d_goal, d_danger, float(cell == spec.goal), float(cell == spec.danger)]
                   + coins, dtype=float)
    return raw / np.sqrt(spec.feature_dim)


def extract_features(spec: GridSpec, trajectory: Trajectory):
    return state_features(spec, spec.decode(trajectory.states[-1]))


def feature_table(spec: GridSpec):
    """(num_states, 4 + c) array: features of an episode ending in each state."""
    return np.array([state_features(spec, spec.decode(i)) for i in range(spec.num_states)])


def _check_levels(spec, k):
    if k < spec.num_coins + 1:
        raise ConfigurationError(f"K={k} is too small for {spec.num_coins} coins (need K >= c + 1)")


def state_label(spec: GridSpec, state: GridState, k):
    """Rule-based level for an episode ending in ``state``.

    Danger gives 0 and all coins plus goal gives K-1.  Other outcomes with m
    coins get one level per coin when K = c + 1, and ``round((K-2) m / c)``
    otherwise, capped at K-2 in both cases.
    """
    _check_levels(spec, k)
    if state.cell == spec.danger:
        return 0
    c = spec.num_coins
    m = bin(state.mask).count("1")
    if m == c and state.cell == spec.goal:
        return k - 1
    if c == 0:
        return 0
    level = m if k == c + 1 else int(np.floor((k - 2) * m / c + 0.5))
    return min(level, k - 2)


def rule_based_label(spec: GridSpec, trajectory: Trajectory, k):
    return state_label(spec, spec.decode(trajectory.states[-1]), k)


def label_table(spec: GridSpec, k):
    return np.array([state_label(spec, spec.decode(i), k) for i in range(spec.num_states)],
                    dtype=np.int64)


def _distance_field(spec: GridSpec, targets, blocked):
    dist = np.full((spec.height, spec.width), np.inf)
    queue = deque()
    for t in targets:
        dist[t] = 0
        queue.append(t)
    while queue:
        r, c = queue.popleft()
        for dr, dc in MOVES:
            nxt = (r + dr, c + dc)
            if (spec.in_bounds(nxt) and not spec.is_wall(nxt) and nxt not in blocked
                    and dist[nxt] == np.inf):
                dist[nxt] = dist[r, c] + 1
                queue.append(nxt)
    return dist


def scripted_policy(spec: GridSpec):
    """Deterministic coin-then-goal walker on the augmented state space.

    Heads for the nearest uncollected coin (never through goal or danger),
    then for the goal.  States with no route get the uniform distribution.
    """
    policy = np.full((spec.num_states, 4), 0.25)
    full = (1 << spec.num_coins) - 1
    fields = {}
    for index in range(spec.num_states):
        state = spec.decode(index)
        if spec.is_wall(state.cell) or spec.is_absorbing(state.cell):
            continue
        if state.mask != full:
            targets = tuple(cell for i, cell in enumerate(spec.coins) if not (state.mask >> i) & 1)
            blocked = {spec.goal, spec.danger}
        else:
            targets, blocked = (spec.goal,), {spec.danger}
        key = (targets, frozenset(blocked))
        if key not in fields:
            fields[key] = _distance_field(spec, targets, blocked - set(targets))
        dist = fields[key]
        best, best_d = None, dist[state.cell]
        for action, (dr, dc) in enumerate(MOVES):
            nxt = (state.cell[0] + dr, state.cell[1] + dc)
            if spec.in_bounds(nxt) and dist[nxt] < best_d:
                best, best_d = action, dist[nxt]
        if best is not None:
            policy[index] = 0.0
            policy[index, best] = 1.0
    return policy


def sample_outcomes(spec: GridSpec, mdp: TabularMdp, num, rng, scripted_fraction=0.3):
    """Episodes from a mix of uniform-random and scripted coin-then-goal rollouts."""
    n_scripted = int(round(scripted_fraction * num))
    parts = []
    if num - n_scripted > 0:
        parts.append(sample_trajectories(mdp, np.full((spec.num_states, 4), 0.25),
                                         num - n_scripted, rng))
    if n_scripted > 0:
        parts.append(sample_trajectories(mdp, scripted_policy(spec), n_scripted, rng))
    batch = TrajectoryBatch(np.concatenate([b.states for b in parts]),
                            np.concatenate([b.actions for b in parts]))
    order = rng.permutation(num)
    return TrajectoryBatch(batch.states[order], batch.actions[order])


def label_agreement(spec: GridSpec, weights: WeightBlocks, final_states):
    """Fraction of episodes whose most likely level equals the rule-based label."""
    phi = feature_table(spec)[final_states]
    labels = label_table(spec, weights.k)[final_states]
    return float(np.mean(np.argmax(feedback_probabilities(weights, phi), axis=1) == labels))


def synthesize_true_weights(spec: GridSpec, k, bound, rng, num_trajectories=20000,
                            scripted_fraction=0.3, holdout=0.2, min_agreement=0.9,
                            max_bound=None, solver=None) -> WeightBlocks:
    """Fit ground-truth class weights to the rule-based labels.

    The fitted blocks are centred (probabilities are unchanged by a common
    shift) and scaled so every block has norm at most ``bound / k``.  If the
    held-out argmax agreement falls below ``min_agreement`` the bound is
    doubled, up to ``max_bound``.
    """
    _check_levels(spec, k)
    if num_trajectories < 10:
        raise ConfigurationError("need at least 10 trajectories to synthesize weights")
    max_bound = 8.0 * bound if max_bound is None else max_bound
    solver = solver or SolverConfig(max_iters=5000)
    mdp = to_tabular_mdp(spec)
    final = sample_outcomes(spec, mdp, num_trajectories, rng, scripted_fraction).states[:, -1]
    n_hold = max(1, int(round(holdout * num_trajectories)))
    train, held = final[n_hold:], final[:n_hold]
    phis, labels = feature_table(spec), label_table(spec, k)
    data = FeedbackDataset.from_arrays(phis[train], labels[train], k)

    B = float(bound)
    agreement = 0.0
    while True:
        fit = fit_mle(data, B, solver)
        blocks = fit.weights.reshape(k, spec.feature_dim)
        blocks = blocks - blocks.mean(axis=0)
        largest = np.linalg.norm(blocks, axis=1).max()
        if largest > B / k:
            blocks = blocks * (B / k / largest)
        weights = WeightBlocks(blocks, B)
        agreement = label_agreement(spec, weights, held)
        log.info("synthesized weights with B=%g: held-out agreement %.4f", B, agreement)
        if agreement >= min_agreement:
            return weights
        if 2 * B > max_bound + 1e-12:
            break
        B *= 2
    raise SynthesisError(f"held-out agreement {agreement:.3f} below {min_agreement} at B={B:g}",
                         agreement)
