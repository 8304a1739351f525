"""K-UCBVI experiment loop, batch aggregation and result files.

Each episode: plan a softmax policy against the optimistic reward built from
the previous estimate (the first episode uses the uniform policy), roll out
one trajectory, observe one feedback level, refit the estimate.  The true
value of the deployed policy is tracked by Monte-Carlo rollouts against the
true expected reward; the agent never sees it.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, KFeedError
from .feedback import WeightBlocks, feedback_probabilities, mix_with_uniform_noise, sample_level
from .feedback import true_expected_reward
from .gridworld import GridSpec, feature_table, load_grid, synthesize_true_weights, to_tabular_mdp
from .mdp import TabularMdp, sample_trajectories
from .mle import (ConfidenceConstants, FeedbackDataset, SolverConfig, design_matrix_sigma,
                  fit_mle, min_eigenvalue)
from .optimism import BONUS_MODES, OptimisticRewardSpec, optimistic_reward
from .policy import PlannerConfig, action_probabilities, optimize_policy, policy_value_estimate
from .plots import curve_svg

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    grid: str = "paper_8x8"
    k: int = 4
    horizon: int = 50
    episodes: int = 6000
    runs: int = 20
    seed: int = 0
    noise: float = 0.0
    bonus_mode: str = "practical"
    conf_c: float = 10.0
    delta: float = 0.1
    ridge: float = 1e-6
    b: float = 20.0
    weights: str | None = None
    synth_trajectories: int = 20000
    mle_step: float = 1.0
    mle_iters: int = 2000
    mle_tol: float = 1e-6
    refit_every: int = 1
    pg_step: float = 0.1
    pg_samples: int = 50
    pg_eps: float = 1e-3
    pg_iters: int = 300
    eval_rollouts: int = 200
    opt_iters_factor: int = 5
    opt_iters: int | None = None
    opt_samples: int = 500
    opt_eval_rollouts: int = 10000
    jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.episodes < 1 or self.runs < 1:
            raise ConfigurationError("episodes and runs must be at least 1")
        if not 0.0 <= self.noise <= 1.0:
            raise ConfigurationError(f"noise {self.noise} outside [0, 1]")
        if self.bonus_mode not in BONUS_MODES:
            raise ConfigurationError(f"bonus mode must be one of {BONUS_MODES}")
        if self.k < 2:
            raise ConfigurationError("k must be at least 2")
        if self.horizon < 1 or self.refit_every < 1 or self.jobs < 1:
            raise ConfigurationError("horizon, refit_every and jobs must be at least 1")
        if not (self.conf_c > 0 and self.b > 0 and 0 < self.delta <= 1 and self.ridge >= 0):
            raise ConfigurationError("conf_c and b must be positive, delta in (0, 1], ridge >= 0")
        if min(self.pg_samples, self.pg_iters, self.eval_rollouts, self.mle_iters,
               self.opt_samples, self.opt_eval_rollouts, self.opt_iters_factor) < 1:
            raise ConfigurationError("sample and iteration counts must be at least 1")
        if not (self.pg_step > 0 and self.pg_eps > 0 and self.mle_step > 0 and self.mle_tol > 0):
            raise ConfigurationError("step sizes and tolerances must be positive")

    @property
    def planner(self):
        return PlannerConfig(self.pg_step, self.pg_samples, self.pg_eps, self.pg_iters)

    @property
    def optimal_iters(self):
        return self.opt_iters or self.opt_iters_factor * self.pg_iters

    @property
    def solver(self):
        return SolverConfig(self.mle_step, self.mle_iters, self.mle_tol)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name: f for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def desk_config(**overrides):
    """Scaled-down setup: 5x5 map with one coin, K=4, H=20, 1500 episodes, 10 runs.

    Per-episode planner and solver budgets are small; warm starts carry the
    progress from one episode to the next.
    """
    base = dict(grid="desk_5x5", k=4, horizon=20, episodes=1500, runs=10, pg_iters=20,
                pg_step=0.5, mle_iters=50, opt_iters=3000, eval_rollouts=200)
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass(eq=False)
class Environment:
    spec: GridSpec
    mdp: TabularMdp
    w_star: WeightBlocks
    phi: np.ndarray  # (S, d) features of an episode ending in each state
    true_reward: np.ndarray  # (S,)
    true_probs: np.ndarray  # (S, K)


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


# spawn keys for independent random streams
_SYNTH, _OPTIMAL, _AGENT, _FEEDBACK, _EVAL = range(5)


def build_environment(config: ExperimentConfig, w_star: WeightBlocks | None = None) -> Environment:
    spec = load_grid(config.grid, horizon=config.horizon)
    if w_star is None and config.weights:
        w_star = WeightBlocks.load(config.weights)
    if w_star is None:
        w_star = synthesize_true_weights(spec, config.k, config.b, _stream(config.seed, _SYNTH),
                                         num_trajectories=config.synth_trajectories)
    if w_star.k != config.k or w_star.d != spec.feature_dim:
        raise ConfigurationError(f"weights have k={w_star.k}, d={w_star.d}; "
                                 f"config needs k={config.k}, d={spec.feature_dim}")
    phi = feature_table(spec)
    probs = feedback_probabilities(w_star, phi)
    return Environment(spec, to_tabular_mdp(spec), w_star, phi,
                       true_expected_reward(w_star, phi), probs)


def terminal_reward(table):
    """Reward function of a trajectory through a per-final-state table."""
    def reward_fn(batch):
        return table[batch.states[:, -1]]
    return reward_fn


class ValueEstimate(NamedTuple):
    value: float
    stderr: float


def estimate_optimal_value(config: ExperimentConfig, env: Environment | None = None,
                           seed=None) -> ValueEstimate:
    """Best-effort optimum over softmax policies against the true expected reward.

    Plans with a larger budget than the agent (``opt_iters_factor`` times the
    iterations, ``opt_samples`` rollouts per gradient) and evaluates with
    ``opt_eval_rollouts`` episodes.  It is a lower bound on the optimum.
    """
    env = env or build_environment(config)
    rng = _stream(config.seed if seed is None else seed, _OPTIMAL)
    planner = PlannerConfig(config.pg_step, config.opt_samples, config.pg_eps,
                            config.optimal_iters)
    reward_fn = terminal_reward(env.true_reward)
    fit = optimize_policy(env.mdp, reward_fn, planner, rng=rng)
    value, stderr = policy_value_estimate(env.mdp, fit.theta, reward_fn,
                                          config.opt_eval_rollouts, rng, return_stderr=True)
    return ValueEstimate(value, stderr)


@dataclass
class EpisodeRecord:
    run: int
    episode: int
    feedback: int
    value_mc: float
    optimistic_value: float
    w_error: float
    regret_cum: float = float("nan")
    regret_cum_raw: float = float("nan")


def optimistic_table(config: ExperimentConfig, env: Environment, w_hat, data: FeedbackDataset):
    n = len(data)
    if config.bonus_mode == "theoretical":
        constants = ConfidenceConstants.from_bound(config.b, config.k, config.delta)
        lam = min_eigenvalue(design_matrix_sigma(data), config.ridge)
        spec = OptimisticRewardSpec(w_hat, config.k, n, "theoretical", constants=constants,
                                    bound=config.b, lambda_min=lam)
    else:
        spec = OptimisticRewardSpec(w_hat, config.k, n, "practical", c_conf=config.conf_c)
    return optimistic_reward(spec, env.phi)


def run_kucbvi(config: ExperimentConfig, run_seed: int, env: Environment | None = None,
               run_id: int = 0, policy_fn=None) -> list:
    """One run of the K-UCBVI loop; returns one :class:`EpisodeRecord` per episode.

    ``policy_fn(episode, theta)``, if given, replaces the planner output for
    episodes after the first (used for plug-in checks).
    """
    env = env or build_environment(config)
    agent, fb_rng, eval_rng = (_stream(run_seed, key) for key in (_AGENT, _FEEDBACK, _EVAL))
    mdp, k = env.mdp, config.k
    planner, solver = config.planner, config.solver
    true_fn = terminal_reward(env.true_reward)
    w_star = env.w_star.flat
    theta = np.zeros((mdp.num_states, mdp.num_actions))
    w_hat = np.zeros(k * env.spec.feature_dim)
    data = FeedbackDataset(k, env.spec.feature_dim)
    opt_table = np.full(mdp.num_states, k - 1.0)
    records = []
    for n in range(1, config.episodes + 1):
        try:
            if n > 1:
                opt_table = optimistic_table(config, env, w_hat, data)
                if policy_fn is not None:
                    theta = policy_fn(n, theta)
                else:
                    theta = optimize_policy(mdp, terminal_reward(opt_table), planner, theta,
                                            rng=agent).theta
            pi = action_probabilities(theta)
            evals = sample_trajectories(mdp, pi, config.eval_rollouts, eval_rng, check=False)
            final_eval = evals.states[:, -1]
            value_mc = float(env.true_reward[final_eval].mean())
            opt_value = float(opt_table[final_eval].mean())

            s_final = int(sample_trajectories(mdp, pi, 1, agent, check=False).states[0, -1])
            p = env.true_probs[s_final]
            if config.noise:
                p = mix_with_uniform_noise(p, config.noise)
            y = int(sample_level(p, fb_rng))
            data.append(env.phi[s_final], y)
            if n % config.refit_every == 0 or n == config.episodes:
                w_hat = fit_mle(data, config.b, solver, warm_start=w_hat).weights
        except KFeedError as exc:
            raise type(exc)(f"run {run_id} failed at episode {n}: {exc}") from exc
        records.append(EpisodeRecord(run_id, n, y, value_mc, opt_value,
                                     float(np.linalg.norm(w_hat - w_star))))
    return records


@dataclass(eq=False)
class BatchResult:
    config: ExperimentConfig
    v_star: float
    v_star_stderr: float
    seeds: list
    records: list  # one list of EpisodeRecord per run
    wall_time: float = 0.0
    values: np.ndarray = field(init=False, repr=False)
    regret: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.array([[r.value_mc for r in run] for run in self.records])
        self.regret = self.v_star - self.values
        raw = np.cumsum(self.regret, axis=1)
        clipped = np.cumsum(np.maximum(self.regret, 0.0), axis=1)
        for run, cum_c, cum_r in zip(self.records, clipped, raw):
            for rec, c, r in zip(run, cum_c, cum_r):
                rec.regret_cum, rec.regret_cum_raw = float(c), float(r)

    @property
    def episodes(self):
        return self.values.shape[1]

    @property
    def mean(self):
        return self.values.mean(axis=0)

    @property
    def std(self):
        return self.values.std(axis=0)

    @property
    def band(self):
        return self.mean - 2 * self.std, self.mean + 2 * self.std

    @property
    def regret_cum(self):
        return np.cumsum(np.maximum(self.regret, 0.0), axis=1)

    @property
    def regret_cum_raw(self):
        return np.cumsum(self.regret, axis=1)

    def decile_means(self):
        """Mean value over the first and last 10% of episodes (at least one each)."""
        m = max(1, self.episodes // 10)
        return float(self.values[:, :m].mean()), float(self.values[:, -m:].mean())

    def first_reaching(self, threshold):
        """First episode (1-based) at which the mean curve reaches ``threshold``, or None."""
        hits = np.flatnonzero(self.mean >= threshold)
        return int(hits[0]) + 1 if hits.size else None


def _run_one(args):
    config, seed, run_id, w_star = args
    env = build_environment(config, w_star)
    return run_kucbvi(config, seed, env, run_id)


def run_batch(config: ExperimentConfig, env: Environment | None = None,
              v_star: ValueEstimate | None = None) -> BatchResult:
    """Runs with seeds ``seed .. seed + runs - 1``, plus the optimal-value baseline."""
    start = time.perf_counter()
    env = env or build_environment(config)
    if v_star is None:
        v_star = estimate_optimal_value(config, env)
    seeds = [config.seed + r for r in range(config.runs)]
    jobs = [(config, s, r, env.w_star) for r, s in enumerate(seeds)]
    if config.jobs > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = []
        for cfg, s, r, _ in jobs:
            log.info("run %d/%d (seed %d)", r + 1, config.runs, s)
            records.append(run_kucbvi(cfg, s, env, r))
    return BatchResult(config, v_star.value, v_star.stderr, seeds, records,
                       time.perf_counter() - start)


CSV_COLUMNS = ("run", "episode", "feedback", "value_mc", "optimistic_value", "w_error",
               "regret_cum", "regret_cum_raw")


def _fmt(x):
    return f"{x:.6g}"


def episodes_csv(batch: BatchResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for run in batch.records:
        for r in run:
            writer.writerow([r.run, r.episode, r.feedback, _fmt(r.value_mc),
                             _fmt(r.optimistic_value), _fmt(r.w_error), _fmt(r.regret_cum),
                             _fmt(r.regret_cum_raw)])
    return buf.getvalue()


def _rounded(xs):
    return [float(_fmt(x)) for x in xs]


def summary_json(batch: BatchResult) -> str:
    first, last = batch.decile_means()
    doc = {
        # the output directory is left out so that reruns elsewhere compare equal
        "config": {k: v for k, v in batch.config.to_dict().items() if k != "out"},
        "seeds": batch.seeds,
        "v_star": float(_fmt(batch.v_star)),
        "v_star_stderr": float(_fmt(batch.v_star_stderr)),
        "v_star_note": "estimated baseline: best softmax (Markovian) policy found by planning "
                       "on the true reward; a lower bound on the optimum",
        "final_mean_value": float(_fmt(batch.mean[-1])),
        "first_decile_mean_value": float(_fmt(first)),
        "last_decile_mean_value": float(_fmt(last)),
        "mean_curve": _rounded(batch.mean),
        "std_curve": _rounded(batch.std),
        "mean_regret_cum": _rounded(batch.regret_cum.mean(axis=0)),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_results(batch: BatchResult, out_dir) -> dict:
    """Write episodes.csv, summary.json, timing.json and the two SVG curves."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        x = np.arange(1, batch.episodes + 1)
        lo, hi = batch.band
        regret = batch.regret_cum
        r_mean, r_std = regret.mean(axis=0), regret.std(axis=0)
        files = {
            "episodes.csv": episodes_csv(batch),
            "summary.json": summary_json(batch),
            "timing.json": json.dumps({"wall_time_s": round(batch.wall_time, 3)}) + "\n",
            "learning_curve.svg": curve_svg(
                x, [("mean true value", batch.mean, lo, hi),
                    ("estimated optimum", np.full(batch.episodes, batch.v_star), None, None)],
                title=f"True value per episode (K={batch.config.k}, {batch.config.runs} runs)",
                xlabel="episode", ylabel="value"),
            "regret_curve.svg": curve_svg(
                x, [("cumulative regret", r_mean, r_mean - 2 * r_std, r_mean + 2 * r_std)],
                title="Cumulative regret against the estimated optimum",
                xlabel="episode", ylabel="regret"),
        }
        paths = {}
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            paths[name] = path
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return paths
