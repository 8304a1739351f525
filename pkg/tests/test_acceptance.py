"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the pytest terminal summary.  The paper-scale run is opt-in: set
``KFEED_PAPER_SCALE=1`` (it takes over an hour on one core).
"""
import os
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES

from kfeed.feedback import feedback_probabilities, sample_level, true_expected_reward
from kfeed.harness import (ExperimentConfig, build_environment, desk_config, emit_results,
                           estimate_optimal_value, run_batch)
from kfeed.mdp import random_mdp, sample_trajectory
from kfeed.mle import (ConfidenceConstants, FeedbackDataset, design_matrix_sigma, fit_mle,
                       min_eigenvalue, negative_log_likelihood, nll_gradient,
                       theoretical_confidence_width, weight_confidence_radius)
from kfeed.optimism import OptimisticRewardSpec, estimated_reward, optimistic_reward
from kfeed.oracle import exact_policy_gradient, exact_value, finite_difference, relative_error
from kfeed.policy import action_probabilities, log_policy_gradient, policy_value_estimate


def unit_ball(rng, n, d):
    phi = rng.normal(size=(n, d))
    return phi / np.maximum(1.0, np.linalg.norm(phi, axis=1))[:, None]


def random_truth(rng, k, d, bound):
    """Random w* with centred blocks (the identifiable representative) and ||w*|| <= bound."""
    w = rng.normal(size=(k, d))
    w -= w.mean(axis=0)
    return w * (bound * rng.uniform(0.2, 1.0) / np.linalg.norm(w))


# 1 ---------------------------------------------------------------------------

def test_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst_sigma, worst_grad, count = 0.0, 0.0, 0
    shapes = [(6, 3, 4), (6, 2, 4), (5, 3, 3), (4, 3, 4)]  # the largest allowed sizes first
    while count < 24:
        S, A, H = shapes[count] if count < len(shapes) else (
            rng.integers(1, 7), rng.integers(1, 4), rng.integers(1, 5))
        mdp = random_mdp(S, A, H, rng, sparsity=rng.uniform(0, 0.5))
        theta = rng.normal(size=(S, A))
        table = rng.random((S, S, A))

        def reward_fn(b):
            return table[b.states[:, 0], b.states[:, -1], b.actions[:, -1]]

        exact = exact_value(mdp, theta, reward_fn)
        mean, sem = policy_value_estimate(mdp, theta, reward_fn, 100_000, rng, return_stderr=True)
        worst_sigma = max(worst_sigma, abs(mean - exact) / sem)
        fd = finite_difference(lambda th: exact_value(mdp, th, reward_fn), theta)
        worst_grad = max(worst_grad, relative_error(fd, exact_policy_gradient(mdp, theta, reward_fn)))
        count += 1
    elapsed = time.perf_counter() - start
    report("criterion 1 (oracle equivalence)",
           worst_sigma <= 3.0 and worst_grad <= 1e-7 and elapsed <= 120,
           f"{count} MDPs; max |MC - exact| = {worst_sigma:.2f} sigma (<= 3); "
           f"max gradient rel. error {worst_grad:.1e} (<= 1e-7); {elapsed:.0f}s (<= 120s)")


# 2 ---------------------------------------------------------------------------

def test_gradient_correctness(report):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst_nll = 0.0
    for _ in range(100):
        k, d, n = rng.integers(2, 6), rng.integers(1, 6), rng.integers(1, 51)
        data = FeedbackDataset.from_arrays(unit_ball(rng, n, d), rng.integers(0, k, n), k)
        w = rng.normal(size=k * d)
        fd = finite_difference(lambda v: negative_log_likelihood(v, data), w)
        worst_nll = max(worst_nll, relative_error(fd, nll_gradient(w, data)))
    worst_pol = 0.0
    for _ in range(100):
        S, A, H = rng.integers(1, 7), rng.integers(2, 5), rng.integers(1, 7)
        mdp = random_mdp(S, A, H, rng)
        theta = rng.normal(size=(S, A))
        traj = sample_trajectory(mdp, action_probabilities(theta), rng)
        s, a = np.array(traj.states[:-1]), np.array(traj.actions)
        fd = finite_difference(lambda th: float(np.log(action_probabilities(th)[s, a]).sum()), theta)
        worst_pol = max(worst_pol, relative_error(fd, log_policy_gradient(theta, traj)))
    elapsed = time.perf_counter() - start
    report("criterion 2 (gradient correctness)",
           worst_nll <= 1e-6 and worst_pol <= 1e-6 and elapsed <= 60,
           f"NLL max rel. error {worst_nll:.1e}, log-policy max rel. error {worst_pol:.1e} "
           f"(<= 1e-6, 100 instances each); {elapsed:.1f}s (<= 60s)")


# 3 ---------------------------------------------------------------------------

def test_mle_consistency(report):
    k, d, bound = 3, 3, 2.0
    sizes = (250, 500, 1000, 2000, 4000)
    start = time.perf_counter()
    errors = {n: [] for n in sizes}
    worst_gap = -np.inf
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        w_star = random_truth(rng, k, d, bound)
        phi = unit_ball(rng, sizes[-1], d)
        y = sample_level(feedback_probabilities(w_star, phi), rng)
        for n in sizes:
            data = FeedbackDataset.from_arrays(phi[:n], y[:n], k)
            fit = fit_mle(data, bound)
            errors[n].append(np.linalg.norm(fit.weights - w_star.reshape(-1)))
            worst_gap = max(worst_gap, fit.loss - negative_log_likelihood(w_star.reshape(-1), data))
    med = {n: float(np.median(e)) for n, e in errors.items()}
    ratio = med[4000] / med[250]
    elapsed = time.perf_counter() - start
    report("criterion 3 (MLE consistency)",
           ratio <= 0.5 and worst_gap <= 1e-3 and elapsed <= 300,
           f"median error {med[250]:.3f} at n=250 -> {med[4000]:.3f} at n=4000 "
           f"(ratio {ratio:.2f} <= 0.5); max l(w_hat) - l(w*) = {worst_gap:.1e} (<= 1e-3); "
           f"{elapsed:.0f}s (<= 300s)")


# 4 ---------------------------------------------------------------------------

def test_confidence_coverage(report):
    k, d, bound, n, delta, ridge = 3, 3, 2.0, 500, 0.1, 1e-6
    rng = np.random.default_rng(99)
    w_star = random_truth(rng, k, d, bound)
    constants = ConfidenceConstants.from_bound(bound, k, delta)
    probe = unit_ball(rng, 2000, d)  # extra trajectories on which the reward bound is checked
    start = time.perf_counter()
    weight_miss = reward_miss = 0
    radii, widths = [], []
    datasets = 500
    for _ in range(datasets):
        phi = unit_ball(rng, n, d)
        data = FeedbackDataset.from_arrays(phi, sample_level(feedback_probabilities(w_star, phi), rng), k)
        w_hat = fit_mle(data, bound).weights
        lam = min_eigenvalue(design_matrix_sigma(data), ridge)
        radius = weight_confidence_radius(constants, lam, n)
        width = theoretical_confidence_width(constants, k, bound, lam, n)
        radii.append(radius)
        widths.append(width)
        weight_miss += np.linalg.norm(w_hat - w_star.reshape(-1)) > radius
        sup = np.abs(estimated_reward(w_hat, np.vstack([phi, probe]), k)
                     - true_expected_reward(w_star, np.vstack([phi, probe]))).max()
        reward_miss += sup > width
    elapsed = time.perf_counter() - start
    wr, rr = weight_miss / datasets, reward_miss / datasets
    report("criterion 4 (confidence coverage)",
           wr <= 0.15 and rr <= 0.15 and elapsed <= 600,
           f"weight bound violated in {wr:.1%}, reward bound in {rr:.1%} of {datasets} datasets "
           f"(<= 15%); median radius {np.median(radii):.2e}, median width {np.median(widths):.2e} "
           f"(ridge-dominated); {elapsed:.0f}s (<= 600s)")


# 5 and 7 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_setup():
    cfg = desk_config()
    env = build_environment(cfg)
    return env, estimate_optimal_value(cfg, env)


@pytest.fixture(scope="module")
def desk_batches(desk_setup):
    env, v_star = desk_setup
    cache = {}

    def get(noise):
        if noise not in cache:
            start = time.perf_counter()
            batch = run_batch(desk_config(noise=noise), env, v_star)
            cache[noise] = (batch, time.perf_counter() - start)
        return cache[noise]
    return get


@pytest.mark.slow
def test_desk_scale_learning(report, desk_batches):
    batch, elapsed = desk_batches(0.0)
    v = batch.v_star
    first, last = batch.decile_means()
    m = batch.episodes // 10
    regret_first = float(batch.regret[:, :m].mean())
    regret_last = float(batch.regret[:, -m:].mean())
    ok = (last >= 0.9 * v and last >= 1.5 * first and regret_last <= 0.5 * regret_first
          and elapsed <= 1800)
    report("criterion 5 (desk-scale learning)", ok,
           f"V*~{v:.3f}; last decile {last:.3f} = {last / v:.1%} of V* (>= 90%); "
           f"last/first {last / first:.2f} (>= 1.5); regret per episode {regret_first:.3f} -> "
           f"{regret_last:.3f} ({regret_last / regret_first:.0%} <= 50%); {elapsed:.0f}s (<= 1800s)")


@pytest.mark.slow
def test_noise_ordering(report, desk_batches):
    levels = (0.0, 0.2, 0.4)
    reach = []
    for noise in levels:
        batch, _ = desk_batches(noise)
        hit = batch.first_reaching(0.8 * batch.v_star)
        reach.append(batch.episodes + 1 if hit is None else hit)  # never reached sorts last
    inversions = sum(b < a for a, b in zip(reach, reach[1:]))
    report("criterion 7 (noise ordering)", inversions <= 1,
           "episode first reaching 80% of V* at noise " +
           ", ".join(f"{lv}: {r}" for lv, r in zip(levels, reach)) +
           f"; {inversions} adjacent inversion(s) (<= 1 allowed)")


# 6 ---------------------------------------------------------------------------

PAPER_OVERRIDES = dict(pg_step=0.5, pg_iters=20, mle_iters=50, opt_iters=3000)


@pytest.mark.paper_scale
def test_paper_scale_smoke(report, tmp_path):
    if os.environ.get("KFEED_PAPER_SCALE") != "1":
        ACCEPTANCE_LINES.append("[SKIP] criterion 6 (paper-scale smoke): opt-in, "
                                "set KFEED_PAPER_SCALE=1")
        pytest.skip("paper-scale run is opt-in: set KFEED_PAPER_SCALE=1")
    cfg = ExperimentConfig(**PAPER_OVERRIDES, out=os.environ.get("KFEED_PAPER_OUT", str(tmp_path)))
    batch = run_batch(cfg)
    emit_results(batch, cfg.out)
    v = batch.v_star
    deciles = batch.mean.reshape(10, -1).mean(axis=1)
    stds = batch.std.reshape(10, -1).mean(axis=1)
    slack = 0.05 * v
    rising = bool(np.all(np.diff(deciles) >= -slack)) and deciles[-1] > deciles[0]
    plateau = abs(deciles[-1] - deciles[-2]) <= slack
    shrinking = stds[-1] < stds[0]
    last = deciles[-1]
    report("criterion 6 (paper-scale smoke)",
           rising and plateau and shrinking and last >= 0.85 * v,
           f"V*~{v:.3f}; decile means {np.round(deciles, 3).tolist()}; rising={rising}, "
           f"plateau={plateau}, band std {stds[0]:.3f} -> {stds[-1]:.3f}; last decile "
           f"{last / v:.1%} of V* (>= 85%); {batch.wall_time / 60:.0f} min")


# 8 ---------------------------------------------------------------------------

def test_determinism_and_io(report, tmp_path):
    cfg = dict(grid="desk_5x5", k=4, horizon=10, episodes=12, runs=3, synth_trajectories=4000,
               pg_iters=4, pg_samples=20, pg_step=0.5, mle_iters=30, opt_iters=40,
               opt_eval_rollouts=1000, eval_rollouts=50, seed=11)
    a = emit_results(run_batch(ExperimentConfig(**cfg)), tmp_path / "a")
    b = emit_results(run_batch(ExperimentConfig(**cfg)), tmp_path / "b")
    identical = all(a[f].read_bytes() == b[f].read_bytes() for f in ("episodes.csv", "summary.json"))
    rows = len(a["episodes.csv"].read_text().splitlines()) - 1

    rng = np.random.default_rng(5)
    worst, draws = -np.inf, 0
    for i in range(1000):
        k, d = int(rng.integers(2, 8)), int(rng.integers(1, 8))
        w = rng.normal(scale=rng.uniform(0.1, 30.0), size=k * d)
        if i % 2:
            spec = OptimisticRewardSpec(w, k, int(rng.integers(1, 10_000)),
                                        c_conf=float(rng.uniform(0.01, 100.0)))
        else:
            b_ = float(rng.uniform(0.1, 3.0))
            spec = OptimisticRewardSpec(w, k, int(rng.integers(1, 10_000)), "theoretical",
                                        constants=ConfidenceConstants.from_bound(b_, k, 0.1),
                                        bound=b_, lambda_min=float(rng.uniform(1e-6, 1.0)))
        phi = rng.normal(scale=rng.uniform(0.1, 10.0), size=(100, d))
        worst = max(worst, float((optimistic_reward(spec, phi) - (k - 1)).max()))
        draws += len(phi)
    report("criterion 8 (determinism and I/O)",
           identical and rows == cfg["runs"] * cfg["episodes"] and worst <= 0.0,
           f"repeat outputs byte-identical={identical}; CSV rows {rows} = runs x episodes "
           f"{cfg['runs'] * cfg['episodes']}; max(optimistic - (K-1)) = {worst:.3g} over "
           f"{draws} draws (<= 0)")
