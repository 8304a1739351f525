import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kfeed.errors import StateError
from kfeed.feedback import stack_features, true_expected_reward
from kfeed.mle import ConfidenceConstants
from kfeed.optimism import OptimisticRewardSpec, clamp_optimistic, estimated_reward, optimistic_reward


def test_estimated_reward_at_zero(rng):
    assert np.allclose(estimated_reward(np.zeros(12), rng.normal(size=(5, 3)), 4), 1.5)


def test_estimate_equals_truth_at_truth(rng):
    w = rng.normal(size=(4, 3))
    phi = rng.normal(size=(10, 3))
    assert np.array_equal(estimated_reward(w.reshape(-1), phi, 4), true_expected_reward(w, phi))


def test_estimated_reward_stacked_form(rng):
    for _ in range(50):
        k, d = rng.integers(2, 6), rng.integers(1, 5)
        w, phi = rng.normal(size=k * d), rng.normal(size=d)
        z = stack_features(phi, k) @ w
        p = np.exp(z - z.max())
        p /= p.sum()
        assert estimated_reward(w, phi, k) == pytest.approx(p @ np.arange(k), abs=1e-12)


def test_clamp_examples():
    assert clamp_optimistic(1.2 + 0.5, 4) == pytest.approx(1.7)
    assert clamp_optimistic(2.9 + 0.5, 4) == pytest.approx(3.0)


def test_zero_bonus_limit_is_estimate(rng):
    # the practical bonus c/sqrt(n) vanishes as n grows
    w, phi = rng.normal(size=8), rng.normal(size=(6, 2))
    spec = OptimisticRewardSpec(w, 4, 10**30, c_conf=1e-3)
    assert np.allclose(optimistic_reward(spec, phi), estimated_reward(w, phi, 4), atol=1e-15)


def test_practical_bonus_value():
    spec = OptimisticRewardSpec(np.zeros(4), 2, 100, c_conf=10.0)
    assert spec.bonus == pytest.approx(1.0)


def test_theoretical_mode_requirements():
    c = ConfidenceConstants.from_bound(1.0, 2)
    with pytest.raises(ValueError):
        OptimisticRewardSpec(np.zeros(4), 2, 10, "theoretical")
    with pytest.raises(StateError):
        OptimisticRewardSpec(np.zeros(4), 2, 10, "theoretical", constants=c, bound=1.0,
                             lambda_min=0.0)
    with pytest.raises(ValueError):
        OptimisticRewardSpec(np.zeros(4), 2, 10, "sideways")
    spec = OptimisticRewardSpec(np.zeros(4), 2, 10, "theoretical", constants=c, bound=1.0,
                                lambda_min=1e-6)
    assert np.all(optimistic_reward(spec, np.ones((3, 2))) == 1.0)  # vacuous width clamps


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 1000), st.floats(0.01, 50))
def test_optimistic_bounds(seed, n, c_conf):
    rng = np.random.default_rng(seed)
    k, d = 4, 3
    w = rng.normal(scale=4.0, size=k * d)
    phi = rng.normal(size=(20, d))
    spec = OptimisticRewardSpec(w, k, n, c_conf=c_conf)
    opt, est = optimistic_reward(spec, phi), estimated_reward(w, phi, k)
    assert np.all(opt <= k - 1)
    assert np.all(opt >= np.minimum(est, k - 1))


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_clamp_is_one_lipschitz(a, b):
    assert abs(clamp_optimistic(a, 4) - clamp_optimistic(b, 4)) <= abs(a - b) + 1e-12
