import numpy as np
import pytest

from kfeed.mdp import TabularMdp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bandit(num_actions=2, horizon=1):
    """One state, every action loops back to it."""
    return TabularMdp(1, num_actions, horizon, np.ones((1, num_actions, 1)), np.ones(1))


def chain(num_states=3, horizon=2):
    """Action 0 stays, action 1 moves right (saturating at the end); starts at 0."""
    P = np.zeros((num_states, 2, num_states))
    for s in range(num_states):
        P[s, 0, s] = 1.0
        P[s, 1, min(s + 1, num_states - 1)] = 1.0
    rho = np.zeros(num_states)
    rho[0] = 1.0
    return TabularMdp(num_states, 2, horizon, P, rho)


def action_reward(batch):
    return batch.actions[:, 0].astype(float)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def _report(name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        assert passed, line
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
