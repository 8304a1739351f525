"""Estimated and optimistic trajectory rewards."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StateError
from .feedback import expected_level, softmax
from .mle import ConfidenceConstants, practical_confidence_width, theoretical_confidence_width

BONUS_MODES = ("practical", "theoretical")


def estimated_reward(w_hat, phi, k):
    """Expected level under the concatenated estimate ``w_hat``."""
    phi = np.asarray(phi, dtype=float)
    blocks = np.asarray(w_hat, dtype=float).reshape(k, phi.shape[-1])
    return expected_level(softmax(phi @ blocks.T))


@dataclass(frozen=True)
class OptimisticRewardSpec:
    weights: np.ndarray
    k: int
    n: int
    bonus_mode: str = "practical"
    c_conf: float = 10.0
    constants: ConfidenceConstants | None = None
    bound: float | None = None
    lambda_min: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("episode count n must be at least 1")
        if self.bonus_mode not in BONUS_MODES:
            raise ValueError(f"unknown bonus mode {self.bonus_mode!r}")
        if self.bonus_mode == "theoretical":
            if self.constants is None or self.bound is None or self.lambda_min is None:
                raise ValueError("theoretical mode needs constants, bound and lambda_min")
            if not self.lambda_min > 0:
                raise StateError("lambda_min must be positive in theoretical mode")

    @property
    def bonus(self) -> float:
        if self.bonus_mode == "practical":
            return practical_confidence_width(self.c_conf, self.n)
        return theoretical_confidence_width(self.constants, self.k, self.bound,
                                            self.lambda_min, self.n)


def clamp_optimistic(value, k):
    return np.minimum(value, k - 1.0)


def optimistic_reward(spec: OptimisticRewardSpec, phi):
    """min(estimated reward + bonus, K - 1)."""
    return clamp_optimistic(estimated_reward(spec.weights, phi, spec.k) + spec.bonus, spec.k)
