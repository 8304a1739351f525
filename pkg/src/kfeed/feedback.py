"""K-level categorical feedback over trajectory features.

Level ``i`` is observed with probability proportional to ``exp(w_i . phi)``.
The K class vectors live in a ``(K, d)`` array; the concatenated form used by
the estimator is its row-major flattening, so block ``i`` occupies
coordinates ``i*d .. i*d + d - 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class WeightBlocks:
    blocks: np.ndarray  # (K, d)
    bound: float

    def __post_init__(self):
        blocks = np.array(self.blocks, dtype=float)
        if blocks.ndim != 2:
            raise ValueError("blocks must be a (K, d) array")
        if blocks.shape[0] < 2:
            raise ConfigurationError("need at least K=2 feedback levels")
        if not self.bound > 0:
            raise ValueError("bound B must be positive")
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def k(self):
        return self.blocks.shape[0]

    @property
    def d(self):
        return self.blocks.shape[1]

    @property
    def flat(self):
        return self.blocks.reshape(-1).copy()

    @classmethod
    def from_flat(cls, w, k, d, bound):
        w = np.asarray(w, dtype=float)
        if w.shape != (k * d,):
            raise ValueError(f"expected {k * d} weights, got shape {w.shape}")
        return cls(w.reshape(k, d), bound)

    def block_norms(self):
        return np.linalg.norm(self.blocks, axis=1)

    def satisfies_truth_bound(self, tol=1e-12):
        """Every block within B/K, the bound assumed for ground-truth weights."""
        return bool(np.all(self.block_norms() <= self.bound / self.k + tol))

    def to_json(self):
        return json.dumps({"k": self.k, "d": self.d, "B": self.bound,
                           "blocks": self.blocks.tolist()}, indent=2)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        blocks = np.asarray(doc["blocks"], dtype=float)
        if blocks.shape != (doc["k"], doc["d"]):
            raise ValueError(f"blocks shape {blocks.shape} disagrees with k={doc['k']}, d={doc['d']}")
        return cls(blocks, float(doc["B"]))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _as_blocks(w):
    return w.blocks if isinstance(w, WeightBlocks) else np.asarray(w, dtype=float)


def stack_features(phi, k):
    """Embed ``phi`` into block ``i`` of R^{Kd} for each level; returns (K, K*d)."""
    if k < 2:
        raise ConfigurationError("need at least K=2 feedback levels")
    phi = np.asarray(phi, dtype=float)
    d = phi.shape[-1]
    out = np.zeros(phi.shape[:-1] + (k, k * d))
    for i in range(k):
        out[..., i, i * d:(i + 1) * d] = phi
    return out


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def feedback_probabilities(w, phi):
    """P(y = i | phi) for every level; ``phi`` may be (d,) or a stack (M, d)."""
    blocks = _as_blocks(w)
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != blocks.shape[1]:
        raise ValueError(f"feature dimension {phi.shape[-1]} != weight dimension {blocks.shape[1]}")
    return softmax(phi @ blocks.T)


def expected_level(probs):
    k = probs.shape[-1]
    return probs @ np.arange(k, dtype=float)


def true_expected_reward(w, phi):
    """R = sum_i i * P(y = i), in [0, K-1]."""
    return expected_level(feedback_probabilities(w, phi))


def mix_with_uniform_noise(p, noise_level):
    if not 0.0 <= noise_level <= 1.0:
        raise ValueError(f"noise level {noise_level} outside [0, 1]")
    p = np.asarray(p, dtype=float)
    k = p.shape[-1]
    return (1.0 - noise_level) * p + noise_level / k


def sample_level(probs, rng):
    """Draw one level per row of ``probs``."""
    probs = np.asarray(probs, dtype=float)
    cum = np.cumsum(probs, axis=-1)
    cum[..., -1] = 1.0
    u = rng.random(probs.shape[:-1] + (1,))
    return (cum <= u).sum(axis=-1)


def sample_feedback(w, phi, rng, noise_level=0.0):
    """Observed level for ``phi``; ``noise_level`` mixes in a uniform distribution first."""
    p = feedback_probabilities(w, phi)
    if noise_level:
        p = mix_with_uniform_noise(p, noise_level)
    y = sample_level(p, rng)
    return int(y) if np.ndim(y) == 0 else y
