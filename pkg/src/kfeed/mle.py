"""Constrained maximum-likelihood estimation of the stacked weight vector.

The loss is the mean negative log-likelihood of the observed levels under the
softmax feedback model, minimized over the ball ``||w||_2 <= B`` by projected
gradient descent.  Samples with identical features and level are pooled with
integer multiplicities, which leaves every quantity below unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, StateError
from .feedback import softmax, stack_features


class FeedbackDataset:
    """Growing list of ``(phi, y)`` observations for a fixed ``(k, d)``."""

    def __init__(self, k, d):
        if k < 2 or d < 1:
            raise ValueError("need k >= 2 and d >= 1")
        self.k, self.d = k, d
        self._phi = []
        self._y = []
        self._index = {}
        self._unique_phi = []
        self._unique_y = []
        self._counts = []
        self._cache = None

    def __len__(self):
        return len(self._y)

    def append(self, phi, y):
        phi = np.asarray(phi, dtype=float).reshape(-1)
        if phi.shape != (self.d,):
            raise ValueError(f"feature dimension {phi.shape[0]} != {self.d}")
        y = int(y)
        if not 0 <= y < self.k:
            raise ValueError(f"level {y} outside 0..{self.k - 1}")
        self._phi.append(phi)
        self._y.append(y)
        key = (phi.tobytes(), y)
        row = self._index.get(key)
        if row is None:
            self._index[key] = len(self._counts)
            self._unique_phi.append(phi)
            self._unique_y.append(y)
            self._counts.append(1)
        else:
            self._counts[row] += 1
        self._cache = None

    def extend(self, phis, ys):
        for phi, y in zip(phis, ys):
            self.append(phi, y)

    @classmethod
    def from_arrays(cls, phis, ys, k):
        phis = np.atleast_2d(np.asarray(phis, dtype=float))
        data = cls(k, phis.shape[1])
        data.extend(phis, ys)
        return data

    @property
    def features(self):
        return np.array(self._phi).reshape(len(self), self.d)

    @property
    def labels(self):
        return np.array(self._y, dtype=np.int64)

    def pooled(self):
        """``(phi, y, count)`` arrays over distinct observations."""
        if self._cache is None:
            self._cache = (np.array(self._unique_phi).reshape(-1, self.d),
                           np.array(self._unique_y, dtype=np.int64),
                           np.array(self._counts, dtype=float))
        return self._cache


def _require_samples(data):
    if len(data) == 0:
        raise StateError("the dataset is empty")


def _logits(w, data):
    phi, y, counts = data.pooled()
    return phi @ np.asarray(w, dtype=float).reshape(data.k, data.d).T, phi, y, counts


def _loss_and_grad(w, data, need_grad=True):
    z, phi, y, counts = _logits(w, data)
    rows = np.arange(len(y))
    zmax = z.max(axis=1, keepdims=True)
    e = np.exp(z - zmax)
    total = e.sum(axis=1)
    loss = float(counts @ (zmax[:, 0] + np.log(total) - z[rows, y]) / len(data))
    if not need_grad:
        return loss, None
    resid = e / total[:, None]
    resid[rows, y] -= 1.0
    return loss, ((resid * counts[:, None]).T @ phi).reshape(-1) / len(data)


def negative_log_likelihood(w, data: FeedbackDataset) -> float:
    """Mean over samples of ``-log P(y | phi, w)``."""
    _require_samples(data)
    return _loss_and_grad(w, data, need_grad=False)[0]


def nll_gradient(w, data: FeedbackDataset) -> np.ndarray:
    """Mean over samples of ``sum_j p_j phi_j - phi_y`` in stacked coordinates."""
    _require_samples(data)
    return _loss_and_grad(w, data)[1]


def nll_hessian(w, data: FeedbackDataset) -> np.ndarray:
    """Pairwise form: mean of ``sum_{j,l} p_j p_l / 2 (phi_j - phi_l)(phi_j - phi_l)^T``.

    Quadratic in K*d; meant for checks on small instances.
    """
    _require_samples(data)
    z, phi, _, counts = _logits(w, data)
    p = softmax(z)
    kd = data.k * data.d
    hess = np.zeros((kd, kd))
    for row in range(len(counts)):
        F = stack_features(phi[row], data.k)
        D = F[:, None, :] - F[None, :, :]
        pp = np.outer(p[row], p[row]) / 2.0
        hess += counts[row] * np.einsum("jl,jla,jlb->ab", pp, D, D)
    return hess / len(data)


def project_to_ball(w, radius):
    if not radius > 0:
        raise ValueError("radius must be positive")
    w = np.asarray(w, dtype=float)
    norm = math.sqrt(w @ w)
    return w * (radius / norm) if norm > radius else w.copy()


@dataclass
class SolverConfig:
    step_size: float = 1.0
    max_iters: int = 2000
    grad_tolerance: float = 1e-6


@dataclass
class MleFit:
    weights: np.ndarray
    loss: float
    iterations: int
    converged: bool
    losses: list = field(default_factory=list, repr=False)


def fit_mle(data: FeedbackDataset, bound, config: SolverConfig | None = None,
            warm_start=None, record_losses=False) -> MleFit:
    """Projected gradient descent on the NLL over ``||w|| <= bound``.

    A step that would raise the loss is retried at half the step size, so the
    accepted loss sequence never increases.  Stops once the norm of the
    gradient mapping ``(w - proj(w - a g)) / a`` is within ``grad_tolerance``.
    """
    _require_samples(data)
    config = config or SolverConfig()
    w = np.zeros(data.k * data.d) if warm_start is None else project_to_ball(warm_start, bound)
    loss, g = _loss_and_grad(w, data)
    losses = [loss] if record_losses else []
    converged = False
    it = 0
    while it < config.max_iters:
        step = config.step_size
        cand = project_to_ball(w - step * g, bound)
        delta = w - cand
        if math.sqrt(delta @ delta) <= config.grad_tolerance * step:
            converged = True
            break
        it += 1
        for _ in range(40):
            cand_loss, cand_g = _loss_and_grad(cand, data)
            if not math.isfinite(cand_loss):
                raise NumericError(f"non-finite loss at iteration {it}")
            if cand_loss <= loss + 1e-12:
                break
            step *= 0.5
            cand = project_to_ball(w - step * g, bound)
        else:
            converged = True  # no descent left at machine precision
            break
        w, loss, g = cand, cand_loss, cand_g
        if record_losses:
            losses.append(loss)
    return MleFit(w, loss, it, converged, losses)


def design_matrix_sigma(data: FeedbackDataset) -> np.ndarray:
    """(1/(n K^2)) sum_i sum_{j,l} (phi_j - phi_l)(phi_j - phi_l)^T.

    For stacked features the inner double sum is
    ``(2K I_K - 2 * ones) kron (phi phi^T)``, which is what gets evaluated.
    """
    _require_samples(data)
    phi, _, counts = data.pooled()
    k = data.k
    second_moment = (phi * counts[:, None]).T @ phi
    pair = 2.0 * k * np.eye(k) - 2.0 * np.ones((k, k))
    return np.kron(pair, second_moment) / (len(data) * k * k)


def min_eigenvalue(sigma, ridge=0.0):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("sigma must be square")
    if np.max(np.abs(sigma - sigma.T), initial=0.0) > 1e-9:
        raise ValueError("sigma is not symmetric")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    sym = 0.5 * (sigma + sigma.T) + ridge * np.eye(sigma.shape[0])
    val = float(np.linalg.eigvalsh(sym)[0])
    # round-off below the ridge on a PSD input
    scale = max(1.0, float(np.abs(sym).max()))
    return ridge if ridge - 1e-12 * scale < val < ridge else val


@dataclass(frozen=True)
class ConfidenceConstants:
    eta: float
    c_const: float
    delta: float

    @classmethod
    def from_bound(cls, bound, k, delta=0.1):
        if not 0 < delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        return cls(math.exp(-4.0 * bound) / 2.0, math.log(k) + 2.0 * bound, delta)


def _concentration(constants, n):
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.sqrt(constants.c_const**2 / (2.0 * n) * math.log(4.0 / constants.delta))


def _check_lambda(lambda_min):
    if not lambda_min > 0:
        raise StateError("lambda_min must be positive; add a ridge before computing widths")


def weight_confidence_radius(constants: ConfidenceConstants, lambda_min, n) -> float:
    """High-probability bound on ``||w_hat_n - w_star||_2``."""
    _check_lambda(lambda_min)
    return 2.0 / (constants.eta * lambda_min) * _concentration(constants, n)


def theoretical_confidence_width(constants: ConfidenceConstants, k, bound, lambda_min, n) -> float:
    """High-probability bound on ``|R(w_hat_n, tau) - R(tau)|`` over all trajectories."""
    _check_lambda(lambda_min)
    return (4.0 * k * math.exp(4.0 * bound) / (constants.eta * lambda_min)
            * _concentration(constants, n))


def practical_confidence_width(c_conf, n) -> float:
    if not c_conf > 0:
        raise ValueError("c_conf must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    return c_conf / math.sqrt(n)
