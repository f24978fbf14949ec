"""Ranking, regularization and regression losses with analytic gradients."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError
from .scorer import GradientSet, ScorerParams, backward_batch, forward_batch

DEFAULT_LAMBDA = 0.1
BETA_UPPER = 3.0
BETA_LOWER = -3.0


def softplus(z):
    """log(1 + e^z) without overflow."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def bt_loss(r_plus, r_minus, m=0.0):
    """-log sigmoid(r_plus - r_minus - m)."""
    if np.any(np.asarray(m) < 0):
        raise ContractError("margin must be >= 0")
    out = softplus(-(np.asarray(r_plus) - np.asarray(r_minus) - m))
    return float(out) if out.ndim == 0 else out


def reg_loss(r, beta_upper=BETA_UPPER, beta_lower=BETA_LOWER):
    """Squared excursion of a reward outside [beta_lower, beta_upper]."""
    if not beta_lower < beta_upper:
        raise ContractError("beta_lower must be < beta_upper")
    r = np.asarray(r, dtype=float)
    out = np.maximum(r - beta_upper, 0.0) ** 2 + np.maximum(beta_lower - r, 0.0) ** 2
    return float(out) if out.ndim == 0 else out


def _reg_grad(r, beta_upper, beta_lower):
    return 2.0 * np.maximum(r - beta_upper, 0.0) - 2.0 * np.maximum(beta_lower - r, 0.0)


@dataclass
class PairBatch:
    x_plus: np.ndarray  # (N, D)
    x_minus: np.ndarray  # (N, D)
    margin: np.ndarray  # (N,)
    ids: Optional[list] = None

    def __post_init__(self):
        self.x_plus = np.atleast_2d(np.asarray(self.x_plus, dtype=float))
        self.x_minus = np.atleast_2d(np.asarray(self.x_minus, dtype=float))
        self.margin = np.atleast_1d(np.asarray(self.margin, dtype=float))
        n = self.x_plus.shape[0]
        if self.x_minus.shape != self.x_plus.shape or self.margin.shape != (n,):
            raise ContractError("x_plus, x_minus and margin must align")
        if np.any(self.margin < 0):
            raise ContractError("margins must be >= 0")

    def __len__(self):
        return self.x_plus.shape[0]

    def subset(self, idx):
        ids = None if self.ids is None else [self.ids[i] for i in idx]
        return PairBatch(self.x_plus[idx], self.x_minus[idx], self.margin[idx], ids)


@dataclass
class RatedBatch:
    x: np.ndarray  # (N, D)
    h: np.ndarray  # (N,)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if self.h.shape != (self.x.shape[0],):
            raise ContractError("x and h must align")

    def __len__(self):
        return self.x.shape[0]


@dataclass
class LossBreakdown:
    bt: float
    reg: float
    total: float
    lam: float = DEFAULT_LAMBDA
    beta_upper: float = BETA_UPPER
    beta_lower: float = BETA_LOWER


def _merge(a, b):
    return GradientSet(
        a.hidden_weights + b.hidden_weights,
        a.hidden_bias + b.hidden_bias,
        a.out_weights + b.out_weights,
        a.out_bias + b.out_bias,
    )


def combined_loss_and_grad(
    params, batch, lam=DEFAULT_LAMBDA, beta_upper=BETA_UPPER, beta_lower=BETA_LOWER, use_margin=True
):
    """Mean ranking loss plus ``lam`` times the mean regularizer over all 2N rewards.

    Returns ``(LossBreakdown, GradientSet, (r_plus, r_minus))``.
    """
    n = len(batch)
    if n == 0:
        raise ContractError("empty batch")
    if lam < 0:
        raise ContractError("lambda must be >= 0")
    r_plus, h_plus = forward_batch(params, batch.x_plus)
    r_minus, h_minus = forward_batch(params, batch.x_minus)
    m = batch.margin if use_margin else np.zeros(n)

    z = r_plus - r_minus - m
    bt = float(np.mean(softplus(-z)))
    rewards = np.concatenate([r_plus, r_minus])
    reg = float(np.mean(reg_loss(rewards, beta_upper, beta_lower)))

    # d(-log sigmoid(z))/dz = -sigmoid(-z)
    d_z = -sigmoid(-z) / n
    d_plus = d_z + lam * _reg_grad(r_plus, beta_upper, beta_lower) / (2 * n)
    d_minus = -d_z + lam * _reg_grad(r_minus, beta_upper, beta_lower) / (2 * n)
    grad = _merge(
        backward_batch(params, batch.x_plus, h_plus, d_plus),
        backward_batch(params, batch.x_minus, h_minus, d_minus),
    )
    loss = LossBreakdown(bt, reg, bt + lam * reg, lam, beta_upper, beta_lower)
    return loss, grad, (r_plus, r_minus)


def mse_loss_and_grad(params, batch):
    """Mean squared error between rewards and human ratings, with its gradient."""
    n = len(batch)
    if n == 0:
        raise ContractError("empty batch")
    r, h = forward_batch(params, batch.x)
    resid = r - batch.h
    grad = backward_batch(params, batch.x, h, 2.0 * resid / n)
    return float(np.mean(resid**2)), grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    worst_index: int
    worst_name: str
    analytic: np.ndarray
    numeric: np.ndarray


def _loss_fn(batch, kwargs):
    if isinstance(batch, RatedBatch):
        return lambda p: mse_loss_and_grad(p, batch)[0], lambda p: mse_loss_and_grad(p, batch)[1]
    return (
        lambda p: combined_loss_and_grad(p, batch, **kwargs)[0].total,
        lambda p: combined_loss_and_grad(p, batch, **kwargs)[1],
    )


def finite_diff_check(params, batch, epsilon=1e-5, tolerance=1e-5, grad=None, **loss_kwargs):
    """Compare analytic gradients with central differences, entry by entry.

    ``batch`` selects the loss: a :class:`RatedBatch` checks the MSE loss, a
    :class:`PairBatch` the combined ranking objective (``loss_kwargs`` are
    forwarded). Pass ``grad`` to check a supplied gradient instead of the
    analytic one. The error metric is ``|a - f| / max(1, |a|, |f|)``.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ContractError("epsilon must lie in [1e-7, 1e-3]")
    loss, analytic_fn = _loss_fn(batch, loss_kwargs)
    if grad is None:
        grad = analytic_fn(params)
    analytic = grad.flat()
    theta = params.flat()
    dim, hidden = params.dim, params.hidden
    numeric = np.empty_like(theta)
    for k in range(theta.size):
        saved = theta[k]
        theta[k] = saved + epsilon
        up = loss(ScorerParams.from_flat(theta, dim, hidden))
        theta[k] = saved - epsilon
        down = loss(ScorerParams.from_flat(theta, dim, hidden))
        theta[k] = saved
        numeric[k] = (up - down) / (2 * epsilon)
    rel = np.abs(analytic - numeric) / np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    worst = int(np.argmax(rel))
    return GradCheckReport(
        max_rel_error=float(rel[worst]),
        passed=bool(rel[worst] < tolerance),
        worst_index=worst,
        worst_name=ScorerParams.names(dim, hidden)[worst],
        analytic=analytic,
        numeric=numeric,
    )
