"""Deterministic minibatch training with reward-distribution telemetry."""

import csv
import logging
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import ConfigError, ContractError, NumericalError
from .objective import BETA_LOWER, BETA_UPPER, DEFAULT_LAMBDA, PairBatch, combined_loss_and_grad
from .scorer import (
    DEFAULT_DIM,
    DEFAULT_HIDDEN,
    featurize_many,
    forward_batch,
    init_params,
    score_instances,
)
from .seeding import rng_for

log = logging.getLogger(__name__)

ABLATIONS = {
    "vanilla": {"reg_enabled": False, "margin_enabled": False},
    "reg": {"reg_enabled": True, "margin_enabled": False},
    "reg+margin": {"reg_enabled": True, "margin_enabled": True},
}


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    batch_size: int = 32
    epochs: int = 10
    lam: float = DEFAULT_LAMBDA
    margin_enabled: bool = True
    reg_enabled: bool = True
    seed: int = 0
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    beta_upper: float = BETA_UPPER
    beta_lower: float = BETA_LOWER
    dim: int = DEFAULT_DIM
    hidden: int = DEFAULT_HIDDEN
    max_steps: Optional[int] = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")

    @classmethod
    def from_mapping(cls, values):
        """Build from string-valued ``key=value`` settings (config file / CLI)."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = {"lambda": "lam"}.get(key, key)
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            if not isinstance(raw, str):
                kwargs[key] = raw
                continue
            kind = types[key]
            try:
                if kind in (bool, "bool"):
                    if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                        raise ValueError(raw)
                    kwargs[key] = raw.lower() in ("true", "1", "yes")
                elif kind in (int, "int"):
                    kwargs[key] = int(raw)
                elif kind in (float, "float"):
                    kwargs[key] = float(raw)
                elif key == "max_steps":
                    kwargs[key] = None if raw.lower() in ("", "none") else int(raw)
                else:
                    kwargs[key] = raw
            except ValueError:
                raise ConfigError(f"bad value {raw!r} for {key}") from None
        return cls(**kwargs)


@dataclass
class StepRecord:
    step: int
    bt: float
    reg: float
    total: float
    reward_mean: float
    reward_std: float


HISTORY_COLUMNS = ("step", "bt", "reg", "total", "reward_mean", "reward_std")


class TrainHistory(list):
    """One :class:`StepRecord` per optimizer step."""

    def column(self, name):
        return np.array([getattr(r, name) for r in self])

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HISTORY_COLUMNS)
            for r in self:
                writer.writerow([r.step] + [repr(float(getattr(r, c))) for c in HISTORY_COLUMNS[1:]])

    @classmethod
    def from_csv(cls, path):
        out = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                out.append(StepRecord(int(row["step"]), *(float(row[c]) for c in HISTORY_COLUMNS[1:])))
        return out


def featurize_pairs(pairs, dim=DEFAULT_DIM):
    """Turn :class:`PreferencePair` objects into a :class:`PairBatch`."""
    if not pairs:
        raise ContractError("no pairs to featurize")
    x_plus = featurize_many([(p.source, p.chosen, p.reference) for p in pairs], dim)
    x_minus = featurize_many([(p.source, p.rejected, p.reference) for p in pairs], dim)
    ids = [f"{p.lang_pair}/{p.segment_id}/{p.chosen_system}>{p.rejected_system}" for p in pairs]
    return PairBatch(x_plus, x_minus, np.array([p.margin for p in pairs]), ids)


class _Adam:
    def __init__(self, size, lr, b1, b2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, g):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, theta, g):
        return theta - self.lr * g


def train(pairs, config, init=None):
    """Train a scorer on featurized preference pairs.

    The pair order is reshuffled every epoch from a seed derived from
    ``config.seed``; the result is a pure function of ``(pairs, config)``.
    With ``margin_enabled`` off the margins are treated as zero, and with
    ``reg_enabled`` off the regularizer weight is zero.

    Returns:
        ``(params, history)``.

    Raises:
        NumericalError: the loss became non-finite; carries the step and
            the pair ids of the offending batch.
    """
    if len(pairs) < 1:
        raise ContractError("need at least one pair")
    if pairs.x_plus.shape[1] != config.dim:
        raise ContractError(f"pair features have D={pairs.x_plus.shape[1]}, config says {config.dim}")
    params = init.copy() if init is not None else init_params(config.seed, config.dim, config.hidden)
    dim, hidden = params.dim, params.hidden
    lam = config.lam if config.reg_enabled else 0.0
    if config.optimizer == "adam":
        opt = _Adam(params.flat().size, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    else:
        opt = _SGD(config.learning_rate)

    rng = rng_for(config.seed, "shuffle")
    history = TrainHistory()
    theta = params.flat()
    step = 0
    n = len(pairs)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            if config.max_steps is not None and step >= config.max_steps:
                break
            batch = pairs.subset(order[start : start + config.batch_size])
            loss, grad, (r_plus, r_minus) = combined_loss_and_grad(
                params, batch, lam, config.beta_upper, config.beta_lower, use_margin=config.margin_enabled
            )
            if not (np.isfinite(loss.total) and np.all(np.isfinite(grad.flat()))):
                raise NumericalError(
                    f"non-finite loss at step {step} (epoch {epoch})", step=step, pair_ids=batch.ids or ()
                )
            rewards = np.concatenate([r_plus, r_minus])
            history.append(
                StepRecord(step, loss.bt, loss.reg, loss.total, float(rewards.mean()), float(rewards.std()))
            )
            theta = opt.step(theta, grad.flat())
            params = type(params).from_flat(theta, dim, hidden)
            step += 1
    log.info("trained %d steps", step)
    return params, history


def reward_stats(params, instances):
    """Population mean and standard deviation of raw rewards over instances.

    ``instances`` may be :class:`TranslationInstance` objects or an
    ``(n, D)`` feature matrix.
    """
    if len(instances) < 2:
        raise ContractError("need at least two instances")
    if isinstance(instances, np.ndarray):
        rewards, _ = forward_batch(params, instances)
    else:
        rewards = score_instances(params, instances)
    return float(np.mean(rewards)), float(np.std(rewards))
