"""Deterministic text features and a one-hidden-layer reward scorer.

Feature layout for dimension ``D`` (``D >= 7``)::

    0       constant 1.0
    1       log(1 + |mt|) in characters, clamped to [0, 8]
    2       |mt| / |src|, clamped to [0, 8]
    3       |mt| / |ref|, clamped to [0, 8]      (0 without reference)
    4       char 3-gram Dice overlap mt<->ref    (0 without reference)
    5       char 3-gram Dice overlap mt<->src
    6..D-1  hashed char 3-gram counts of mt, log(1 + c), L2-normalized

The scorer is ``r = v . tanh(W x + b) + c``.
"""

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

DEFAULT_DIM = 64
DEFAULT_HIDDEN = 16
N_DENSE = 6
LENGTH_CLAMP = 8.0

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def char_ngrams(text, n=3):
    """Character n-grams of ``text``; a non-empty text shorter than n is its own gram."""
    if not text:
        return []
    if len(text) < n:
        return [text]
    return [text[i : i + n] for i in range(len(text) - n + 1)]


def ngram_overlap(a, b, n=3):
    """Multiset Dice coefficient of the character n-grams of a and b."""
    ga, gb = Counter(char_ngrams(a, n)), Counter(char_ngrams(b, n))
    total = sum(ga.values()) + sum(gb.values())
    if total == 0:
        return 0.0
    return 2.0 * sum((ga & gb).values()) / total


def _clamp(x):
    return min(max(x, 0.0), LENGTH_CLAMP)


def featurize(source, candidate, reference=None, dim=DEFAULT_DIM):
    if dim <= N_DENSE:
        raise ContractError(f"feature dimension must be > {N_DENSE}, got {dim}")
    x = np.zeros(dim)
    x[0] = 1.0
    n_mt = len(candidate)
    x[1] = _clamp(math.log1p(n_mt))
    x[2] = _clamp(n_mt / len(source)) if source else 0.0
    if reference is not None:
        x[3] = _clamp(n_mt / len(reference)) if reference else 0.0
        x[4] = ngram_overlap(candidate, reference)
    x[5] = ngram_overlap(candidate, source)

    block = dim - N_DENSE
    counts = Counter(fnv1a_64(g.encode("utf-8")) % block for g in char_ngrams(candidate))
    if counts:
        hashed = np.zeros(block)
        for slot, c in counts.items():
            hashed[slot] = math.log1p(c)
        x[N_DENSE:] = hashed / np.linalg.norm(hashed)
    return x


def extract_features(instance, dim=DEFAULT_DIM):
    """Feature vector of a :class:`TranslationInstance`; ignores its identity fields."""
    return featurize(instance.source, instance.candidate, instance.reference, dim)


def featurize_many(triples, dim=DEFAULT_DIM):
    """Stack features for ``(source, candidate, reference)`` triples, caching repeats."""
    cache = {}
    rows = []
    for t in triples:
        if t not in cache:
            cache[t] = featurize(*t, dim=dim)
        rows.append(cache[t])
    return np.array(rows).reshape(len(rows), dim)


@dataclass
class ScorerParams:
    hidden_weights: np.ndarray  # (H, D)
    hidden_bias: np.ndarray  # (H,)
    out_weights: np.ndarray  # (H,)
    out_bias: float

    @property
    def dim(self):
        return self.hidden_weights.shape[1]

    @property
    def hidden(self):
        return self.hidden_weights.shape[0]

    def flat(self):
        return np.concatenate(
            [self.hidden_weights.ravel(), self.hidden_bias, self.out_weights, [self.out_bias]]
        )

    @classmethod
    def from_flat(cls, vec, dim, hidden):
        vec = np.asarray(vec, dtype=float)
        k = hidden * dim
        if vec.shape != (k + 2 * hidden + 1,):
            raise ContractError(f"flat vector of length {vec.size} does not fit D={dim}, H={hidden}")
        return cls(
            vec[:k].reshape(hidden, dim).copy(),
            vec[k : k + hidden].copy(),
            vec[k + hidden : k + 2 * hidden].copy(),
            float(vec[-1]),
        )

    @staticmethod
    def names(dim, hidden):
        """Human-readable names of the flat parameter entries."""
        out = [f"hidden_weights[{i},{j}]" for i in range(hidden) for j in range(dim)]
        out += [f"hidden_bias[{i}]" for i in range(hidden)]
        out += [f"out_weights[{i}]" for i in range(hidden)]
        out.append("out_bias")
        return out

    def copy(self):
        return type(self)(
            self.hidden_weights.copy(), self.hidden_bias.copy(), self.out_weights.copy(), self.out_bias
        )

    def to_json(self):
        return {
            "D": self.dim,
            "H": self.hidden,
            "hidden_weights": self.hidden_weights.tolist(),
            "hidden_bias": self.hidden_bias.tolist(),
            "out_weights": self.out_weights.tolist(),
            "out_bias": float(self.out_bias),
        }

    @classmethod
    def from_json(cls, doc):
        try:
            dim, hidden = int(doc["D"]), int(doc["H"])
            params = cls(
                np.array(doc["hidden_weights"], dtype=float).reshape(hidden, dim),
                np.array(doc["hidden_bias"], dtype=float).reshape(hidden),
                np.array(doc["out_weights"], dtype=float).reshape(hidden),
                float(doc["out_bias"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ContractError(f"malformed parameter document: {exc}") from None
        if not np.all(np.isfinite(params.flat())):
            raise ContractError("parameters must be finite")
        return params


class GradientSet(ScorerParams):
    """Gradient of a loss with respect to every entry of :class:`ScorerParams`."""


def save_params(params, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_json(), fh)
        fh.write("\n")


def load_params(path):
    with open(path, encoding="utf-8") as fh:
        return ScorerParams.from_json(json.load(fh))


def init_params(seed, dim=DEFAULT_DIM, hidden=DEFAULT_HIDDEN):
    """Glorot-uniform weights, zero biases."""
    if dim < 1 or hidden < 1:
        raise ContractError("D and H must be >= 1")
    rng = np.random.default_rng(seed)
    s = math.sqrt(6.0 / (dim + hidden))
    w = rng.uniform(-s, s, size=(hidden, dim))
    v = rng.uniform(-s, s, size=hidden)
    return ScorerParams(w, np.zeros(hidden), v, 0.0)


def _check_shapes(params, x):
    if x.shape[-1] != params.dim:
        raise ContractError(f"feature dimension {x.shape[-1]} does not match scorer D={params.dim}")


def forward_batch(params, x):
    """Rewards for a ``(n, D)`` feature matrix; returns ``(rewards, hidden activations)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_shapes(params, x)
    h = np.tanh(x @ params.hidden_weights.T + params.hidden_bias)
    return h @ params.out_weights + params.out_bias, h


def forward(params, features):
    r, _ = forward_batch(params, features)
    return float(r[0])


def backward_batch(params, x, h, d_reward):
    """Accumulate ``sum_i d_reward[i] * d r_i / d theta`` as a :class:`GradientSet`."""
    d_pre = np.outer(d_reward, params.out_weights) * (1.0 - h * h)
    return GradientSet(
        d_pre.T @ x,
        d_pre.sum(axis=0),
        h.T @ d_reward,
        float(np.sum(d_reward)),
    )


def score_instances(params, instances):
    feats = featurize_many(
        [(i.source, i.candidate, i.reference) for i in instances], dim=params.dim
    )
    rewards, _ = forward_batch(params, feats)
    return rewards

