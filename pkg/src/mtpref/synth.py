"""Seeded synthetic datasets for tests, ablations and demos.

Texts are built from two pseudo-word vocabularies linked by a fixed
dictionary, so a candidate translation can be degraded word by word
(dropped, replaced, or left untranslated) with a known corruption rate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .ingest import HumanRating, ScoreMatrix, TranslationInstance
from .pairs import PreferencePair
from .seeding import rng_for

KINDS = ("separable_pairs", "skewed_rewards", "centered_rewards", "score_matrix", "rated_instances")

_SRC_LETTERS = "aeioklmnprst"
_TGT_LETTERS = "aeioubdfghjvz"


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic dataset.

    ``size`` is the number of pairs (separable_pairs), samples (reward
    kinds) or segments (score_matrix, rated_instances). ``noise`` is the
    label-flip probability for separable_pairs and a standard deviation
    elsewhere. ``margin_scale`` converts 0-100 rating gaps to pair margins.
    """

    kind: str
    size: int = 200
    noise: float = 0.0
    seed: int = 0
    n_systems: int = 4
    vocab: int = 400
    margin_scale: float = 0.01
    lang_pair: str = "xx-yy"

    def validate(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown synth kind {self.kind!r}")
        if self.size < 1:
            raise ContractError("size must be >= 1")
        if self.noise < 0:
            raise ContractError("noise must be >= 0")
        if self.kind == "separable_pairs" and self.noise > 1:
            raise ContractError("label-flip noise must be in [0, 1]")
        if self.kind in ("score_matrix", "rated_instances") and self.n_systems < 2:
            raise ContractError("need at least two systems")
        if self.vocab < 10:
            raise ContractError("vocab must be >= 10")


class _Lexicon:
    def __init__(self, rng, size):
        self.src = self._words(rng, size, _SRC_LETTERS)
        self.tgt = self._words(rng, size, _TGT_LETTERS)

    @staticmethod
    def _words(rng, n, letters):
        seen, out = set(), []
        while len(out) < n:
            w = "".join(rng.choice(list(letters), size=rng.integers(3, 9)))
            if w not in seen:
                seen.add(w)
                out.append(w)
        return out

    def segment(self, rng):
        idx = rng.integers(0, len(self.src), size=rng.integers(6, 15))
        return [self.src[i] for i in idx], [self.tgt[i] for i in idx]

    def corruptions(self, rng, src_words):
        """One pre-drawn corruption per word position: None (drop), a wrong word, or the source word."""
        out = []
        for s in src_words:
            action = rng.integers(0, 3)
            if action == 0:
                out.append(None)
            elif action == 1:
                out.append(self.tgt[rng.integers(0, len(self.tgt))])
            else:
                out.append(s)
        return out


def _apply(ref_words, corruptions, positions):
    out = []
    for k, t in enumerate(ref_words):
        if k in positions:
            if corruptions[k] is not None:
                out.append(corruptions[k])
        else:
            out.append(t)
    return " ".join(out)


def _separable_pairs(spec, rng):
    lex = _Lexicon(rng, spec.vocab)
    pairs = []
    for k in range(spec.size):
        src_words, ref_words = lex.segment(rng)
        n = len(ref_words)
        order = [int(i) for i in rng.permutation(n)]
        corr = lex.corruptions(rng, src_words)
        # the rejected text corrupts a strict superset of the chosen positions, identically
        n_good = int(round(rng.uniform(0.0, 0.4) * n))
        n_bad = min(n, n_good + max(1, int(round(rng.uniform(0.25, 0.6) * n))))
        chosen = _apply(ref_words, corr, set(order[:n_good]))
        rejected = _apply(ref_words, corr, set(order[:n_bad]))
        hp = 100.0 * (1 - n_good / n)
        hm = 100.0 * (1 - n_bad / n)
        if spec.noise and rng.uniform() < spec.noise:
            chosen, rejected = rejected, chosen
        pairs.append(
            PreferencePair(
                segment_id=f"s{k:05d}",
                lang_pair=spec.lang_pair,
                source=" ".join(src_words),
                reference=" ".join(ref_words),
                chosen=chosen,
                rejected=rejected,
                h_plus=hp,
                h_minus=hm,
                margin=spec.margin_scale * (hp - hm),
                scale="DA",
                chosen_system="good",
                rejected_system="bad",
            )
        )
    return pairs


def _skewed_rewards(spec, rng):
    # long left tail, bulk between 4 and 6.5
    return 6.6 - rng.gamma(2.0, 0.5, size=spec.size) - spec.noise * rng.standard_normal(spec.size)


def _centered_rewards(spec, rng):
    return np.clip(rng.normal(0.0, 1.25, size=spec.size), -4.0, 4.0) + spec.noise * rng.standard_normal(spec.size)


def _system_qualities(n_systems):
    return np.linspace(0.95, 0.45, n_systems)


def _score_matrix(spec, rng):
    q = _system_qualities(spec.n_systems)
    shape = (spec.n_systems, spec.size)
    human = q[:, None] + spec.noise * rng.standard_normal(shape)
    metric = q[:, None] + spec.noise * rng.standard_normal(shape)
    return ScoreMatrix(
        spec.lang_pair,
        [f"sys{i}" for i in range(spec.n_systems)],
        [f"s{j:05d}" for j in range(spec.size)],
        metric,
        human,
    )


def _rated_instances(spec, rng):
    """A toy world: systems of planted quality translate shared segments.

    System ``sys{i}`` has quality decreasing in ``i``; each output's
    corruption rate is ``1 - quality`` plus jitter, and the DA rating is
    the uncorrupted share (x100) plus Gaussian rating noise.
    """
    lex = _Lexicon(rng, spec.vocab)
    q = _system_qualities(spec.n_systems)
    instances, ratings = [], []
    for k in range(spec.size):
        seg = f"s{k:05d}"
        src_words, ref_words = lex.segment(rng)
        n = len(ref_words)
        for i in range(spec.n_systems):
            frac = float(np.clip(1.0 - q[i] + 0.1 * rng.standard_normal(), 0.0, 1.0))
            positions = {int(p) for p in rng.permutation(n)[: int(round(frac * n))]}
            cand = _apply(ref_words, lex.corruptions(rng, src_words), positions)
            sys_id = f"sys{i}"
            instances.append(
                TranslationInstance(seg, sys_id, spec.lang_pair, " ".join(src_words), cand, " ".join(ref_words))
            )
            da = 100.0 * (1 - len(positions) / n) + 100.0 * spec.noise * rng.standard_normal()
            ratings.append(HumanRating(seg, sys_id, float(np.clip(da, 0.0, 100.0)), "DA", "higher_better"))
    return instances, ratings


_GENERATORS = {
    "separable_pairs": _separable_pairs,
    "skewed_rewards": _skewed_rewards,
    "centered_rewards": _centered_rewards,
    "score_matrix": _score_matrix,
    "rated_instances": _rated_instances,
}


def gen(spec):
    """Generate the dataset described by ``spec``.

    Returns a list of :class:`PreferencePair` (separable_pairs), a reward
    array (skewed_rewards, centered_rewards), a :class:`ScoreMatrix`
    (score_matrix) or ``(instances, ratings)`` (rated_instances).
    """
    spec.validate()
    return _GENERATORS[spec.kind](spec, rng_for(spec.seed, "synth", spec.kind))
