"""Meta-evaluation statistics: pairwise accuracies, SPA, Perm-Both and ACES.

Permutation statistics draw their random signs in fixed-size chunks, each
seeded from ``(seed, label, chunk index)``. Chunks can be generated on any
number of threads and the result does not depend on the thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ContractError
from .ingest import ScoreMatrix
from .seeding import derive_seed

PHENOMENA = (
    "addition",
    "omission",
    "mistranslation",
    "untranslated",
    "do_not_translate",
    "overtranslation",
    "undertranslation",
    "real_world_knowledge",
    "wrong_language",
    "punctuation",
)

ACES_WEIGHTS = {
    "addition": 5.0,
    "omission": 5.0,
    "mistranslation": 5.0,
    "untranslated": 1.0,
    "do_not_translate": 1.0,
    "overtranslation": 5.0,
    "undertranslation": 5.0,
    "real_world_knowledge": 1.0,
    "wrong_language": 1.0,
    "punctuation": 0.1,
}

CHUNK = 1024


@dataclass(frozen=True)
class TieThreshold:
    epsilon: float


@dataclass(frozen=True)
class AcesItem:
    phenomenon: str
    good_score: float
    incorrect_score: float

    def __post_init__(self):
        if self.phenomenon not in ACES_WEIGHTS:
            raise ContractError(f"unknown phenomenon {self.phenomenon!r}")
        if not (np.isfinite(self.good_score) and np.isfinite(self.incorrect_score)):
            raise ContractError("ACES scores must be finite")


def system_scores(sm):
    """Per-system means of metric and human over comparable cells."""
    ok = sm.comparable
    counts = ok.sum(axis=1)
    if np.any(counts == 0):
        raise ContractError("a system has no comparable segment")
    metric = np.where(ok, sm.metric, 0.0).sum(axis=1) / counts
    human = np.where(ok, sm.human, 0.0).sum(axis=1) / counts
    return metric, human


def pairwise_agreement(metric, human):
    """Share of unordered pairs ordered the same way; a pair tied on both sides agrees."""
    metric = np.asarray(metric, dtype=float)
    human = np.asarray(human, dtype=float)
    n = len(metric)
    if n < 2:
        raise ContractError("need at least two systems")
    i, j = np.triu_indices(n, k=1)
    return float(np.mean(np.sign(metric[i] - metric[j]) == np.sign(human[i] - human[j])))


def system_pairwise_accuracy(sm):
    """System-level pairwise accuracy of a :class:`ScoreMatrix`."""
    if len(sm.systems) < 2:
        raise ContractError("need at least two systems")
    return pairwise_agreement(*system_scores(sm))


def segment_pairs(sm):
    """Group-by-item comparisons: every system pair within each segment.

    Returns an ``(n, 4)`` array of ``(metric_a, metric_b, human_a, human_b)``.
    """
    rows = []
    ok = sm.comparable
    for g in range(len(sm.segments)):
        present = np.flatnonzero(ok[:, g])
        for a, b in combinations(present, 2):
            rows.append((sm.metric[a, g], sm.metric[b, g], sm.human[a, g], sm.human[b, g]))
    return np.array(rows, dtype=float).reshape(-1, 4)


def _tie_inputs(pairs):
    p = np.asarray(pairs, dtype=float).reshape(-1, 4)
    if len(p) == 0:
        raise ContractError("no comparable pairs")
    md = p[:, 0] - p[:, 1]
    return np.abs(md), np.sign(md), np.sign(p[:, 2] - p[:, 3])


def tie_candidates(abs_diffs):
    """0, the midpoints between consecutive distinct |differences|, and the largest one."""
    d = np.unique(abs_diffs)
    mids = (d[:-1] + d[1:]) / 2.0
    # neighbours one ulp apart: the midpoint rounds onto the upper value, so use the lower one
    mids = np.where(mids < d[1:], mids, d[:-1])
    return np.unique(np.concatenate([[0.0], mids, d[-1:]]))


def accuracy_at(pairs, epsilon):
    """Pairwise accuracy when metric differences within ``epsilon`` count as ties."""
    absd, msign, hsign = _tie_inputs(pairs)
    mlabel = np.where(absd <= epsilon, 0.0, msign)
    return float(np.mean(mlabel == hsign))


def tie_calibrated_accuracy(pairs):
    """Pairwise accuracy with an optimized metric tie threshold.

    Human ties are exact equalities. The threshold is searched over
    :func:`tie_candidates`; the smallest maximizing threshold is returned.

    Returns:
        ``(accuracy, TieThreshold)``.
    """
    absd, msign, hsign = _tie_inputs(pairs)
    n = len(absd)
    order = np.argsort(absd, kind="stable")
    absd, msign, hsign = absd[order], msign[order], hsign[order]
    # sweeping epsilon upward turns pairs into metric ties in |diff| order
    as_sign = (msign == hsign).astype(int)
    as_tie = (hsign == 0).astype(int)
    gain = np.concatenate([[0], np.cumsum(as_tie - as_sign)])
    base = as_sign.sum()
    best_acc, best_eps = -1.0, 0.0
    for eps in tie_candidates(absd):
        k = int(np.searchsorted(absd, eps, side="right"))
        acc = (base + gain[k]) / n
        if acc > best_acc:
            best_acc, best_eps = acc, float(eps)
    return float(best_acc), TieThreshold(best_eps)


def _sign_chunk(seed, label, chunk, rows, n):
    rng = np.random.default_rng(derive_seed(seed, label, chunk))
    return rng.integers(0, 2, size=(rows, n), dtype=np.int8)


def _sign_draws(seed, label, iterations, n, workers=1):
    """``(iterations, n)`` array of 0/1 draws, identical for any worker count."""
    chunks = [(c, min(CHUNK, iterations - c * CHUNK)) for c in range((iterations + CHUNK - 1) // CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda cr: _sign_chunk(seed, label, cr[0], cr[1], n), chunks))
    else:
        parts = [_sign_chunk(seed, label, c, r, n) for c, r in chunks]
    return np.concatenate(parts) if parts else np.zeros((0, n), dtype=np.int8)


def sign_flip_pvalue(diffs, iterations, seed, label="flip", workers=1):
    """One-sided paired permutation p-value that the mean difference is > 0.

    Returns the share of sign-flipped resamples whose mean is at least the
    observed mean.
    """
    d = np.asarray(diffs, dtype=float)
    if d.size == 0:
        raise ContractError("no paired differences")
    flips = _sign_draws(seed, label, iterations, d.size, workers) * 2 - 1
    means = flips @ d / d.size
    observed = d.mean()
    return float(np.mean(means >= observed - 1e-12 * max(1.0, abs(observed))))


def exact_sign_flip_pvalue(diffs):
    """Exhaustive version of :func:`sign_flip_pvalue` over all 2^n sign patterns."""
    d = np.asarray(diffs, dtype=float)
    n = d.size
    if n > 20:
        raise ContractError("exhaustive enumeration limited to 20 items")
    codes = np.arange(2**n)[:, None]
    flips = ((codes >> np.arange(n)) & 1) * 2 - 1
    means = flips @ d / n
    observed = d.mean()
    return float(np.mean(means >= observed - 1e-12 * max(1.0, abs(observed))))


def spa_from_pvalues(p_human, p_metric):
    p_human = np.asarray(p_human, dtype=float)
    p_metric = np.asarray(p_metric, dtype=float)
    if p_human.size == 0 or p_human.shape != p_metric.shape:
        raise ContractError("p-value lists must be non-empty and aligned")
    return float(np.mean(1.0 - np.abs(p_human - p_metric)))


def spa_pvalues(sm, iterations=1000, seed=0, workers=1, exact=False):
    """Per system pair ``(i, j)``: p-values that i beats j under human and metric scores.

    The same sign draws are used for the human and metric test of a pair.
    With ``exact`` the permutation distribution is enumerated.
    """
    if len(sm.systems) < 2:
        raise ContractError("need at least two systems")
    ok = sm.comparable
    out = []
    for i, j in combinations(range(len(sm.systems)), 2):
        both = ok[i] & ok[j]
        if not both.any():
            raise ContractError(f"systems {sm.systems[i]!r} and {sm.systems[j]!r} share no segment")
        dh = sm.human[i, both] - sm.human[j, both]
        dm = sm.metric[i, both] - sm.metric[j, both]
        if exact:
            out.append((exact_sign_flip_pvalue(dh), exact_sign_flip_pvalue(dm)))
        else:
            label = f"spa:{sm.systems[i]}:{sm.systems[j]}"
            out.append(
                (
                    sign_flip_pvalue(dh, iterations, seed, label, workers),
                    sign_flip_pvalue(dm, iterations, seed, label, workers),
                )
            )
    return out


def soft_pairwise_accuracy(sm, iterations=1000, seed=0, workers=1):
    """Mean over system pairs of ``1 - |p_human - p_metric|``."""
    ps = spa_pvalues(sm, iterations, seed, workers)
    return spa_from_pvalues([p[0] for p in ps], [p[1] for p in ps])


def perm_both(metric_a, metric_b, human, correlation_fn, iterations=1000, seed=0, workers=1):
    """Permutation test that metric A agrees with humans better than metric B.

    Items are the entries along the first axis; each resample swaps A and B
    on every item independently with probability 1/2. The p-value is
    ``(count(delta' >= delta) + 1) / (iterations + 1)``.
    """
    a = np.asarray(metric_a, dtype=float)
    b = np.asarray(metric_b, dtype=float)
    h = np.asarray(human, dtype=float)
    if a.shape != b.shape or a.shape[:1] != h.shape[:1]:
        raise ContractError("metric_a, metric_b and human must be aligned")
    if a.shape[0] == 0:
        raise ContractError("empty score lists")
    observed = correlation_fn(a, h) - correlation_fn(b, h)
    swaps = _sign_draws(seed, "perm-both", iterations, a.shape[0], workers).astype(bool)
    extra = (slice(None),) + (None,) * (a.ndim - 1)
    count = 0
    for s in swaps:
        m = s[extra]
        delta = correlation_fn(np.where(m, b, a), h) - correlation_fn(np.where(m, a, b), h)
        if delta >= observed - 1e-12:
            count += 1
    return (count + 1) / (iterations + 1)


def exact_perm_both(metric_a, metric_b, human, correlation_fn):
    """Share of all 2^n swap patterns with delta' >= delta (identity included)."""
    a = np.asarray(metric_a, dtype=float)
    b = np.asarray(metric_b, dtype=float)
    h = np.asarray(human, dtype=float)
    n = a.shape[0]
    if n > 16:
        raise ContractError("exhaustive enumeration limited to 16 items")
    observed = correlation_fn(a, h) - correlation_fn(b, h)
    extra = (slice(None),) + (None,) * (a.ndim - 1)
    count = 0
    for code in range(2**n):
        m = (((code >> np.arange(n)) & 1).astype(bool))[extra]
        if correlation_fn(np.where(m, b, a), h) - correlation_fn(np.where(m, a, b), h) >= observed - 1e-12:
            count += 1
    return count / 2**n


def pearson(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    return float((xc * yc).sum() / denom) if denom > 0 else 0.0


def tau_like(items):
    """(C - D) / (C + D); ties count as discordant."""
    items = list(items)
    if not items:
        raise ContractError("no ACES items")
    good = np.array([it.good_score for it in items])
    bad = np.array([it.incorrect_score for it in items])
    c = int(np.sum(good > bad))
    d = len(items) - c
    return (c - d) / (c + d)


def aces_composite(taus):
    """Weighted sum of per-category tau-like values."""
    missing = [p for p in PHENOMENA if p not in taus]
    if missing:
        raise ContractError(f"missing ACES categories: {', '.join(missing)}")
    unknown = [p for p in taus if p not in ACES_WEIGHTS]
    if unknown:
        raise ContractError(f"unknown ACES categories: {', '.join(unknown)}")
    return float(sum(ACES_WEIGHTS[p] * float(taus[p]) for p in PHENOMENA))


def aces_by_category(items):
    groups = {}
    for it in items:
        groups.setdefault(it.phenomenon, []).append(it)
    return {p: tau_like(groups[p]) for p in sorted(groups)}


def system_accuracy_items(metric, human):
    """System-level accuracy over ``(segments, systems)`` arrays; NaN marks missing cells."""
    metric, human = np.asarray(metric, dtype=float), np.asarray(human, dtype=float)
    n_sys = metric.shape[1]
    sm = ScoreMatrix("", list(range(n_sys)), list(range(metric.shape[0])), metric.T, human.T)
    return system_pairwise_accuracy(sm)


def segment_accuracy_items(epsilon):
    """Correlation function for Perm-Both: group-by-item accuracy at a fixed tie threshold."""

    def fn(metric, human):
        metric, human = np.asarray(metric, dtype=float), np.asarray(human, dtype=float)
        sm = ScoreMatrix("", list(range(metric.shape[1])), list(range(metric.shape[0])), metric.T, human.T)
        return accuracy_at(segment_pairs(sm), epsilon)

    return fn
