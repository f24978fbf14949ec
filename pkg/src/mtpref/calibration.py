"""Entropy-guided temperature selection for sigmoid reward calibration."""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError

DEFAULT_BINS = 20


def default_grid():
    """200 log-spaced temperatures over [0.05, 20], plus 1.0 itself."""
    return np.union1d(np.logspace(math.log10(0.05), math.log10(20.0), 200), [1.0])


@dataclass
class CalibrationResult:
    tau: float
    bins: int
    entropy: float
    histogram: list = field(default_factory=list)

    def to_json(self):
        return asdict(self)


def histogram(values, bins=DEFAULT_BINS):
    """Normalized counts over equal-width bins [k/bins, (k+1)/bins); the last bin is closed."""
    if bins < 2:
        raise ContractError("bins must be >= 2")
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ContractError("values must be non-empty")
    if np.any(~np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
        raise ContractError("values must lie in [0, 1]")
    idx = np.minimum(np.floor(v * bins).astype(int), bins - 1)
    return np.bincount(idx, minlength=bins) / v.size


def histogram_entropy(values, bins=DEFAULT_BINS):
    """Shannon entropy (nats) of the binned distribution of values in [0, 1]."""
    p = histogram(values, bins)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def apply_sigmoid(r, tau):
    """sigmoid(r / tau), overflow-safe, for scalars or arrays."""
    if not tau > 0:
        raise ContractError("tau must be > 0")
    z = np.asarray(r, dtype=float) / tau
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def select_temperature(rewards, bins=DEFAULT_BINS, grid=None):
    """Pick the temperature whose calibrated histogram has maximal entropy.

    Ties go to the temperature closest to 1.0, then to the smaller one.
    """
    r = np.asarray(rewards, dtype=float).ravel()
    if r.size < 2:
        raise ContractError("need at least two rewards")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid <= 0):
        raise ContractError("grid must be non-empty and positive")
    best = None
    for tau in grid:
        h = histogram_entropy(apply_sigmoid(r, tau), bins)
        key = (-h, abs(tau - 1.0), tau)
        if best is None or key < best[0]:
            best = (key, float(tau), h)
    _, tau, h = best
    return CalibrationResult(tau, bins, h, histogram(apply_sigmoid(r, tau), bins).tolist())


def calibrate_pools(rewards, pools, bins=DEFAULT_BINS, grid=None, tau=None):
    """Calibrate each pool of rewards separately.

    ``pools`` labels each reward. With ``tau`` given, every pool uses it and
    no search is run. Returns ``(calibrated array, {pool: CalibrationResult})``.
    """
    r = np.asarray(rewards, dtype=float)
    out = np.empty_like(r)
    results = {}
    for pool in sorted(set(pools)):
        mask = np.array([p == pool for p in pools])
        if tau is None:
            if mask.sum() < 2:
                raise ContractError(f"pool {pool!r} has fewer than two rewards")
            res = select_temperature(r[mask], bins, grid)
        else:
            cal = apply_sigmoid(r[mask], tau)
            res = CalibrationResult(float(tau), bins, histogram_entropy(cal, bins), histogram(cal, bins).tolist())
        out[mask] = apply_sigmoid(r[mask], res.tau)
        results[pool] = res
    return out, results


def write_calibration(results, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({k: v.to_json() for k, v in sorted(results.items())}, fh, indent=2)
        fh.write("\n")
