"""Labeled sub-seed derivation so every random stream flows from one seed."""

import hashlib

import numpy as np


def derive_seed(seed, *labels):
    """Stable 64-bit sub-seed for ``seed`` and a path of string/int labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x00")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed, *labels):
    return np.random.default_rng(derive_seed(seed, *labels))
