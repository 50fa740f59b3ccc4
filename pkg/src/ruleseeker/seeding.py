"""Deterministic seed derivation.

All randomness in the package flows from a single root seed. Child seeds are
derived per purpose (and optional indices) through numpy's SeedSequence, so
partial reruns of a pipeline stage see exactly the same stream regardless of
what ran before.
"""
from __future__ import annotations

import os

import numpy as np

SCHEME = "seedseq-v1"

# Stable purpose codes; appending is fine, renumbering is not.
_PURPOSES = {
    "split": 1,
    "model": 2,
    "anchors": 3,
    "sample": 4,
    "eval": 5,
    "solver": 6,
    "misc": 7,
}

ROOT_SEED_ENV = "RULESEEKER_SEED"


def purpose_code(purpose: str) -> int:
    try:
        return _PURPOSES[purpose]
    except KeyError:
        raise KeyError(f"unknown seed purpose {purpose!r}; known: {sorted(_PURPOSES)}")


def derive_seed(root: int, purpose: str, *indices: int) -> int:
    """Derive a 63-bit child seed from a root seed, a purpose, and indices."""
    entropy = (int(root), purpose_code(purpose)) + tuple(int(i) for i in indices)
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def generator(root: int, purpose: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, purpose, *indices))


def root_seed_default() -> int:
    """Root seed from the environment, falling back to 0."""
    raw = os.environ.get(ROOT_SEED_ENV, "").strip()
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{ROOT_SEED_ENV} must be an integer, got {raw!r}")
