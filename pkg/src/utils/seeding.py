# src/utils/seeding.py
"""Deterministic seed derivation shared by training, augmentation and generation."""

import numpy as np


def derive_seed(*parts: int) -> int:
    """Hash any number of non-negative integers into one 64-bit seed.

    The same parts always give the same seed, independent of call order
    elsewhere or of the number of worker threads.
    """
    sequence = np.random.SeedSequence([int(p) for p in parts])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(*parts: int) -> np.random.Generator:
    """Generator seeded from derive_seed(*parts)."""
    return np.random.default_rng(np.random.SeedSequence([int(p) for p in parts]))
