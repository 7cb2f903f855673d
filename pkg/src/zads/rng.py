"""Seed-derived random generators.

Every stochastic quantity in the toolkit is drawn from a generator keyed
by ``(seed, purpose-tag, ...indices)`` so that any single draw can be
reproduced without replaying the draws before it. Complex noise follows
the two-component convention: ``CN(0, std**2)`` has independent real and
imaginary parts with variance ``std**2 / 2`` each.
"""

from __future__ import annotations

import numpy as np

TAG_PHANTOM = 0
TAG_COILS = 1
TAG_SIM_NOISE = 2
TAG_SPLIT = 3
TAG_XT = 4
TAG_BANK = 5
TAG_FRESH = 6
TAG_PRIOR_SAMPLE = 7


def rng_for(seed: int, *tags: int) -> np.random.Generator:
    """Generator for one purpose, independent of all other purposes."""
    return np.random.default_rng([int(seed), *[int(t) for t in tags]])


def complex_normal(rng: np.random.Generator, shape, std: float = 1.0) -> np.ndarray:
    """Draw CN(0, std**2) samples of the given shape."""
    parts = rng.standard_normal((2, *shape))
    return (std / np.sqrt(2.0)) * (parts[0] + 1j * parts[1])
