"""Reproducible random streams.

Every stream is a Philox (counter-based) generator keyed by a 64-bit word
obtained by mixing the user seed with integer stream coordinates through the
splitmix64 finalizer. Streams built from different coordinates are
statistically independent and do not depend on the order in which they are
created, which is what lets Monte Carlo replicates run on any number of
workers and still give bitwise-identical results.
"""

import numpy as np

_MASK = (1 << 64) - 1

# stream domains, kept distinct so replicate data never reuses a limit-draw key
REPLICATE_DOMAIN = 0x5EED_DA7A
LIMIT_DOMAIN = 0x11A1_7D2A


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix64(seed: int, *words: int) -> int:
    """Fold ``seed`` and any number of integer words into one 64-bit key."""
    h = splitmix64(int(seed) & _MASK)
    for w in words:
        h = splitmix64(h ^ splitmix64(int(w) & _MASK))
    return h


def generator(seed: int) -> np.random.Generator:
    """Generator for a bare 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=mix64(seed)))


def substream(seed: int, *index: int) -> np.random.Generator:
    """Generator for stream ``index`` (one or more integers) under ``seed``."""
    if not index:
        return generator(seed)
    return np.random.Generator(np.random.Philox(key=mix64(seed, *index)))
