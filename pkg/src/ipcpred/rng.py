"""Deterministic derivation of independent random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
seeded by :func:`derive_seed`, which folds a base seed and a tuple of
integer keys (tree index, feature index, repeat, sample index, ...)
through SplitMix64::

    h = splitmix64(seed mod 2**64)
    for k in keys:
        h = splitmix64(h XOR (k mod 2**64))

The resulting 64-bit value seeds a PCG64 bit generator. Streams depend
only on ``(seed, keys)``, so work can be spread over threads in any order
without changing results.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed, *keys):
    h = splitmix64(int(seed) & MASK64)
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


def stream(seed, *keys):
    """Return a Generator for the stream identified by ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))
