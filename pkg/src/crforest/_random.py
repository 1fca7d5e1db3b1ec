"""Seed mixing helpers.

Per-tree and per-row random streams are derived by hashing, never by
drawing sequentially from a shared stream, so results do not depend on
the order in which workers pick up tasks.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    """Finalizer of the SplitMix64 generator applied to a Python int."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix_seed(seed, *keys):
    """Combine a base seed with any number of integer keys into a 64-bit seed."""
    h = splitmix64(int(seed) & _MASK)
    for k in keys:
        h = splitmix64(h ^ (int(k) & _MASK))
    return h


def tree_rng(seed, tree_index):
    return np.random.Generator(np.random.PCG64(mix_seed(seed, tree_index)))


def _splitmix64_array(x):
    x = x + np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def hashed_uniforms(seed, tree_index, node, rows):
    """Deterministic uniforms in [0, 1), one per row id.

    Used for routing rows with missing covariates at prediction time; the
    value only depends on (seed, tree, node, row), so predictions do not
    depend on batch composition or ordering.
    """
    base = np.uint64(mix_seed(seed, tree_index, node))
    with np.errstate(over="ignore"):
        h = _splitmix64_array(np.asarray(rows, dtype=np.uint64) ^ base)
        h = _splitmix64_array(h)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
