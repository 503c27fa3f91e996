"""Counter-based random streams.

Every random draw is a pure function of ``(seed, key_1, ..., key_r)`` through a
SplitMix64-style mixer, so estimates never depend on how work is partitioned
across workers or on the order in which tasks finish.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# stream tags keep permutation, stratum and run-seed streams disjoint
TAG_PERMUTATION = 1
TAG_STRATUM = 2
TAG_RUN = 3
TAG_CELL = 4
TAG_GAME = 5
TAG_MISC = 6


def _u64(x) -> np.ndarray:
    if isinstance(x, (int, np.integer)):
        return np.asarray(int(x) & _MASK64, dtype=np.uint64)
    return np.asarray(x).astype(np.uint64)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash64(seed, *keys) -> np.ndarray:
    """Mix a seed and any number of (broadcastable) integer keys into uint64."""
    with np.errstate(over="ignore"):
        h = _mix(_u64(seed) ^ _GOLDEN)
        for key in keys:
            h = _mix((h + _GOLDEN) ^ _mix(_u64(key) + _GOLDEN))
    return h


def uniform01(seed, *keys) -> np.ndarray:
    """Uniform doubles in [0, 1) built from the top 53 bits of :func:`hash64`."""
    return (hash64(seed, *keys) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def derive_seed(seed, *keys) -> int:
    return int(hash64(seed, *keys))


def permutations(seed, perm_indices: np.ndarray, n: int) -> np.ndarray:
    """One uniformly random ordering of ``range(n)`` per permutation index."""
    perm_indices = np.asarray(perm_indices, dtype=np.int64)
    keys = hash64(seed, TAG_PERMUTATION, perm_indices[:, None], np.arange(n)[None, :])
    return np.argsort(keys, axis=1, kind="stable")


def random_subset_masks(seed, player: int, stratum: int, sample_indices: np.ndarray,
                        n: int) -> np.ndarray:
    """Boolean masks of uniformly random size-``stratum`` subsets of ``range(n) - {player}``.

    Sample ``j`` of stratum ``(player, stratum)`` depends only on ``(seed, player,
    stratum, j)``; picking the ``stratum`` smallest hash keys among the ``n - 1``
    candidates gives a uniform subset.
    """
    others = np.delete(np.arange(n), player)
    sample_indices = np.asarray(sample_indices, dtype=np.int64)
    masks = np.zeros((sample_indices.size, n), dtype=bool)
    if stratum == 0 or sample_indices.size == 0:
        return masks
    keys = hash64(seed, TAG_STRATUM, player, stratum, sample_indices[:, None], others[None, :])
    if stratum == n - 1:
        masks[:, others] = True
        return masks
    picked = np.argpartition(keys, stratum - 1, axis=1)[:, :stratum]
    rows = np.repeat(np.arange(sample_indices.size), stratum)
    masks[rows, others[picked.ravel()]] = True
    return masks
