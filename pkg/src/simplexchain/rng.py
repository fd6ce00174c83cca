"""Reproducible random streams built on the counter-based Philox generator.

Every consumer derives its stream from a 64-bit seed plus a stream id, so
replica batches can be generated independently and in any order while
staying bit-reproducible.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator keyed by (seed, stream_id)."""
    key = (int(seed) & _MASK64) | ((int(stream_id) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def categorical_index(cumulative: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over half-open bins [c_{k-1}, c_k).

    Deterministic at bin boundaries: a draw equal to c_k selects bin k+1.
    """
    i = int(np.searchsorted(cumulative, u, side="right"))
    return min(i, cumulative.size - 1)


def categorical_index_batch(cumulative: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF draws; same bin convention as categorical_index."""
    i = (u[:, None] >= cumulative).sum(axis=1)
    return np.minimum(i, cumulative.shape[1] - 1)
