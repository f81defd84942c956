"""Light input checks shared by the estimator and the metric functions."""

from __future__ import annotations

import numpy as np


def check_pair_array(X, card_i: int | None = None,
                     card_j: int | None = None) -> np.ndarray:
    """Coerce X to a non-empty (n, 2) int64 array of (context, target) ids."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != 2 or len(X) == 0:
        raise ValueError(f"expected a non-empty (n, 2) pair array, got shape {X.shape}")
    if not np.issubdtype(X.dtype, np.integer):
        rounded = np.rint(np.asarray(X, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(X, dtype=np.float64)):
            raise ValueError("pair ids must be integers")
        X = rounded
    X = X.astype(np.int64)
    if X.min() < 0:
        raise ValueError("pair ids must be non-negative")
    if card_i is not None and X[:, 0].max() >= card_i:
        raise ValueError(f"context id {X[:, 0].max()} out of range [0, {card_i})")
    if card_j is not None and X[:, 1].max() >= card_j:
        raise ValueError(f"target id {X[:, 1].max()} out of range [0, {card_j})")
    return X


def check_context_ids(X, card_i: int) -> np.ndarray:
    """Coerce X to a 1-D int64 array of context ids within range."""
    X = np.asarray(X)
    if X.ndim != 1 or len(X) == 0:
        raise ValueError(f"expected a non-empty 1-D id array, got shape {X.shape}")
    X = X.astype(np.int64)
    if X.min() < 0 or X.max() >= card_i:
        raise ValueError(f"context id out of range [0, {card_i})")
    return X
