"""Class-imbalance treatments: minority oversampling and class weights."""

from __future__ import annotations

import numpy as np
from scipy import sparse


class NoMinoritySamples(ValueError):
    """Oversampling requires at least one positive example."""


def oversample(X, y: np.ndarray, ratio: float, seed: int):
    """Randomly duplicate positives until n_pos = round(ratio * n_neg).

    Negatives are untouched; extra positive rows are drawn with replacement
    from the input positives and appended after the original rows, so every
    output positive row equals some input positive row.  When the target is
    already met, the input comes back unchanged (positives are never
    dropped).  Deterministic for a fixed seed.
    """
    if not 0 < ratio <= 1:
        raise ValueError("ratio must be in (0, 1]")
    y = np.asarray(y)
    positive_rows = np.flatnonzero(y == 1)
    negative_rows = np.flatnonzero(y == 0)
    if positive_rows.size == 0:
        raise NoMinoritySamples("no positive rows to oversample")
    if negative_rows.size == 0:
        raise ValueError("no negative rows present")

    target = round(ratio * negative_rows.size)
    extra = max(target - positive_rows.size, 0)
    if extra == 0:
        return X, y
    rng = np.random.default_rng(seed)
    drawn = rng.choice(positive_rows, size=extra, replace=True)
    stack = sparse.vstack if sparse.issparse(X) else np.vstack
    X_out = stack([X, X[drawn]])
    y_out = np.concatenate([y, np.ones(extra, dtype=y.dtype)])
    return X_out, y_out


def class_weights(y: np.ndarray) -> np.ndarray:
    """Per-sample weights inversely proportional to class frequency.

    weight(class c) = n / (2 * n_c), so each class carries total weight n/2
    and the weights always sum to n.
    """
    y = np.asarray(y)
    n = y.size
    n_pos = int((y == 1).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    w_pos = n / (2.0 * n_pos)
    w_neg = n / (2.0 * n_neg)
    return np.where(y == 1, w_pos, w_neg).astype(float)
