"""Hyperparameter grid search scored by validation ROC-AUC."""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from itertools import product

import numpy as np

from ..evaluation import roc_auc

Trainer = Callable[..., object]  # (X, y, **params) -> model with .score(X)


def expand_grid(axes: Mapping[str, Sequence]) -> list[dict]:
    """Cartesian product of parameter axes, in insertion order."""
    keys = list(axes)
    return [dict(zip(keys, combo)) for combo in product(*(axes[k] for k in keys))]


@dataclass
class SearchResult:
    best_params: dict
    best_model: object
    best_auc: float
    results: list[tuple[dict, float]]


def grid_search(
    trainer: Trainer,
    grid: Sequence[dict],
    X_train,
    y_train: np.ndarray,
    X_val,
    y_val: np.ndarray,
) -> SearchResult:
    """Train one model per grid point and keep the validation ROC-AUC argmax.

    Ties go to the earlier grid point, so the search is deterministic for a
    deterministic trainer.
    """
    if not grid:
        raise ValueError("empty grid")
    best: tuple[dict, object, float] | None = None
    results: list[tuple[dict, float]] = []
    for params in grid:
        model = trainer(X_train, y_train, **params)
        auc = roc_auc(model.score(X_val), y_val)
        results.append((params, auc))
        if best is None or auc > best[2]:
            best = (params, model, auc)
    return SearchResult(
        best_params=best[0], best_model=best[1], best_auc=best[2], results=results
    )
