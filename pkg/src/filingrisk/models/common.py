"""Shared numerics and training configuration for the model families."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (no overflow for |z| > 500)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    expz = np.exp(z[~positive])
    out[~positive] = expz / (1.0 + expz)
    return out


def weighted_log_loss(margins: np.ndarray, y: np.ndarray, weights: np.ndarray) -> float:
    """Weighted mean logistic loss from raw margins.

    Uses log(1 + e^z) - y*z via logaddexp, which is stable for large |z|.
    """
    per_sample = np.logaddexp(0.0, margins) - y * margins
    return float(np.sum(weights * per_sample) / np.sum(weights))


def as_weights(y: np.ndarray, sample_weight: np.ndarray | None) -> np.ndarray:
    if sample_weight is None:
        return np.ones_like(np.asarray(y, dtype=float))
    w = np.asarray(sample_weight, dtype=float)
    if w.shape != np.asarray(y).shape:
        raise ValueError("sample_weight shape must match y")
    return w


def check_finite_matrix(X) -> None:
    data = X.data if sparse.issparse(X) else np.asarray(X)
    if not np.all(np.isfinite(data)):
        raise ValueError("input matrix contains non-finite values")


def check_binary_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be binary 0/1")
    return y


@dataclass
class TrainConfig:
    """Optimizer settings shared across model families.

    Oversampling and class weighting are alternative imbalance treatments
    and cannot both be active in one run.
    """

    seed: int = 0
    epochs: int = 500
    learning_rate: float = 0.1
    tolerance: float = 0.0
    batch_size: int | None = None
    init_scale: float | None = None
    oversample_ratio: float | None = None
    class_weighting: bool = False

    def __post_init__(self) -> None:
        if self.oversample_ratio is not None and self.class_weighting:
            raise ValueError("choose either oversampling or class weighting, not both")
        if self.oversample_ratio is not None and not 0 < self.oversample_ratio <= 1:
            raise ValueError("oversample_ratio must be in (0, 1]")
