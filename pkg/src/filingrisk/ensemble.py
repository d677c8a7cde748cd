"""Stacked combination of the two best uni-modal scorers.

Base-model scores are min-max normalized with statistics fitted on the
validation scores, then a 3-parameter logistic meta-classifier is trained
on the normalized pair.  At prediction time the stored normalizers are
applied (clamped to [0, 1]) before the logistic combination.

The stacking protocol requires base models trained on the train split
only when the meta-classifier is fitted on validation scores;
``ensure_meta_protocol`` rejects score files violating that data flow.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models.common import TrainConfig, sigmoid
from .models.linear import train_logreg


class DataLeakError(ValueError):
    """Meta-classifier would be fitted on scores its bases trained on."""


@dataclass(frozen=True)
class MinMaxNormalizer:
    lo: float
    hi: float

    def apply(self, scores: np.ndarray) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        if self.hi == self.lo:
            return np.full_like(scores, 0.5)
        return np.clip((scores - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    @classmethod
    def fit(cls, scores: np.ndarray) -> "MinMaxNormalizer":
        scores = np.asarray(scores, dtype=float)
        return cls(lo=float(scores.min()), hi=float(scores.max()))


@dataclass
class MetaModel:
    beta0: float
    beta1: float
    beta2: float
    normalizers: tuple[MinMaxNormalizer, MinMaxNormalizer]

    def to_json(self) -> str:
        return json.dumps(
            {
                "beta0": self.beta0,
                "beta1": self.beta1,
                "beta2": self.beta2,
                "normalizers": [[n.lo, n.hi] for n in self.normalizers],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "MetaModel":
        payload = json.loads(text)
        return cls(
            beta0=float(payload["beta0"]),
            beta1=float(payload["beta1"]),
            beta2=float(payload["beta2"]),
            normalizers=tuple(
                MinMaxNormalizer(lo=float(lo), hi=float(hi))
                for lo, hi in payload["normalizers"]
            ),  # type: ignore[arg-type]
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MetaModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def normalize_scores(scores: Sequence[float], normalizer: MinMaxNormalizer) -> np.ndarray:
    """(s - min) / (max - min), clamped to [0, 1]; all 0.5 when degenerate."""
    return normalizer.apply(np.asarray(scores, dtype=float))


_META_CONFIG = TrainConfig(seed=0, epochs=4000, learning_rate=1.0, tolerance=1e-10)


def fit_meta(
    base_scores_1: Sequence[float],
    base_scores_2: Sequence[float],
    y_val: Sequence[int],
    config: TrainConfig | None = None,
) -> MetaModel:
    """Fit normalizers and the unregularized logistic meta-classifier on
    aligned validation scores."""
    s1 = np.asarray(base_scores_1, dtype=float)
    s2 = np.asarray(base_scores_2, dtype=float)
    y = np.asarray(y_val, dtype=float)
    if not (s1.shape == s2.shape == y.shape):
        raise ValueError("score vectors and labels must be aligned")
    if y.min() == y.max():
        raise ValueError("validation labels contain a single class")
    normalizers = (MinMaxNormalizer.fit(s1), MinMaxNormalizer.fit(s2))
    Z = np.column_stack([normalizers[0].apply(s1), normalizers[1].apply(s2)])
    model = train_logreg(Z, y, penalty="l2", reg_strength=0.0, config=config or _META_CONFIG)
    return MetaModel(
        beta0=float(model.bias),
        beta1=float(model.weights[0]),
        beta2=float(model.weights[1]),
        normalizers=normalizers,
    )


def predict_meta(
    meta: MetaModel, base_scores_1: Sequence[float], base_scores_2: Sequence[float]
) -> np.ndarray:
    """sigma(b0 + b1*s1~ + b2*s2~) per row, using the stored normalizers."""
    s1 = meta.normalizers[0].apply(np.asarray(base_scores_1, dtype=float))
    s2 = meta.normalizers[1].apply(np.asarray(base_scores_2, dtype=float))
    return sigmoid(meta.beta0 + meta.beta1 * s1 + meta.beta2 * s2)


def ensure_meta_protocol(trained_on: Sequence[str], scored_split: str) -> None:
    """Reject fitting the meta-classifier on scores over data the base
    models already saw during training."""
    if scored_split in set(trained_on):
        raise DataLeakError(
            f"base model trained on {sorted(set(trained_on))} cannot provide "
            f"meta-training scores for split '{scored_split}'"
        )
