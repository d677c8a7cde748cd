"""Versioned JSON model files and record/score CSVs.

The CSV format (``record_id,score``) is the interchange surface: scores
produced by any external tool can be dropped into the ensemble and
evaluation stages unchanged.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .common import TrainConfig
from .gbt import GbtModel, GbtParams, TreeNode
from .linear import LogRegModel
from .mlp import MlpModel

FORMAT_VERSION = 1


def model_to_payload(model) -> dict:
    payload: dict = {"format_version": FORMAT_VERSION}
    if isinstance(model, LogRegModel):
        payload.update(
            family="logreg",
            weights=model.weights.tolist(),
            bias=model.bias,
            penalty=model.penalty,
            reg_strength=model.reg_strength,
        )
    elif isinstance(model, MlpModel):
        payload.update(
            family="mlp",
            layers=[[W.tolist(), b.tolist()] for W, b in model.layers],
            reg_strength=model.reg_strength,
        )
    elif isinstance(model, GbtModel):
        payload.update(
            family="gbt",
            base_score=model.base_score,
            params=vars(model.params),
            trees=[tree.to_dict() for tree in model.trees],
        )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return payload


def model_from_payload(payload: dict):
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {version}")
    family = payload["family"]
    if family == "logreg":
        return LogRegModel(
            weights=np.array(payload["weights"], dtype=float),
            bias=float(payload["bias"]),
            penalty=payload["penalty"],
            reg_strength=float(payload["reg_strength"]),
            config=TrainConfig(),
        )
    if family == "mlp":
        return MlpModel(
            layers=[
                (np.array(W, dtype=float), np.array(b, dtype=float))
                for W, b in payload["layers"]
            ],
            reg_strength=float(payload["reg_strength"]),
            config=TrainConfig(),
        )
    if family == "gbt":
        return GbtModel(
            trees=[TreeNode.from_dict(t) for t in payload["trees"]],
            base_score=float(payload["base_score"]),
            params=GbtParams(**payload["params"]),
        )
    raise ValueError(f"unknown model family: {family}")


def save_model(model, path: str | Path, extra: dict | None = None) -> None:
    payload = model_to_payload(model)
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path):
    return model_from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def write_scores(path: str | Path, record_ids: Sequence[str], scores: Sequence[float]) -> None:
    if len(record_ids) != len(scores):
        raise ValueError("record_ids and scores must align")
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["record_id", "score"])
        for record_id, score in zip(record_ids, scores):
            writer.writerow([record_id, repr(float(score))])


def read_scores(path: str | Path) -> tuple[list[str], np.ndarray]:
    record_ids: list[str] = []
    scores: list[float] = []
    with Path(path).open(encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            record_ids.append(row["record_id"])
            scores.append(float(row["score"]))
    return record_ids, np.array(scores, dtype=float)
