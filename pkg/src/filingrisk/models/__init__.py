"""Trainable scorers: logistic regression, MLP, gradient-boosted trees."""

from .common import TrainConfig, sigmoid, weighted_log_loss
from .gbt import GbtModel, GbtParams, TreeNode, train_gbt
from .io import (
    load_model,
    model_from_payload,
    model_to_payload,
    read_scores,
    save_model,
    write_scores,
)
from .linear import LogRegModel, train_logreg
from .mlp import MlpModel, train_mlp
from .sampling import NoMinoritySamples, class_weights, oversample
from .search import SearchResult, expand_grid, grid_search

__all__ = [
    "TrainConfig",
    "sigmoid",
    "weighted_log_loss",
    "GbtModel",
    "GbtParams",
    "TreeNode",
    "train_gbt",
    "load_model",
    "save_model",
    "model_from_payload",
    "model_to_payload",
    "read_scores",
    "write_scores",
    "LogRegModel",
    "train_logreg",
    "MlpModel",
    "train_mlp",
    "NoMinoritySamples",
    "class_weights",
    "oversample",
    "SearchResult",
    "expand_grid",
    "grid_search",
]
