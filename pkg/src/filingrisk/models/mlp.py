"""Small multi-layer perceptron for binary risk scoring.

Rectifier hidden layers, a single sigmoid output, minibatch gradient
descent on the weighted logistic loss with L2 weight decay on the weight
matrices (biases are not decayed).  With no hidden layers and zero
initialization this is exactly logistic regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .common import TrainConfig, as_weights, check_binary_labels, check_finite_matrix, sigmoid

Params = list[tuple[np.ndarray, np.ndarray]]  # (weight matrix, bias vector) per layer


@dataclass
class MlpModel:
    layers: Params
    reg_strength: float = 0.0
    config: TrainConfig = field(default_factory=TrainConfig)

    def margins(self, X: np.ndarray) -> np.ndarray:
        activation = np.asarray(X, dtype=float)
        for W, b in self.layers[:-1]:
            activation = np.maximum(activation @ W + b, 0.0)
        W, b = self.layers[-1]
        return (activation @ W + b).ravel()

    def score(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.margins(X))


def init_params(
    n_features: int, hidden_sizes: list[int], rng: np.random.Generator, scale: float | None
) -> Params:
    """He-style scaled normal initialization; ``scale=0`` gives zero init."""
    sizes = [n_features, *hidden_sizes, 1]
    params: Params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / fan_in) if scale is None else scale
        W = rng.standard_normal((fan_in, fan_out)) * std
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params: Params, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Hidden activations plus output margins, for backprop."""
    activations = [np.asarray(X, dtype=float)]
    for W, b in params[:-1]:
        activations.append(np.maximum(activations[-1] @ W + b, 0.0))
    W, b = params[-1]
    margins = (activations[-1] @ W + b).ravel()
    return activations, margins


def mlp_objective(
    params: Params, X: np.ndarray, y: np.ndarray, weights: np.ndarray, lam: float
) -> float:
    _, margins = forward(params, X)
    per_sample = np.logaddexp(0.0, margins) - y * margins
    loss = float(np.sum(weights * per_sample) / weights.sum())
    if lam > 0:
        loss += lam * 0.5 * sum(float((W * W).sum()) for W, _ in params)
    return loss


def mlp_gradients(
    params: Params, X: np.ndarray, y: np.ndarray, weights: np.ndarray, lam: float
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Backpropagated gradients of ``mlp_objective`` w.r.t. every layer."""
    activations, margins = forward(params, X)
    delta = (weights * (sigmoid(margins) - y) / weights.sum())[:, None]
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)  # type: ignore[list-item]
    for layer in range(len(params) - 1, -1, -1):
        W, _ = params[layer]
        grad_W = activations[layer].T @ delta
        if lam > 0:
            grad_W = grad_W + lam * W
        grad_b = delta.sum(axis=0)
        grads[layer] = (grad_W, grad_b)
        if layer > 0:
            delta = (delta @ W.T) * (activations[layer] > 0)
    return grads


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray | None = None,
    hidden_sizes: list[int] | None = None,
    learning_rate: float | None = None,
    reg_strength: float = 0.0,
    config: TrainConfig | None = None,
) -> MlpModel:
    """Seeded minibatch gradient descent for a fixed epoch budget.

    ``config.batch_size=None`` trains full-batch; otherwise rows are
    reshuffled every epoch with the run's generator.
    """
    config = config or TrainConfig()
    check_finite_matrix(X)
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    weights = as_weights(y, sample_weight)
    hidden_sizes = hidden_sizes or []
    lr = config.learning_rate if learning_rate is None else learning_rate

    rng = np.random.default_rng(config.seed)
    params = init_params(X.shape[1], hidden_sizes, rng, config.init_scale)
    n = X.shape[0]
    batch = n if config.batch_size is None else min(config.batch_size, n)

    for _ in range(config.epochs):
        order = np.arange(n) if batch == n else rng.permutation(n)
        for start in range(0, n, batch):
            rows = order[start : start + batch]
            grads = mlp_gradients(params, X[rows], y[rows], weights[rows], reg_strength)
            params = [
                (W - lr * gW, b - lr * gb)
                for (W, b), (gW, gb) in zip(params, grads)
            ]

    return MlpModel(layers=params, reg_strength=reg_strength, config=config)
