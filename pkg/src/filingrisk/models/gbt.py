"""Gradient-boosted binary trees with native missing-value handling.

Second-order boosting on the logistic loss: each round fits one
depth-limited tree to the gradient/hessian statistics of the current
margins, greedily choosing the split with the highest gain.  Rows whose
split feature is missing are routed to whichever child yields the higher
gain, and that choice is stored on the node as its default direction.
Thresholds are midpoints between consecutive distinct present values; when
a node contains missing rows, one extra candidate puts every present row
on the left and the missing block alone on the right, so missingness
itself is splittable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .common import TrainConfig, as_weights, check_binary_labels, sigmoid

_MIN_GAIN = 1e-12


@dataclass
class TreeNode:
    """Internal node (children set) or leaf (value set)."""

    value: float | None = None
    feature: int | None = None
    threshold: float | None = None
    missing_left: bool = False
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.value is not None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "missing_left": self.missing_left,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TreeNode":
        if "value" in payload:
            return cls(value=payload["value"])
        return cls(
            feature=payload["feature"],
            threshold=payload["threshold"],
            missing_left=payload["missing_left"],
            left=cls.from_dict(payload["left"]),
            right=cls.from_dict(payload["right"]),
        )


@dataclass
class GbtParams:
    n_trees: int = 50
    learning_rate: float = 0.1
    subsample: float = 1.0
    max_depth: int = 3
    reg_lambda: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")


@dataclass
class GbtModel:
    trees: list[TreeNode]
    base_score: float
    params: GbtParams = field(default_factory=GbtParams)

    def margins(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        total = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            total += self.params.learning_rate * _predict_tree(tree, X)
        return total

    def score(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.margins(X))


def _leaf_value(grad_sum: float, hess_sum: float, reg_lambda: float) -> float:
    return -grad_sum / (hess_sum + reg_lambda)


def _score_term(G, H, reg_lambda):
    return G * G / (H + reg_lambda)


def _best_split(
    X: np.ndarray, g: np.ndarray, h: np.ndarray, rows: np.ndarray, reg_lambda: float
) -> tuple[float, int, float, bool] | None:
    """Highest-gain (gain, feature, threshold, missing_left) over all
    features, or None when no valid split exists."""
    G = float(g[rows].sum())
    H = float(h[rows].sum())
    parent = _score_term(G, H, reg_lambda)
    best: tuple[float, int, float, bool] | None = None

    for feature in range(X.shape[1]):
        values = X[rows, feature]
        present = ~np.isnan(values)
        n_present = int(present.sum())
        if n_present == 0:
            continue
        order = np.argsort(values[present], kind="stable")
        sorted_values = values[present][order]
        grad_cum = np.cumsum(g[rows][present][order])
        hess_cum = np.cumsum(h[rows][present][order])
        G_present, H_present = grad_cum[-1], hess_cum[-1]
        G_miss, H_miss = G - G_present, H - H_present
        has_missing = n_present < rows.size

        cuts = np.flatnonzero(sorted_values[:-1] != sorted_values[1:])
        if cuts.size:
            thresholds = 0.5 * (sorted_values[cuts] + sorted_values[cuts + 1])
            GL, HL = grad_cum[cuts], hess_cum[cuts]
            GR, HR = G_present - GL, H_present - HL
            gain_right = 0.5 * (
                _score_term(GL, HL, reg_lambda)
                + _score_term(GR + G_miss, HR + H_miss, reg_lambda)
                - parent
            )
            gain_left = 0.5 * (
                _score_term(GL + G_miss, HL + H_miss, reg_lambda)
                + _score_term(GR, HR, reg_lambda)
                - parent
            )
            for gains, missing_left in ((gain_right, False), (gain_left, True)):
                if missing_left and not has_missing:
                    continue  # identical to missing-right when nothing is missing
                pick = int(np.argmax(gains))
                gain = float(gains[pick])
                if gain > _MIN_GAIN and (best is None or gain > best[0]):
                    best = (gain, feature, float(thresholds[pick]), missing_left)

        if has_missing:
            # Present rows left, missing block alone on the right.
            gain = 0.5 * (
                _score_term(G_present, H_present, reg_lambda)
                + _score_term(G_miss, H_miss, reg_lambda)
                - parent
            )
            if gain > _MIN_GAIN and (best is None or gain > best[0]):
                best = (gain, feature, float(sorted_values[-1]), False)

    return best


def _grow(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    depth: int,
    params: GbtParams,
) -> TreeNode:
    if depth >= params.max_depth or rows.size < 2:
        return TreeNode(value=_leaf_value(g[rows].sum(), h[rows].sum(), params.reg_lambda))
    found = _best_split(X, g, h, rows, params.reg_lambda)
    if found is None:
        return TreeNode(value=_leaf_value(g[rows].sum(), h[rows].sum(), params.reg_lambda))
    _, feature, threshold, missing_left = found
    values = X[rows, feature]
    missing = np.isnan(values)
    goes_left = np.where(missing, missing_left, values <= threshold)
    left_rows = rows[goes_left]
    right_rows = rows[~goes_left]
    if left_rows.size == 0 or right_rows.size == 0:
        return TreeNode(value=_leaf_value(g[rows].sum(), h[rows].sum(), params.reg_lambda))
    return TreeNode(
        feature=feature,
        threshold=threshold,
        missing_left=missing_left,
        left=_grow(X, g, h, left_rows, depth + 1, params),
        right=_grow(X, g, h, right_rows, depth + 1, params),
    )


def _predict_tree(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(tree, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            out[rows] = node.value
            continue
        values = X[rows, node.feature]
        missing = np.isnan(values)
        goes_left = np.where(missing, node.missing_left, values <= node.threshold)
        stack.append((node.left, rows[goes_left]))
        stack.append((node.right, rows[~goes_left]))
    return out


def train_gbt(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray | None = None,
    params: GbtParams | None = None,
    config: TrainConfig | None = None,
) -> GbtModel:
    """Boost ``params.n_trees`` rounds; deterministic for a fixed seed.

    ``X`` may contain NaN for missing entries.  Row subsampling (when
    ``params.subsample < 1``) draws a fixed-size subset per round from the
    run's generator.
    """
    params = params or GbtParams()
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    if np.isinf(X).any():
        raise ValueError("input matrix contains infinities")
    weights = as_weights(y, sample_weight)

    base_rate = float(np.clip((weights * y).sum() / weights.sum(), 1e-6, 1 - 1e-6))
    base_score = float(np.log(base_rate / (1 - base_rate)))
    margins = np.full(X.shape[0], base_score)
    rng = np.random.default_rng(config.seed)
    n = X.shape[0]
    sample_size = max(1, round(params.subsample * n))

    trees: list[TreeNode] = []
    for _ in range(params.n_trees):
        p = sigmoid(margins)
        g = weights * (p - y)
        h = weights * p * (1 - p)
        rows = np.arange(n) if sample_size == n else np.sort(rng.permutation(n)[:sample_size])
        tree = _grow(X, g, h, rows, 0, params)
        trees.append(tree)
        margins += params.learning_rate * _predict_tree(tree, X)

    return GbtModel(trees=trees, base_score=base_score, params=params)
