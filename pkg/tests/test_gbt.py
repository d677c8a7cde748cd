import numpy as np
import pytest

from filingrisk.models import GbtParams, TrainConfig, train_gbt
from filingrisk.models.common import sigmoid, weighted_log_loss
from filingrisk.models.gbt import TreeNode, _best_split


class TestBestSplit:
    def test_threshold_between_classes_matches_enumeration(self):
        # One feature, threshold-separable labels.
        X = np.array([[0.1], [0.4], [0.9], [1.7], [2.2], [3.0]])
        y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        p = np.full(6, 0.5)
        g = p - y
        h = p * (1 - p)
        rows = np.arange(6)
        lam = 1.0
        found = _best_split(X, g, h, rows, lam)
        assert found is not None
        gain, feature, threshold, _ = found
        assert feature == 0
        assert 0.9 < threshold < 1.7

        # Oracle: enumerate every midpoint split by hand.
        def split_gain(thr):
            left = X[:, 0] <= thr
            GL, HL = g[left].sum(), h[left].sum()
            GR, HR = g[~left].sum(), h[~left].sum()
            parent = g.sum() ** 2 / (h.sum() + lam)
            return 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - parent)

        midpoints = [(a + b) / 2 for a, b in zip(sorted(X[:, 0])[:-1], sorted(X[:, 0])[1:])]
        best_manual = max(midpoints, key=split_gain)
        assert split_gain(threshold) == pytest.approx(split_gain(best_manual))
        assert gain == pytest.approx(split_gain(best_manual))

    def test_no_split_on_constant_feature(self):
        X = np.ones((5, 1))
        g = np.array([0.5, -0.5, 0.5, -0.5, 0.5])
        h = np.full(5, 0.25)
        assert _best_split(X, g, h, np.arange(5), 1.0) is None


class TestMissingRouting:
    def test_missingness_predicts_label_one_depth_one_tree(self):
        # Feature present -> label 0; feature missing -> label 1.
        rng = np.random.default_rng(61)
        n = 200
        y = (rng.random(n) < 0.4).astype(float)
        X = np.where(y[:, None] == 1, np.nan, rng.normal(size=(n, 1)))
        model = train_gbt(
            X, y, params=GbtParams(n_trees=1, learning_rate=1.0, max_depth=1),
            config=TrainConfig(seed=0),
        )
        assert len(model.trees) == 1
        assert model.trees[0].depth() == 1
        predictions = (model.score(X) > 0.5).astype(float)
        assert np.array_equal(predictions, y)

    def test_default_direction_applied_at_prediction(self):
        X = np.array([[0.0], [1.0], [np.nan], [np.nan]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        model = train_gbt(
            X, y, params=GbtParams(n_trees=1, learning_rate=1.0, max_depth=1),
            config=TrainConfig(seed=0),
        )
        fresh_missing = model.score(np.array([[np.nan]]))
        fresh_present = model.score(np.array([[0.5]]))
        assert fresh_missing[0] > fresh_present[0]

    def test_missing_rows_route_to_higher_gain_child(self):
        # Missing rows share the positive pattern of high values.
        X = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [np.nan], [np.nan]])
        y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0])
        model = train_gbt(
            X, y, params=GbtParams(n_trees=1, learning_rate=1.0, max_depth=1),
            config=TrainConfig(seed=0),
        )
        root = model.trees[0]
        assert not root.is_leaf
        assert root.missing_left is False  # positives live on the right branch
        predictions = (model.score(X) > 0.5).astype(float)
        assert np.array_equal(predictions, y)


class TestTraining:
    def test_constant_labels_improve_on_base(self):
        X = np.arange(20.0).reshape(10, 2)
        y = np.ones(10)
        model = train_gbt(X, y, params=GbtParams(n_trees=3), config=TrainConfig(seed=0))
        w = np.ones(10)
        base_only = weighted_log_loss(np.full(10, model.base_score), y, w)
        trained = weighted_log_loss(model.margins(X), y, w)
        assert trained <= base_only

    def test_max_depth_respected(self):
        rng = np.random.default_rng(67)
        X = rng.normal(size=(300, 6))
        y = (X[:, 0] * X[:, 1] > 0).astype(float)
        for depth in (1, 2, 4):
            model = train_gbt(
                X, y, params=GbtParams(n_trees=10, max_depth=depth),
                config=TrainConfig(seed=1),
            )
            assert max(tree.depth() for tree in model.trees) <= depth

    def test_deterministic_with_and_without_subsampling(self):
        rng = np.random.default_rng(71)
        X = rng.normal(size=(150, 5))
        y = (X[:, 2] > 0.2).astype(float)
        for subsample in (1.0, 0.7):
            params = GbtParams(n_trees=8, subsample=subsample)
            a = train_gbt(X, y, params=params, config=TrainConfig(seed=5))
            b = train_gbt(X, y, params=params, config=TrainConfig(seed=5))
            assert np.array_equal(a.score(X), b.score(X))

    def test_loss_not_worse_than_init(self):
        rng = np.random.default_rng(73)
        X = rng.normal(size=(200, 4))
        y = (rng.random(200) < 0.3).astype(float)
        model = train_gbt(X, y, params=GbtParams(n_trees=15), config=TrainConfig(seed=0))
        w = np.ones(200)
        assert weighted_log_loss(model.margins(X), y, w) <= weighted_log_loss(
            np.full(200, model.base_score), y, w
        )

    def test_sample_weights_shift_leaves(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([1.0, 0.0, 0.0, 0.0])
        unweighted = train_gbt(
            X, y, params=GbtParams(n_trees=5, learning_rate=0.5), config=TrainConfig(seed=0)
        )
        weighted = train_gbt(
            X, y, sample_weight=np.array([20.0, 1.0, 1.0, 1.0]),
            params=GbtParams(n_trees=5, learning_rate=0.5), config=TrainConfig(seed=0),
        )
        assert weighted.score(np.array([[0.0]]))[0] > unweighted.score(np.array([[0.0]]))[0]

    def test_infinite_input_rejected(self):
        with pytest.raises(ValueError):
            train_gbt(np.array([[np.inf]]), np.array([1.0]))


class TestTreeSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(79)
        X = rng.normal(size=(100, 3))
        X[::9, 1] = np.nan
        y = (X[:, 0] > 0).astype(float)
        model = train_gbt(X, y, params=GbtParams(n_trees=4), config=TrainConfig(seed=3))
        for tree in model.trees:
            rebuilt = TreeNode.from_dict(tree.to_dict())
            assert rebuilt.to_dict() == tree.to_dict()
