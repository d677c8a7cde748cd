import numpy as np
import pytest
from scipy import sparse

from filingrisk.evaluation import roc_auc
from filingrisk.models import (
    GbtParams,
    NoMinoritySamples,
    TrainConfig,
    class_weights,
    expand_grid,
    grid_search,
    load_model,
    oversample,
    save_model,
    train_gbt,
    train_logreg,
    train_mlp,
)
from filingrisk.models.common import weighted_log_loss
from filingrisk.models.linear import objective, smooth_gradient
from filingrisk.models.mlp import mlp_gradients, mlp_objective


def planted_problem(n=400, d=8, seed=0, separation=4.0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(float)
    X = rng.normal(size=(n, d))
    X[:, 0] += separation * (y - 0.5)
    return X, y


def separable_problem(n=2000, d=28, seed=0):
    """Strictly linearly separable: the first feature carries a margin."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.5).astype(float)
    X = rng.normal(size=(n, d))
    X[:, 0] = (2 * y - 1) * rng.uniform(0.5, 3.0, size=n)
    return X, y


class TestOversample:
    def test_target_count(self):
        X = np.arange(102 * 2.0).reshape(102, 2)
        y = np.array([1, 1] + [0] * 100, dtype=float)
        X_out, y_out = oversample(X, y, ratio=0.5, seed=3)
        assert int(y_out.sum()) == 50
        assert int((y_out == 0).sum()) == 100

    def test_fixed_point(self):
        X = np.arange(8.0).reshape(4, 2)
        y = np.array([1.0, 0.0, 0.0, 0.0])
        X_out, y_out = oversample(X, y, ratio=1 / 3, seed=1)
        assert np.array_equal(X_out, X)
        assert np.array_equal(y_out, y)

    def test_deterministic(self):
        X, y = planted_problem(n=60, seed=2)
        a = oversample(X, y, ratio=0.9, seed=42)
        b = oversample(X, y, ratio=0.9, seed=42)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_new_rows_are_copies_of_input_positives(self):
        X, y = planted_problem(n=50, seed=4)
        X_out, y_out = oversample(X, y, ratio=1.0, seed=0)
        input_pos = {tuple(row) for row in X[y == 1]}
        for row in X_out[y_out == 1]:
            assert tuple(row) in input_pos

    def test_sparse_input(self):
        X = sparse.csr_matrix(np.eye(6))
        y = np.array([1.0, 0, 0, 0, 0, 0])
        X_out, y_out = oversample(X, y, ratio=0.6, seed=0)
        assert X_out.shape[0] == y_out.size == 8

    def test_no_positives_raises(self):
        with pytest.raises(NoMinoritySamples):
            oversample(np.zeros((3, 1)), np.zeros(3), ratio=0.5, seed=0)


class TestClassWeights:
    def test_formula(self):
        weights = class_weights(np.array([1, 0, 0, 0]))
        assert weights[0] == pytest.approx(2.0)
        assert weights[1:].tolist() == pytest.approx([2 / 3] * 3)

    def test_balanced_gives_ones(self):
        assert class_weights(np.array([1, 0, 1, 0])).tolist() == [1, 1, 1, 1]

    def test_sums_to_n(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            y = (rng.random(int(rng.integers(2, 100))) < 0.3).astype(int)
            if y.min() == y.max():
                continue
            assert class_weights(y).sum() == pytest.approx(y.size)

    def test_single_class_raises(self):
        with pytest.raises(ValueError):
            class_weights(np.ones(4))


class TestLogReg:
    def test_separable_sign(self):
        X = np.array([[-1.0], [1.0]])
        y = np.array([0.0, 1.0])
        model = train_logreg(X, y, config=TrainConfig(epochs=300, learning_rate=1.0))
        assert model.weights[0] > 0
        assert model.score(np.array([[1.0]]))[0] > model.score(np.array([[-1.0]]))[0]

    def test_l1_collapse_to_base_rate(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(80, 5))
        y = (rng.random(80) < 0.25).astype(float)
        model = train_logreg(
            X, y, penalty="l1", reg_strength=50.0,
            config=TrainConfig(epochs=3000, learning_rate=0.5),
        )
        assert np.all(model.weights == 0.0)
        assert model.score(X)[0] == pytest.approx(y.mean(), abs=1e-3)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(12, 4))
        y = (rng.random(12) < 0.5).astype(float)
        weights = rng.uniform(0.5, 2.0, size=12)
        w = rng.normal(size=4)
        b = 0.3
        lam = 0.2
        grad_w, grad_b = smooth_gradient(w, b, X, y, weights, "l2", lam)
        eps = 1e-6
        for j in range(4):
            bump = np.zeros(4)
            bump[j] = eps
            numeric = (
                objective(w + bump, b, X, y, weights, "l2", lam)
                - objective(w - bump, b, X, y, weights, "l2", lam)
            ) / (2 * eps)
            assert grad_w[j] == pytest.approx(numeric, rel=1e-5)
        numeric_b = (
            objective(w, b + eps, X, y, weights, "l2", 0.0)
            - objective(w, b - eps, X, y, weights, "l2", 0.0)
        ) / (2 * eps)
        assert grad_b == pytest.approx(numeric_b, rel=1e-5)

    def test_loss_not_worse_than_init(self):
        X, y = planted_problem(seed=13)
        model = train_logreg(X, y, config=TrainConfig(epochs=100, learning_rate=0.2))
        init_loss = weighted_log_loss(np.zeros(len(y)), y, np.ones(len(y)))
        final_loss = weighted_log_loss(model.margins(X), y, np.ones(len(y)))
        assert final_loss <= init_loss

    def test_sparse_matrix_supported(self):
        X, y = planted_problem(seed=17)
        dense = train_logreg(X, y, config=TrainConfig(epochs=50, learning_rate=0.2))
        sparse_model = train_logreg(
            sparse.csr_matrix(X), y, config=TrainConfig(epochs=50, learning_rate=0.2)
        )
        assert np.allclose(dense.weights, sparse_model.weights)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            train_logreg(np.array([[np.nan]]), np.array([1.0]))

    def test_weighted_fit_shifts_bias(self):
        X = np.zeros((4, 1))
        y = np.array([1.0, 0.0, 0.0, 0.0])
        heavy_pos = train_logreg(
            X, y, sample_weight=np.array([10.0, 1, 1, 1]),
            config=TrainConfig(epochs=2000, learning_rate=1.0),
        )
        # Weighted base rate 10/13 on constant features.
        assert heavy_pos.score(X)[0] == pytest.approx(10 / 13, abs=1e-3)


class TestMlp:
    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(4, 3))
        y = (rng.random(4) < 0.5).astype(float)
        weights = rng.uniform(0.5, 1.5, size=4)
        params = [
            (rng.normal(size=(3, 5)) * 0.7, rng.normal(size=5) * 0.1),
            (rng.normal(size=(5, 1)) * 0.7, rng.normal(size=1) * 0.1),
        ]
        lam = 0.1
        grads = mlp_gradients(params, X, y, weights, lam)
        eps = 1e-6
        for layer in range(2):
            W, b = params[layer]
            for index in np.ndindex(*W.shape):
                bumped = [(w.copy(), bb.copy()) for w, bb in params]
                bumped[layer][0][index] += eps
                up = mlp_objective(bumped, X, y, weights, lam)
                bumped[layer][0][index] -= 2 * eps
                down = mlp_objective(bumped, X, y, weights, lam)
                numeric = (up - down) / (2 * eps)
                assert grads[layer][0][index] == pytest.approx(numeric, rel=1e-4, abs=1e-8)
            for j in range(b.size):
                bumped = [(w.copy(), bb.copy()) for w, bb in params]
                bumped[layer][1][j] += eps
                up = mlp_objective(bumped, X, y, weights, lam)
                bumped[layer][1][j] -= 2 * eps
                down = mlp_objective(bumped, X, y, weights, lam)
                numeric = (up - down) / (2 * eps)
                assert grads[layer][1][j] == pytest.approx(numeric, rel=1e-4, abs=1e-8)

    def test_no_hidden_layers_equals_logreg(self):
        X, y = planted_problem(n=100, seed=23)
        shared = dict(epochs=80, learning_rate=0.3)
        logreg = train_logreg(
            X, y, penalty="l2", reg_strength=0.01, config=TrainConfig(**shared)
        )
        mlp = train_mlp(
            X, y, hidden_sizes=[], reg_strength=0.01,
            config=TrainConfig(init_scale=0.0, batch_size=None, **shared),
        )
        assert np.allclose(mlp.score(X), logreg.score(X), atol=1e-6)

    def test_xor_learnable_with_hidden_layer(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0.0, 1.0, 1.0, 0.0])
        model = train_mlp(
            X, y, hidden_sizes=[8],
            config=TrainConfig(seed=1, epochs=2500, learning_rate=0.5),
        )
        predictions = (model.score(X) > 0.5).astype(float)
        assert np.array_equal(predictions, y)

    def test_loss_not_worse_than_init(self):
        X, y = planted_problem(seed=29)
        config = TrainConfig(seed=5, epochs=40, learning_rate=0.05, batch_size=64)
        model = train_mlp(X, y, hidden_sizes=[8], config=config)
        rng = np.random.default_rng(5)
        from filingrisk.models.mlp import init_params

        init = init_params(X.shape[1], [8], rng, None)
        w = np.ones(len(y))
        assert mlp_objective(model.layers, X, y, w, 0.0) <= mlp_objective(init, X, y, w, 0.0)

    def test_deterministic(self):
        X, y = planted_problem(n=120, seed=31)
        config = TrainConfig(seed=9, epochs=20, learning_rate=0.1, batch_size=32)
        a = train_mlp(X, y, hidden_sizes=[6], config=config)
        b = train_mlp(X, y, hidden_sizes=[6], config=config)
        assert np.allclose(a.score(X), b.score(X))


class TestFamiliesOnSeparableData:
    def test_all_reach_high_training_auc(self):
        X, y = separable_problem(n=2000, d=28, seed=37)
        logreg = train_logreg(X, y, config=TrainConfig(epochs=200, learning_rate=0.5))
        assert roc_auc(logreg.score(X), y) >= 0.99
        mlp = train_mlp(
            X, y, hidden_sizes=[16],
            config=TrainConfig(seed=1, epochs=30, learning_rate=0.1, batch_size=256),
        )
        assert roc_auc(mlp.score(X), y) >= 0.99
        gbt = train_gbt(
            X, y, params=GbtParams(n_trees=40, learning_rate=0.3, max_depth=3),
            config=TrainConfig(seed=2),
        )
        assert roc_auc(gbt.score(X), y) >= 0.99


class TestGridSearch:
    def test_single_point(self):
        X, y = planted_problem(n=100, seed=41)
        trainer = lambda X_, y_, reg: train_logreg(
            X_, y_, reg_strength=reg, config=TrainConfig(epochs=30, learning_rate=0.3)
        )
        result = grid_search(trainer, [{"reg": 0.1}], X, y, X, y)
        assert result.best_params == {"reg": 0.1}

    def test_planted_signal_beats_shuffled(self):
        X, y = planted_problem(n=300, seed=43)
        rng = np.random.default_rng(43)
        shuffled = rng.permutation(y)

        def trainer(X_, y_, use_true):
            labels = y if use_true else shuffled
            return train_logreg(
                X_, labels, config=TrainConfig(epochs=60, learning_rate=0.3)
            )

        result = grid_search(
            trainer, [{"use_true": False}, {"use_true": True}], X, y, X, y
        )
        assert result.best_params == {"use_true": True}

    def test_scores_within_unit_interval(self):
        X, y = planted_problem(n=200, seed=47)
        for model in (
            train_logreg(X, y, config=TrainConfig(epochs=30, learning_rate=0.3)),
            train_mlp(X, y, hidden_sizes=[4], config=TrainConfig(epochs=5, learning_rate=0.1)),
            train_gbt(X, y, params=GbtParams(n_trees=5), config=TrainConfig(seed=0)),
        ):
            scores = model.score(X)
            assert scores.min() >= 0.0 and scores.max() <= 1.0

    def test_expand_grid_order(self):
        grid = expand_grid({"a": [1, 2], "b": ["x", "y"]})
        assert grid == [
            {"a": 1, "b": "x"},
            {"a": 1, "b": "y"},
            {"a": 2, "b": "x"},
            {"a": 2, "b": "y"},
        ]

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            grid_search(lambda X, y: None, [], None, None, None, None)


class TestModelIO:
    def test_round_trips(self, tmp_path):
        X, y = planted_problem(n=80, seed=53)
        X_missing = X.copy()
        X_missing[::7, 2] = np.nan
        saved = {
            "logreg": train_logreg(X, y, config=TrainConfig(epochs=20, learning_rate=0.3)),
            "mlp": train_mlp(X, y, hidden_sizes=[4], config=TrainConfig(epochs=5, learning_rate=0.1)),
            "gbt": train_gbt(X_missing, y, params=GbtParams(n_trees=4), config=TrainConfig(seed=1)),
        }
        for name, model in saved.items():
            path = tmp_path / f"{name}.json"
            save_model(model, path)
            loaded = load_model(path)
            test_X = X_missing if name == "gbt" else X
            assert np.allclose(loaded.score(test_X), model.score(test_X)), name
