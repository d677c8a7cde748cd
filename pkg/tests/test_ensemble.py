import numpy as np
import pytest

from filingrisk.ensemble import (
    DataLeakError,
    MetaModel,
    MinMaxNormalizer,
    ensure_meta_protocol,
    fit_meta,
    normalize_scores,
    predict_meta,
)
from filingrisk.evaluation import roc_auc


class TestNormalize:
    def test_basic_range(self):
        norm = MinMaxNormalizer.fit(np.array([0.0, 5.0, 10.0]))
        assert normalize_scores([0.0, 5.0, 10.0], norm).tolist() == [0.0, 0.5, 1.0]

    def test_clamps_out_of_range(self):
        norm = MinMaxNormalizer(lo=0.0, hi=10.0)
        assert normalize_scores([12.0], norm)[0] == 1.0
        assert normalize_scores([-3.0], norm)[0] == 0.0

    def test_degenerate_constant_scores(self):
        norm = MinMaxNormalizer.fit(np.array([4.2, 4.2, 4.2]))
        assert normalize_scores([4.2, 9.9], norm).tolist() == [0.5, 0.5]


class TestFitMeta:
    def _planted(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        y = (rng.random(n) < 0.4).astype(int)
        perfect = y + rng.normal(scale=0.01, size=n)
        noise = rng.normal(size=n)
        return perfect, noise, y

    def test_informative_base_dominates(self):
        perfect, noise, y = self._planted()
        meta = fit_meta(perfect, noise, y)
        assert meta.beta1 > 5 * abs(meta.beta2)
        combined = predict_meta(meta, perfect, noise)
        assert roc_auc(combined, y) >= roc_auc(noise, y)

    def test_swapping_bases_swaps_coefficients(self):
        perfect, noise, y = self._planted(seed=3)
        meta = fit_meta(perfect, noise, y)
        swapped = fit_meta(noise, perfect, y)
        assert meta.beta1 == pytest.approx(swapped.beta2)
        assert meta.beta2 == pytest.approx(swapped.beta1)
        assert meta.beta0 == pytest.approx(swapped.beta0)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            fit_meta([0.1, 0.2], [0.3, 0.4], [1, 1])

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            fit_meta([0.1], [0.2, 0.3], [1, 0])


class TestPredictMeta:
    def _meta(self, beta0, beta1, beta2):
        unit = MinMaxNormalizer(lo=0.0, hi=1.0)
        return MetaModel(beta0=beta0, beta1=beta1, beta2=beta2, normalizers=(unit, unit))

    def test_zero_coefficients_give_half(self):
        meta = self._meta(0.0, 0.0, 0.0)
        assert predict_meta(meta, [0.3, 0.9], [0.4, 0.2]).tolist() == [0.5, 0.5]

    def test_hand_computed_value(self):
        meta = self._meta(-1.0, 2.0, 1.0)
        out = predict_meta(meta, [0.5], [0.25])
        assert out[0] == pytest.approx(1 / (1 + np.exp(-0.25)), abs=1e-4)
        assert out[0] == pytest.approx(0.5622, abs=1e-4)

    def test_monotone_in_each_base(self):
        meta = self._meta(-0.5, 2.0, 1.5)
        low = predict_meta(meta, [0.2], [0.5])[0]
        high = predict_meta(meta, [0.8], [0.5])[0]
        assert high > low
        low2 = predict_meta(meta, [0.5], [0.2])[0]
        high2 = predict_meta(meta, [0.5], [0.8])[0]
        assert high2 > low2

    def test_outputs_strictly_inside_unit_interval(self):
        meta = self._meta(3.0, 10.0, -8.0)
        out = predict_meta(meta, [0.0, 1.0, 0.5], [1.0, 0.0, 0.5])
        assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_ranking_invariant_to_affine_rescaling(self):
        rng = np.random.default_rng(5)
        y = (rng.random(150) < 0.3).astype(int)
        base1 = rng.normal(size=150) + y
        base2 = rng.normal(size=150)
        meta = fit_meta(base1, base2, y)
        scores = predict_meta(meta, base1, base2)

        rescaled1 = 7.5 * base1 + 42.0  # strictly increasing affine map
        meta_rescaled = fit_meta(rescaled1, base2, y)
        scores_rescaled = predict_meta(meta_rescaled, rescaled1, base2)
        assert np.array_equal(np.argsort(scores), np.argsort(scores_rescaled))
        assert np.allclose(scores, scores_rescaled, atol=1e-9)


class TestProtocol:
    def test_validation_scores_from_train_only_ok(self):
        ensure_meta_protocol(["train"], "validation")

    def test_leak_detected(self):
        with pytest.raises(DataLeakError):
            ensure_meta_protocol(["train", "validation"], "validation")


class TestSerialization:
    def test_round_trip(self, tmp_path):
        meta = MetaModel(
            beta0=-0.5, beta1=1.25, beta2=0.3,
            normalizers=(MinMaxNormalizer(0.0, 2.0), MinMaxNormalizer(-1.0, 1.0)),
        )
        path = tmp_path / "meta.json"
        meta.save(path)
        loaded = MetaModel.load(path)
        assert loaded == meta
