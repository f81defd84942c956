"""Estimator contract: sklearn plumbing, shapes, determinism, validation."""

import numpy as np
import pytest
from sklearn.base import clone

from pairvec.errors import ConfigError
from pairvec.estimator import CooccurrenceEmbedding


def toy_pairs(n=400, card_i=5, card_j=7, seed=0):
    rng = np.random.default_rng(seed)
    return np.stack([rng.integers(0, card_i, n), rng.integers(0, card_j, n)],
                    axis=1)


class TestSklearnPlumbing:
    def test_get_params_round_trips_through_clone(self):
        est = CooccurrenceEmbedding(method="US", dim=6, n_negatives=2,
                                    temperature=3.0, seed=11)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_set_params_chains(self):
        est = CooccurrenceEmbedding().set_params(dim=3, method="MLE")
        assert est.dim == 3 and est.method == "MLE"

    def test_unfitted_access_raises(self):
        est = CooccurrenceEmbedding()
        with pytest.raises(RuntimeError, match="not fitted"):
            est.transform([0])

    def test_invalid_method_surfaces_at_fit(self):
        est = CooccurrenceEmbedding(method="CBOW")
        with pytest.raises(ConfigError):
            est.fit(toy_pairs())


class TestFitTransformPredict:
    def _fitted(self, **kwargs):
        base = dict(method="US", dim=6, epochs=2, batch_size=64,
                    n_negatives=2, seed=3)
        base.update(kwargs)
        return CooccurrenceEmbedding(**base).fit(toy_pairs())

    def test_fitted_shapes(self):
        est = self._fitted()
        assert est.W_.shape == (5, 6)
        assert est.O_.shape == (7, 6)
        assert est.transform([0, 2, 4]).shape == (3, 6)

    def test_cardinalities_inferred_from_pairs(self):
        pairs = np.array([[0, 0], [3, 9]])
        est = CooccurrenceEmbedding(method="MLE", dim=2, batch_size=2).fit(pairs)
        assert est.W_.shape[0] == 4 and est.O_.shape[0] == 10

    def test_explicit_cardinalities_respected(self):
        est = CooccurrenceEmbedding(method="MLE", dim=2, card_i=8, card_j=12,
                                    batch_size=4).fit(np.array([[0, 1], [1, 0]]))
        assert est.W_.shape[0] == 8 and est.O_.shape[0] == 12

    def test_transform_returns_matching_rows(self):
        est = self._fitted()
        np.testing.assert_array_equal(est.transform([2, 2]),
                                      np.stack([est.W_[2], est.W_[2]]))

    def test_predict_proba_rows_normalise(self):
        est = self._fitted()
        probs = est.predict_proba([0, 1, 4])
        assert probs.shape == (3, 7)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert (probs >= 0).all()

    def test_predict_is_argmax_of_proba(self):
        est = self._fitted()
        ids = np.arange(5)
        np.testing.assert_array_equal(est.predict(ids),
                                      est.predict_proba(ids).argmax(axis=1))

    def test_score_pairs_matches_manual_dot(self):
        est = self._fitted()
        pairs = np.array([[1, 3], [4, 0]])
        expected = [est.W_[1] @ est.O_[3], est.W_[4] @ est.O_[0]]
        np.testing.assert_allclose(est.score_pairs(pairs), expected, rtol=1e-12)

    def test_score_is_mean_log_probability(self):
        est = self._fitted()
        pairs = toy_pairs(n=50, seed=4)
        probs = est.predict_proba(pairs[:, 0])
        expected = np.log(probs[np.arange(50), pairs[:, 1]]).mean()
        assert est.score(pairs) == pytest.approx(expected, rel=1e-10)

    def test_refit_same_seed_is_bitwise_identical(self):
        a, b = self._fitted(), self._fitted()
        np.testing.assert_array_equal(a.W_, b.W_)
        np.testing.assert_array_equal(a.O_, b.O_)

    def test_seed_parameter_changes_fit(self):
        a, b = self._fitted(seed=3), self._fitted(seed=4)
        assert (a.W_ != b.W_).any()

    def test_training_record_is_exposed(self):
        est = self._fitted()
        assert est.record_.config["method"] == "US"
        assert len(est.record_.loss_trace) > 0


class TestInputValidation:
    def test_bad_pair_arrays_rejected(self):
        est = CooccurrenceEmbedding()
        for bad in (np.zeros((0, 2), dtype=int), np.zeros((3, 3), dtype=int),
                    np.array([[0, -1]]), np.array([[0.5, 1.0]])):
            with pytest.raises(ValueError):
                est.fit(bad)

    def test_float_ids_accepted_when_integral(self):
        est = CooccurrenceEmbedding(method="MLE", dim=2, batch_size=4)
        est.fit(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert est.W_.shape[0] == 2

    def test_out_of_range_ids_rejected_against_fixed_cards(self):
        est = CooccurrenceEmbedding(card_i=2, card_j=2)
        with pytest.raises(ValueError, match="out of range"):
            est.fit(np.array([[0, 1], [2, 0]]))

    def test_transform_range_checked(self):
        est = CooccurrenceEmbedding(method="MLE", dim=2, batch_size=4)
        est.fit(np.array([[0, 1], [1, 0]]))
        with pytest.raises(ValueError):
            est.transform([5])
        with pytest.raises(ValueError):
            est.transform(np.zeros((2, 2), dtype=int))
