"""Scikit-learn estimator wrapper around the pair trainer.

CooccurrenceEmbedding exposes the trainer through the familiar
fit/transform API so it can sit inside pipelines and model-selection
utilities: fit on an (n, 2) integer array of (context, target) pairs,
transform context ids to their embedding rows, and score held-out pairs by
mean log conditional probability.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from .ingest import PairDataset
from .model import ModelParams, Vocab
from .training import TrainConfig, train
from .validation import check_context_ids, check_pair_array


class CooccurrenceEmbedding(BaseEstimator):
    """Two-matrix embeddings of (context, target) co-occurrence pairs.

    Parameters mirror TrainConfig; ``method`` picks the loss/sampler
    combination (MLE, SS, US, PS, UBS, PBS, BCE).  ``card_i`` / ``card_j``
    fix the id spaces; left as None they are inferred from the fitted
    pairs.  After fitting, ``W_`` holds one row per context id and ``O_``
    one row per target id.

    >>> pairs = np.array([[0, 1], [0, 2], [1, 2]])
    >>> model = CooccurrenceEmbedding(method="US", dim=8, epochs=5).fit(pairs)
    >>> model.transform([0, 1]).shape
    (2, 8)
    """

    def __init__(self, method: str = "PBS", dim: int = 64, epochs: int = 1,
                 batch_size: int = 512, learning_rate: float = 0.05,
                 lr_schedule: str = "linear", optimizer: str = "sgd",
                 n_negatives: int = 5, temperature: float = 1.0,
                 popularity_exponent: float = 1.0, include_positive: bool = True,
                 init_scale: float | None = None, card_i: int | None = None,
                 card_j: int | None = None, seed: int = 0):
        self.method = method
        self.dim = dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_schedule = lr_schedule
        self.optimizer = optimizer
        self.n_negatives = n_negatives
        self.temperature = temperature
        self.popularity_exponent = popularity_exponent
        self.include_positive = include_positive
        self.init_scale = init_scale
        self.card_i = card_i
        self.card_j = card_j
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(method=self.method, d=self.dim, epochs=self.epochs,
                           batch_size=self.batch_size,
                           learning_rate=self.learning_rate,
                           lr_schedule=self.lr_schedule, optimizer=self.optimizer,
                           n_negatives=self.n_negatives,
                           temperature=self.temperature,
                           popularity_exponent=self.popularity_exponent,
                           include_positive=self.include_positive,
                           init_scale=self.init_scale, seed=self.seed)

    def fit(self, X, y=None):
        """Train on an (n, 2) array of (context, target) id pairs."""
        X = check_pair_array(X, self.card_i, self.card_j)
        card_i = self.card_i if self.card_i is not None else int(X[:, 0].max()) + 1
        card_j = self.card_j if self.card_j is not None else int(X[:, 1].max()) + 1
        vocab = Vocab([str(i) for i in range(card_i)],
                      [str(j) for j in range(card_j)]).with_counts_from(X)
        dataset = PairDataset(vocab, X, None, {"kind": "estimator"})
        params, record = train(self._config(), dataset)
        self.W_, self.O_ = params.W, params.O
        self.vocab_ = vocab
        self.record_ = record
        return self

    def _params(self) -> ModelParams:
        if not hasattr(self, "W_"):
            raise RuntimeError("estimator is not fitted; call fit first")
        return ModelParams(self.W_, self.O_)

    def transform(self, X) -> np.ndarray:
        """Embedding rows W_[i] for an array of context ids."""
        params = self._params()
        ids = check_context_ids(X, params.card_i)
        return self.W_[ids]

    def predict_proba(self, X) -> np.ndarray:
        """Full conditional distribution over targets per context id."""
        params = self._params()
        ids = check_context_ids(X, params.card_i)
        scores = self.W_[ids] @ self.O_.T
        scores -= scores.max(axis=1, keepdims=True)
        np.exp(scores, out=scores)
        scores /= scores.sum(axis=1, keepdims=True)
        return scores

    def predict(self, X) -> np.ndarray:
        """Most likely target id per context id."""
        params = self._params()
        ids = check_context_ids(X, params.card_i)
        return np.argmax(self.W_[ids] @ self.O_.T, axis=1)

    def score_pairs(self, X) -> np.ndarray:
        """Raw bilinear scores <W_[i], O_[j]> for (context, target) pairs."""
        params = self._params()
        X = check_pair_array(X, params.card_i, params.card_j)
        return np.einsum("bd,bd->b", self.W_[X[:, 0]], self.O_[X[:, 1]])

    def score(self, X, y=None) -> float:
        """Mean log conditional probability of the pairs; higher is better."""
        params = self._params()
        X = check_pair_array(X, params.card_i, params.card_j)
        scores = self.W_[X[:, 0]] @ self.O_.T
        m = scores.max(axis=1)
        lse = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
        picked = scores[np.arange(len(X)), X[:, 1]]
        value = float((picked - lse).mean())
        if not math.isfinite(value):
            raise ValueError("log likelihood is not finite")
        return value
