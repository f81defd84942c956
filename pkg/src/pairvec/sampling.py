"""Negative samplers: uniform, popularity, and score-adaptive Boltzmann.

The Boltzmann family draws target j with probability proportional to

    D(j) * exp(G(i, j) / T)

where D is a non-negative degeneracy weighting (uniform, popularity^alpha,
or the inverse of a known ground-truth conditional) and T a temperature.
T -> 0 concentrates on the best-scoring target, T -> +inf recovers the
normalised degeneracy, and uniform D at T = 1 is exactly the conditional
softmax.  Because the distribution depends on the current scores it is
recomputed from the live parameters on every draw call; the static kinds
are served by a Vose alias table instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .losses import NegativeSet
from .model import ModelParams, Vocab, _check_index, score_all_targets

SAMPLER_KINDS = ("uniform", "popularity", "boltzmann")
DEGENERACY_KINDS = ("uniform", "popularity", "oracle_inverse_p")


@dataclass
class SamplerSpec:
    """Declarative description of a negative sampler.

    ``degeneracy``, ``temperature`` and ``degeneracy_table`` only apply to
    the boltzmann kind; ``popularity_exponent`` applies wherever occurrence
    counts enter (the popularity kind and the popularity degeneracy).
    ``degeneracy_table`` supplies one weight row per context id when the
    degeneracy is oracle_inverse_p, since those weights live outside the
    model.  ``temperature`` accepts math.inf as the degeneracy-only limit.
    """

    kind: str
    degeneracy: str = "uniform"
    temperature: float = 1.0
    popularity_exponent: float = 1.0
    degeneracy_table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ConfigError(f"unknown sampler kind {self.kind!r}")
        if self.degeneracy not in DEGENERACY_KINDS:
            raise ConfigError(f"unknown degeneracy {self.degeneracy!r}")
        if not (self.temperature > 0.0 or math.isinf(self.temperature)):
            raise ConfigError("temperature must be positive (math.inf allowed)")
        if self.popularity_exponent < 0.0:
            raise ConfigError("popularity exponent must be >= 0")
        if self.degeneracy == "oracle_inverse_p" and self.degeneracy_table is None:
            raise ConfigError("oracle_inverse_p degeneracy needs a degeneracy_table")


class CategoricalTable:
    """Vose alias sampler for a fixed categorical distribution.

    Setup is O(K); each draw costs O(1) and vectorises.  ``probs`` keeps the
    normalised input distribution for logit corrections and exactness tests.
    """

    def __init__(self, weights: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if (weights < 0).any():
            raise ValueError("weights must be non-negative")
        total = weights.sum()
        if not (total > 0) or not np.isfinite(total):
            raise ValueError("weights must have positive finite sum")
        self.probs = weights / total

        k = self.probs.size
        scaled = self.probs * k
        self._accept = np.ones(k)
        self._alias = np.arange(k)
        small = [idx for idx, v in enumerate(scaled) if v < 1.0]
        large = [idx for idx, v in enumerate(scaled) if v >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s = small.pop()
            g = large.pop()
            self._accept[s] = scaled[s]
            self._alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        for rest in (*small, *large):
            self._accept[rest] = 1.0

    @property
    def size(self) -> int:
        return self.probs.size

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = rng.integers(0, self.size, size=size)
        keep = rng.random(size) < self._accept[idx]
        return np.where(keep, idx, self._alias[idx]).astype(np.int64)


def boltzmann_probs(scores: np.ndarray, degeneracy: np.ndarray,
                    temperature: float) -> np.ndarray:
    """Normalise D(j) * exp(scores[j] / T) in log space.

    Zero-degeneracy targets get exactly zero probability.  temperature may
    be math.inf, in which case the scores drop out and the result is the
    normalised degeneracy itself.
    """
    scores = np.asarray(scores, dtype=np.float64)
    degeneracy = np.asarray(degeneracy, dtype=np.float64)
    if scores.shape != degeneracy.shape or scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores and degeneracy must be 1-D with equal nonzero length")
    if (degeneracy < 0).any():
        raise ValueError("degeneracy weights must be non-negative")
    total = degeneracy.sum()
    if not (total > 0):
        raise ValueError("degeneracy weights must not be all zero")
    if math.isinf(temperature):
        return degeneracy / total
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    with np.errstate(divide="ignore"):
        logw = np.where(degeneracy > 0,
                        np.log(degeneracy, where=degeneracy > 0), -np.inf)
    logw = logw + scores / temperature
    m = logw.max()
    e = np.exp(logw - m)
    return e / e.sum()


def popularity_distribution(vocab: Vocab, alpha: float = 1.0) -> CategoricalTable:
    """Occurrence counts raised to alpha, normalised.

    Zero-count targets keep zero weight for alpha > 0; alpha = 0 gives the
    uniform distribution over targets that occur at all.
    """
    if alpha < 0:
        raise ConfigError("popularity exponent must be >= 0")
    counts = vocab.target_counts.astype(np.float64)
    if alpha == 0.0:
        weights = (counts > 0).astype(np.float64)
    else:
        weights = counts ** alpha
    if not (weights.sum() > 0):
        raise ValueError("popularity distribution undefined: all target counts are zero")
    return CategoricalTable(weights)


def degeneracy_weights(spec: SamplerSpec, vocab: Vocab, i: int) -> np.ndarray:
    """Resolve the degeneracy vector D for context i under a boltzmann spec."""
    if spec.degeneracy == "uniform":
        return np.ones(vocab.card_j)
    if spec.degeneracy == "popularity":
        counts = vocab.target_counts.astype(np.float64)
        if spec.popularity_exponent == 0.0:
            return (counts > 0).astype(np.float64)
        return counts ** spec.popularity_exponent
    table = spec.degeneracy_table
    if table is None:
        raise ConfigError("oracle_inverse_p degeneracy needs a degeneracy_table")
    table = np.asarray(table, dtype=np.float64)
    if table.shape != (vocab.card_i, vocab.card_j):
        raise ConfigError("degeneracy_table shape does not match the vocabulary")
    return table[i]


def draw_negatives(spec: SamplerSpec, params: ModelParams, vocab: Vocab,
                   i: int, n: int, rng: np.random.Generator) -> NegativeSet:
    """Draw n i.i.d. negative targets for context i.

    Boltzmann draws recompute the distribution from the current scores on
    every call, then invert the CDF; the static kinds build an alias table.
    Draws are with replacement, so duplicates are expected.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    i = _check_index(i, params.card_i, "context")
    if params.card_j != vocab.card_j:
        raise ConfigError("parameters and vocabulary disagree on the target count")

    if spec.kind == "uniform":
        ids = rng.integers(0, vocab.card_j, size=n)
    elif spec.kind == "popularity":
        table = popularity_distribution(vocab, spec.popularity_exponent)
        ids = table.draw(rng, n)
    else:
        scores = score_all_targets(params, i)
        q = boltzmann_probs(scores, degeneracy_weights(spec, vocab, i),
                            spec.temperature)
        cdf = np.cumsum(q)
        cdf[-1] = 1.0
        ids = np.searchsorted(cdf, rng.random(n), side="right")
    return NegativeSet(np.asarray(ids, dtype=np.int64))
