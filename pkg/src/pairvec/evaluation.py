"""Held-out metrics: likelihood, ranking, and lexical benchmarks.

Ranking conventions used throughout: ranks are dense over the full target
set, ties between scores are broken toward the smaller target id for the
exact metrics and counted half for the sampled comparison metric.  All
metric functions take the model parameters and raw (n, 2) pair arrays, so
they work on any split the caller slices out.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import ModelParams, Vocab

_CHUNK = 256


@dataclass
class MetricsReport:
    """Named metric values plus run provenance (dataset, split, seed, ...)."""

    values: dict[str, float]
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"values": self.values, "meta": self.meta},
                          sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        obj = json.loads(text)
        return cls(dict(obj["values"]), dict(obj.get("meta", {})))

    def write_csv(self, path) -> None:
        """Long-format rows: metric, value, then one column per meta key."""
        meta_keys = sorted(self.meta)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value", *meta_keys])
            for name in sorted(self.values):
                writer.writerow([name, repr(self.values[name]),
                                 *(self.meta[k] for k in meta_keys)])


def _check_pairs(params: ModelParams, pairs: np.ndarray) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or len(pairs) == 0:
        raise ValueError("pairs must be a non-empty (n, 2) array")
    if pairs.min() < 0 or pairs[:, 0].max() >= params.card_i \
            or pairs[:, 1].max() >= params.card_j:
        raise IndexError("pair id outside the model's range")
    return pairs


def test_likelihood(params: ModelParams, pairs: np.ndarray) -> float:
    """Mean full-softmax probability of the observed target.

    Each pair contributes softmax(W[i] @ O^T)[j]; contexts are grouped so
    every distinct row is normalised once.
    """
    pairs = _check_pairs(params, pairs)
    uniq, inverse = np.unique(pairs[:, 0], return_inverse=True)
    total = 0.0
    for start in range(0, uniq.size, _CHUNK):
        rows = slice(start, min(start + _CHUNK, uniq.size))
        scores = params.W[uniq[rows]] @ params.O.T
        scores -= scores.max(axis=1, keepdims=True)
        np.exp(scores, out=scores)
        probs = scores / scores.sum(axis=1, keepdims=True)
        sel = (inverse >= rows.start) & (inverse < rows.stop)
        total += probs[inverse[sel] - rows.start, pairs[sel, 1]].sum()
    return float(total / len(pairs))


def approx_mpr(params: ModelParams, pairs: np.ndarray,
               n_negatives: int = 100, seed: int = 0) -> float:
    """Sampled mean percentile rank.

    For every pair, the observed target's score is compared against
    ``n_negatives`` uniformly drawn targets; wins count 1, ties 1/2.
    Higher is better, 1.0 means the positive outranks every draw.
    """
    pairs = _check_pairs(params, pairs)
    if n_negatives < 1:
        raise ConfigError("n_negatives must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    for start in range(0, len(pairs), _CHUNK):
        block = pairs[start:start + _CHUNK]
        w = params.W[block[:, 0]]
        pos = np.einsum("bd,bd->b", w, params.O[block[:, 1]])
        neg_ids = rng.integers(0, params.card_j, size=(len(block), n_negatives))
        neg = np.einsum("bd,bkd->bk", w, params.O[neg_ids])
        wins = (pos[:, None] > neg).sum(axis=1) + 0.5 * (pos[:, None] == neg).sum(axis=1)
        total += (wins / n_negatives).sum()
    return float(total / len(pairs))


def precision_at_k(params: ModelParams, pairs: np.ndarray, k: int) -> float:
    """Fraction of pairs whose target ranks in the top k over all targets.

    The rank counts strictly better scores plus equal scores at smaller
    target ids, so it is exact and deterministic.
    """
    pairs = _check_pairs(params, pairs)
    if not 1 <= k <= params.card_j:
        raise ConfigError(f"k must be in [1, {params.card_j}]")
    hits = 0
    ids = np.arange(params.card_j)
    for start in range(0, len(pairs), _CHUNK):
        block = pairs[start:start + _CHUNK]
        scores = params.W[block[:, 0]] @ params.O.T
        pos = scores[np.arange(len(block)), block[:, 1]]
        better = (scores > pos[:, None]).sum(axis=1)
        tied_before = ((scores == pos[:, None]) & (ids[None, :] < block[:, 1][:, None])).sum(axis=1)
        hits += int(((1 + better + tied_before) <= k).sum())
    return hits / len(pairs)


# ── lexical benchmarks ──────────────────────────────────────────────────────

@dataclass
class SimilarityResult:
    correlation: float
    n_used: int
    n_oov: int


def _rankdata(x: np.ndarray) -> np.ndarray:
    """Average ranks, matching the usual treatment of ties."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def similarity_eval(params: ModelParams, vocab: Vocab,
                    triples, method: str = "pearson") -> SimilarityResult:
    """Correlation between human scores and cosine similarity of W rows.

    Pairs with an out-of-vocabulary word are skipped and counted in
    ``n_oov``.  ``method`` is 'pearson' or 'spearman'.
    """
    if method not in ("pearson", "spearman"):
        raise ConfigError(f"unknown correlation method {method!r}")
    index = {label: idx for idx, label in enumerate(vocab.context_labels)}
    human, cosine = [], []
    n_oov = 0
    for w1, w2, score in triples:
        if w1 not in index or w2 not in index:
            n_oov += 1
            continue
        a, b = params.W[index[w1]], params.W[index[w2]]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        cosine.append(float(a @ b / (na * nb)) if na > 0 and nb > 0 else 0.0)
        human.append(float(score))
    if len(human) < 2:
        raise ValueError(f"only {len(human)} usable triples; correlation undefined")
    h, c = np.asarray(human), np.asarray(cosine)
    if method == "spearman":
        h, c = _rankdata(h), _rankdata(c)
    if h.std() == 0 or c.std() == 0:
        raise ValueError("correlation undefined: zero variance in scores or cosines")
    corr = float(np.corrcoef(h, c)[0, 1])
    return SimilarityResult(corr, len(human), n_oov)


@dataclass
class AnalogyResult:
    precision: dict
    n_used: dict
    n_oov: int


def analogy_eval(params: ModelParams, vocab: Vocab, quadruples,
                 ks: tuple[int, ...] = (1, 5, 15)) -> AnalogyResult:
    """Additive-offset analogy accuracy on unit-normalised W rows.

    For each (a, b, c, d) the query is w_b - w_a + w_c; a hit at k means d
    lands among the k nearest rows by cosine after excluding a, b and c.
    Precision is reported per (kind, k) with kind from the loader's
    section tagging.
    """
    if not ks or min(ks) < 1 or max(ks) >= vocab.card_i:
        raise ConfigError("ks must be positive and leave room for exclusions")
    norms = np.linalg.norm(params.W, axis=1, keepdims=True)
    unit = params.W / np.where(norms > 0, norms, 1.0)
    index = {label: idx for idx, label in enumerate(vocab.context_labels)}

    grouped: dict = {}
    n_oov = 0
    for a, b, c, d, kind in quadruples:
        try:
            ids = (index[a], index[b], index[c], index[d])
        except KeyError:
            n_oov += 1
            continue
        grouped.setdefault(kind, []).append(ids)

    if not grouped:
        raise ValueError("every quadruple has an out-of-vocabulary word")

    kmax = max(ks)
    precision: dict = {}
    n_used: dict = {}
    for kind, rows in grouped.items():
        rows = np.asarray(rows, dtype=np.int64)
        hits = {k: 0 for k in ks}
        for start in range(0, len(rows), _CHUNK):
            block = rows[start:start + _CHUNK]
            query = unit[block[:, 1]] - unit[block[:, 0]] + unit[block[:, 2]]
            scores = query @ unit.T
            scores[np.arange(len(block))[:, None], block[:, :3]] = -np.inf
            top = np.argpartition(-scores, kmax - 1, axis=1)[:, :kmax]
            top_scores = np.take_along_axis(scores, top, axis=1)
            order = np.argsort(-top_scores, kind="stable", axis=1)
            ranked = np.take_along_axis(top, order, axis=1)
            for k in ks:
                hits[k] += int((ranked[:, :k] == block[:, 3][:, None]).any(axis=1).sum())
        n_used[kind] = len(rows)
        for k in ks:
            precision[(kind, k)] = hits[k] / len(rows)
    return AnalogyResult(precision, n_used, n_oov)
