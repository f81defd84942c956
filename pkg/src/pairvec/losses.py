"""Losses and gradients for positive-pair training.

Every loss here is a function of the bilinear scores G(i, j) = <W[i], O[j]>
for one observed pair (i, j).  Because dG/dW[i] = O[j] and dG/dO[j] = W[i],
each gradient reduces to a set of per-target coefficients c_t with

    dL/dO[t] = c_t * W[i]          dL/dW[i] = sum_t c_t * O[t]

which is what LossGrad stores: the touched target rows and one coefficient
worth of gradient per row.  The full-softmax loss touches every target;
the sampled losses touch only the positive and the drawn competitors.

The relaxed softmax replaces the full normalisation set with a handful of
sampled targets: given draws V from a proposal distribution over J,

    L = -G(i, j) + ln sum_{v in V} exp(G(i, v))

With ``include_positive`` the observed target is added to V, which keeps
the loss non-negative; without it the loss follows the sampled
normalisation literally and can go below zero.  As the number of draws
from a proposal Q grows, the expected gradient of the literal form
approaches the one computed by ``consistency_gradient``, whose negative
phase re-weights Q by exp(G); ``expected_negative_distribution`` exposes
that re-weighting for enumeration studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, _check_index, score_all_targets


@dataclass
class NegativeSet:
    """Ordered draws of competitor target ids; duplicates are legitimate."""

    targets: np.ndarray

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.targets.ndim != 1 or self.targets.size < 1:
            raise ValueError("a negative set needs at least one draw")

    @property
    def n(self) -> int:
        return self.targets.size


@dataclass
class LossGrad:
    """Loss value plus sparse gradient for a single training pair.

    ``o_ids`` are the distinct target rows with nonzero gradient structure
    (coefficients may still cancel to zero numerically); ``o_grads`` holds
    the matching d-vectors.  ``grad_w_i`` is the gradient of the one input
    row involved.
    """

    loss: float
    grad_w_i: np.ndarray
    o_ids: np.ndarray
    o_grads: np.ndarray

    @property
    def grad_o(self) -> dict[int, np.ndarray]:
        """Sparse map target id -> gradient row."""
        return {int(t): self.o_grads[k] for k, t in enumerate(self.o_ids)}


def conditional_softmax(scores: np.ndarray) -> np.ndarray:
    """Softmax with max subtraction; invariant to constant score shifts."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty 1-D array")
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


def _logsumexp(values: np.ndarray) -> float:
    m = values.max()
    if not np.isfinite(m):
        # all -inf: empty effective support
        return float(m)
    return float(m + np.log(np.exp(values - m).sum()))


def _pack(params: ModelParams, i: int, loss: float,
          ids: np.ndarray, coefs: np.ndarray) -> LossGrad:
    """Aggregate per-slot coefficients into a LossGrad with unique target ids."""
    uids, inverse = np.unique(ids, return_inverse=True)
    agg = np.zeros(uids.size)
    np.add.at(agg, inverse, coefs)
    grad_w = agg @ params.O[uids]
    o_grads = np.outer(agg, params.W[i])
    return LossGrad(float(loss), grad_w, uids, o_grads)


def mle_loss_grad(params: ModelParams, i: int, j: int) -> LossGrad:
    """Full-softmax negative log likelihood: -G(i,j) + ln sum_j' exp(G(i,j')).

    Non-negative, zero exactly when the softmax puts all mass on j.  The
    gradient coefficient of target t is softmax(t) - 1[t == j], so every
    output row is touched.
    """
    j = _check_index(j, params.card_j, "target")
    s = score_all_targets(params, i)
    lse = _logsumexp(s)
    probs = conditional_softmax(s)
    coefs = probs.copy()
    coefs[j] -= 1.0
    ids = np.arange(params.card_j, dtype=np.int64)
    return _pack(params, i, lse - s[j], ids, coefs)


def relaxed_softmax_loss_grad(params: ModelParams, i: int, j: int,
                              negatives: NegativeSet,
                              include_positive: bool = True) -> LossGrad:
    """Softmax loss normalised over a sampled target set.

    With ``include_positive`` (default) the normalisation set is the drawn
    negatives plus the observed target, giving a non-negative loss; the
    literal variant normalises over the draws alone and is unbounded below
    when the positive outscores every draw.
    """
    i = _check_index(i, params.card_i, "context")
    j = _check_index(j, params.card_j, "target")
    for t in (int(negatives.targets.min()), int(negatives.targets.max())):
        _check_index(t, params.card_j, "negative target")

    if include_positive:
        slot_ids = np.concatenate([negatives.targets, [j]])
    else:
        slot_ids = negatives.targets
    w_i = params.W[i]
    slot_scores = np.einsum("kd,d->k", params.O[slot_ids], w_i)
    s_pos = float(np.einsum("d,d->", w_i, params.O[j]))

    m = slot_scores.max()
    e = np.exp(slot_scores - m)
    z = e.sum()
    loss = (m + np.log(z)) - s_pos
    ghat = e / z

    ids = np.concatenate([slot_ids, [j]])
    coefs = np.concatenate([ghat, [-1.0]])
    return _pack(params, i, loss, ids, coefs)


def sampled_softmax_loss_grad(params: ModelParams, i: int, j: int,
                              proposal: np.ndarray, n_samples: int,
                              rng: np.random.Generator | None = None,
                              candidates: np.ndarray | None = None) -> LossGrad:
    """Softmax over [positive] + sampled candidates with expected-count logit
    correction.

    Every slot's logit is G(i, t) - ln(n * proposal[t]); the loss is the
    softmax cross entropy with the positive slot as the label.  Candidates
    are i.i.d. draws with replacement from ``proposal`` and accidental
    draws of the positive are kept as ordinary slots.  ``candidates``
    bypasses the drawing for deterministic tests (e.g. substituting the
    full target enumeration).
    """
    i = _check_index(i, params.card_i, "context")
    j = _check_index(j, params.card_j, "target")
    proposal = np.asarray(proposal, dtype=np.float64)
    if proposal.shape != (params.card_j,):
        raise ValueError("proposal must be a distribution over all targets")
    if (proposal < 0).any() or abs(proposal.sum() - 1.0) > 1e-9:
        raise ValueError("proposal must be non-negative and sum to 1")
    if proposal[j] <= 0.0:
        raise ValueError(f"proposal assigns zero probability to the positive target {j}")

    if candidates is None:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if rng is None:
            raise ValueError("either rng or candidates is required")
        candidates = rng.choice(params.card_j, size=n_samples, p=proposal)
    else:
        candidates = np.asarray(candidates, dtype=np.int64)
        if candidates.ndim != 1 or candidates.size < 1:
            raise ValueError("candidates must be a non-empty 1-D id array")
        n_samples = candidates.size
    if (proposal[candidates] <= 0.0).any():
        raise ValueError("candidate outside the proposal support")

    slot_ids = np.concatenate([[j], candidates])
    w_i = params.W[i]
    logits = (np.einsum("kd,d->k", params.O[slot_ids], w_i)
              - np.log(n_samples * proposal[slot_ids]))
    m = logits.max()
    e = np.exp(logits - m)
    z = e.sum()
    loss = (m + np.log(z)) - logits[0]
    coefs = e / z
    coefs[0] -= 1.0
    return _pack(params, i, loss, slot_ids, coefs)


def bce_loss_grad(params: ModelParams, i: int, j: int,
                  negatives: NegativeSet) -> LossGrad:
    """Binary cross entropy: -ln s(G(i,j)) - sum_k ln s(-G(i,j_k)).

    s is the logistic sigmoid.  Computed through softplus so large
    magnitudes neither overflow nor lose the gradient.
    """
    i = _check_index(i, params.card_i, "context")
    j = _check_index(j, params.card_j, "target")
    for t in (int(negatives.targets.min()), int(negatives.targets.max())):
        _check_index(t, params.card_j, "negative target")

    w_i = params.W[i]
    s_pos = float(np.einsum("d,d->", w_i, params.O[j]))
    s_neg = np.einsum("kd,d->k", params.O[negatives.targets], w_i)

    # softplus(x) = ln(1 + e^x) computed as logaddexp(0, x)
    loss = np.logaddexp(0.0, -s_pos) + np.logaddexp(0.0, s_neg).sum()
    # d/dx [-ln s(x)] = s(x) - 1 = -s(-x);  d/dx [-ln s(-x)] = s(x)
    coef_pos = -_sigmoid(-s_pos)
    coef_neg = _sigmoid(s_neg)

    ids = np.concatenate([[j], negatives.targets])
    coefs = np.concatenate([[coef_pos], coef_neg])
    return _pack(params, i, loss, ids, coefs)


def _sigmoid(x):
    # exp(-softplus(-x)) is monotone-stable on both tails
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=np.float64)))


def expected_negative_distribution(scores: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Limit distribution of sampled-normalisation gradients.

    Re-weights the proposal q by exp(score) and normalises:
    b(t) = q(t) exp(G(t)) / sum_t' q(t') exp(G(t')).  This is the negative
    phase toward which the literal relaxed-softmax gradient converges as
    the number of draws grows.
    """
    scores = np.asarray(scores, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if scores.shape != q.shape or scores.ndim != 1:
        raise ValueError("scores and q must be 1-D with equal length")
    if (q < 0).any() or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q must be non-negative and sum to 1")
    with np.errstate(divide="ignore"):
        logw = np.where(q > 0, np.log(q, where=q > 0), -np.inf) + scores
    m = logw.max()
    e = np.exp(logw - m)
    return e / e.sum()


def consistency_gradient(params: ModelParams, i: int, j: int,
                         q: np.ndarray) -> LossGrad:
    """Exact expectation of the literal relaxed-softmax gradient in the
    many-draw limit, computed by enumeration over J.

    The loss field holds -G(i,j) + ln sum_t q(t) exp(G(i,t)), whose exact
    gradient is the returned one.  With uniform q this gradient equals the
    full-softmax gradient.
    """
    j = _check_index(j, params.card_j, "target")
    s = score_all_targets(params, i)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != s.shape:
        raise ValueError("q must be a distribution over all targets")
    b = expected_negative_distribution(s, q)

    with np.errstate(divide="ignore"):
        logw = np.where(q > 0, np.log(q, where=q > 0), -np.inf) + s
    loss = _logsumexp(logw) - s[j]

    support = np.flatnonzero(q > 0)
    ids = np.union1d(support, [j]).astype(np.int64)
    coefs = b[ids]
    coefs = coefs.copy()
    coefs[np.searchsorted(ids, j)] -= 1.0
    return _pack(params, i, loss, ids, coefs)
