"""Synthetic ground truth: a mixture of Gaussians discretised onto a grid.

Contexts index the rows and targets the columns of a card_i x card_j joint
probability table obtained by evaluating a random isotropic Gaussian
mixture on the unit square at cell centers and normalising.  Because the
true joint is known in closed form, samplers and losses can be judged
against exact conditionals, and the inverse conditional 1/P_i(j) is
available as the idealised degeneracy weighting for Boltzmann sampling.

Divergences follow the factorised-model convention: the model's joint is
the empirical context popularity times the model conditional, and rows the
model cannot represent at all (zero popularity against positive true mass)
yield an infinite divergence with a logged diagnostic rather than an error.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .ingest import PairDataset
from .model import ModelParams, Vocab, _check_index

logger = logging.getLogger(__name__)

ORACLE_MASK_REL_EPS = 1e-12


@dataclass
class GroundTruth:
    """Known joint distribution plus the mixture that generated it."""

    joint: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray
    seed: int

    def __post_init__(self):
        self.joint = np.asarray(self.joint, dtype=np.float64)
        if self.joint.ndim != 2:
            raise ConfigError("joint must be 2-D")
        if abs(self.joint.sum() - 1.0) > 1e-9 or (self.joint < 0).any():
            raise ConfigError("joint must be a probability table")

    @property
    def card_i(self) -> int:
        return self.joint.shape[0]

    @property
    def card_j(self) -> int:
        return self.joint.shape[1]

    @property
    def n_components(self) -> int:
        return len(self.weights)


def mixture_joint(card_i: int, card_j: int, means: np.ndarray,
                  sigmas: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Normalised joint table for explicit isotropic components.

    Cell (a, b) is evaluated at the center ((a + 1/2)/card_i,
    (b + 1/2)/card_j); isotropy lets each component factor into an outer
    product of two 1-D Gaussian profiles.
    """
    x = (np.arange(card_i) + 0.5) / card_i
    y = (np.arange(card_j) + 0.5) / card_j
    joint = np.zeros((card_i, card_j))
    for mu, sig, w in zip(means, sigmas, weights):
        if not sig > 0:
            raise ConfigError("component scales must be positive")
        gx = np.exp(-0.5 * ((x - mu[0]) / sig) ** 2) / sig
        gy = np.exp(-0.5 * ((y - mu[1]) / sig) ** 2) / sig
        joint += w * np.outer(gx, gy)
    total = joint.sum()
    if not (total > 0):
        raise ConfigError("mixture mass underflowed to zero on this grid")
    return joint / total


def build_mixture(card_i: int, card_j: int, n_components: int, seed: int,
                  sigma_range: tuple[float, float] = (0.02, 0.08)) -> GroundTruth:
    """Random isotropic Gaussian mixture discretised at grid cell centers.

    Component means are uniform on the unit square, scales uniform in
    ``sigma_range``, and mixture weights Dirichlet(1).
    """
    if card_i < 1 or card_j < 1:
        raise ConfigError("grid dimensions must be positive")
    if n_components < 1:
        raise ConfigError("n_components must be >= 1")
    lo, hi = float(sigma_range[0]), float(sigma_range[1])
    if not (0 < lo <= hi):
        raise ConfigError("sigma_range must be positive with lo <= hi")

    rng = np.random.default_rng(seed)
    means = rng.uniform(0.0, 1.0, size=(n_components, 2))
    sigmas = rng.uniform(lo, hi, size=n_components)
    weights = rng.dirichlet(np.ones(n_components))
    joint = mixture_joint(card_i, card_j, means, sigmas, weights)
    return GroundTruth(joint, means, sigmas, weights, seed)


def conditional(gt: GroundTruth, i: int) -> np.ndarray:
    """True conditional P_i(.) = joint[i] / marginal(i)."""
    i = _check_index(i, gt.card_i, "context")
    row = gt.joint[i]
    mass = row.sum()
    if not (mass > 0):
        raise ValueError(f"context {i} has zero marginal mass; conditional undefined")
    return row / mass


def sample_pairs(gt: GroundTruth, n_pairs: int, seed: int) -> PairDataset:
    """n_pairs i.i.d. draws from the joint, as a PairDataset."""
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    flat = rng.choice(gt.card_i * gt.card_j, size=n_pairs, p=gt.joint.ravel())
    pairs = np.stack([flat // gt.card_j, flat % gt.card_j], axis=1).astype(np.int64)
    vocab = Vocab([f"i{a}" for a in range(gt.card_i)],
                  [f"j{b}" for b in range(gt.card_j)]).with_counts_from(pairs)
    meta = {"kind": "synthetic_mixture", "mixture_seed": gt.seed,
            "sample_seed": seed, "n_components": gt.n_components}
    return PairDataset(vocab, pairs, None, meta)


def oracle_degeneracy(gt: GroundTruth, i: int) -> np.ndarray:
    """Inverse-conditional weights 1 / P_i(j), zeroed where P_i(j) is
    negligible (at or below 1e-12 of the row maximum)."""
    p = conditional(gt, i)
    eps = ORACLE_MASK_REL_EPS * p.max()
    out = np.zeros_like(p)
    alive = p > eps
    out[alive] = 1.0 / p[alive]
    return out


def oracle_degeneracy_table(gt: GroundTruth) -> np.ndarray:
    """Stacked oracle_degeneracy rows for all contexts (card_i, card_j)."""
    return np.stack([oracle_degeneracy(gt, i) for i in range(gt.card_i)])


def kl_conditional(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats; zero p terms contribute nothing, zero q under
    positive p makes the divergence infinite."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be 1-D with equal length")
    for name, dist in (("p", p), ("q", q)):
        if (dist < 0).any() or abs(dist.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a probability distribution")
    alive = p > 0
    if (q[alive] == 0).any():
        return float("inf")
    return float(np.sum(p[alive] * np.log(p[alive] / q[alive])))


def model_conditionals(params: ModelParams) -> np.ndarray:
    """All model conditional rows softmax(W @ O^T), numerically stable."""
    scores = params.W @ params.O.T
    scores -= scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    return scores


def kl_joint(gt: GroundTruth, params: ModelParams, vocab: Vocab) -> float:
    """KL between the true joint and popularity x model-conditional.

    The model-side joint is Pop(i) * g_i(j) where Pop is the empirical
    context distribution from the vocabulary counts.  Contexts the truth
    uses but the popularity never saw give an infinite divergence.
    """
    if (params.card_i, params.card_j) != (gt.card_i, gt.card_j):
        raise ConfigError("parameter shapes do not match the ground truth")
    if vocab.card_i != gt.card_i:
        raise ConfigError("vocabulary does not match the ground truth")
    total = vocab.context_counts.sum()
    if total <= 0:
        raise ValueError("vocabulary has no context occurrences; popularity undefined")
    pop = vocab.context_counts / total

    marginal = gt.joint.sum(axis=1)
    missing = np.flatnonzero((marginal > 0) & (pop == 0))
    if missing.size:
        logger.warning("kl_joint is infinite: %d contexts with true mass but zero "
                       "popularity (first: %d)", missing.size, int(missing[0]))
        return float("inf")

    g = model_conditionals(params)
    alive = gt.joint > 0
    model_joint = pop[:, None] * g
    with np.errstate(divide="ignore", over="ignore"):
        return float(np.sum(gt.joint[alive]
                            * np.log(gt.joint[alive] / model_joint[alive])))


def empirical_conditionals(pairs: np.ndarray, card_i: int,
                           card_j: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalised pair counts and the list of contexts that occur.

    Rows for absent contexts are left all-zero; callers average divergences
    over the returned context ids only.
    """
    pairs = np.asarray(pairs)
    counts = np.zeros((card_i, card_j))
    np.add.at(counts, (pairs[:, 0], pairs[:, 1]), 1.0)
    present = np.flatnonzero(counts.sum(axis=1) > 0)
    out = np.zeros_like(counts)
    out[present] = counts[present] / counts[present].sum(axis=1, keepdims=True)
    return out, present


def mean_true_conditional_kl(gt: GroundTruth, params: ModelParams) -> float:
    """Average over all contexts of KL(P_i || g_i)."""
    if (params.card_i, params.card_j) != (gt.card_i, gt.card_j):
        raise ConfigError("parameter shapes do not match the ground truth")
    g = model_conditionals(params)
    marginal = gt.joint.sum(axis=1)
    p = gt.joint / marginal[:, None]
    alive = p > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = np.where(alive, p * np.log(np.where(alive, p, 1.0) / g), 0.0)
    return float(terms.sum(axis=1).mean())


def mean_empirical_conditional_kl(pairs: np.ndarray, params: ModelParams) -> float:
    """Average KL(P-hat_i || g_i) over the contexts present in ``pairs``."""
    phat, present = empirical_conditionals(pairs, params.card_i, params.card_j)
    if present.size == 0:
        raise ValueError("no pairs to build empirical conditionals from")
    g = model_conditionals(params)
    p = phat[present]
    q = g[present]
    alive = p > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = np.where(alive, p * np.log(np.where(alive, p, 1.0) / q), 0.0)
    return float(terms.sum(axis=1).mean())


# ── persistence ─────────────────────────────────────────────────────────────

def save_ground_truth(path, gt: GroundTruth) -> None:
    """One JSON header line, then float64 payload: joint, means, sigmas, weights."""
    header = {"kind": "ground_truth", "card_i": gt.card_i, "card_j": gt.card_j,
              "n_components": gt.n_components, "dtype": "f64", "seed": gt.seed}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        for arr in (gt.joint, gt.means, gt.sigmas, gt.weights):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_ground_truth(path) -> GroundTruth:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise DataError(f"{path}: ground truth header: no JSON line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: ground truth header: {exc}") from exc
    if header.get("kind") != "ground_truth":
        raise DataError(f"{path}: not a ground truth file")
    ci, cj, k = (int(header[key]) for key in ("card_i", "card_j", "n_components"))
    body = raw[nl + 1:]
    expect = 8 * (ci * cj + 2 * k + k + k)
    if len(body) != expect:
        raise DataError(f"{path}: ground truth payload: expected {expect} bytes, "
                        f"got {len(body)}")
    flat = np.frombuffer(body, dtype="<f8")
    joint = flat[:ci * cj].reshape(ci, cj).copy()
    rest = flat[ci * cj:]
    means = rest[:2 * k].reshape(k, 2).copy()
    sigmas = rest[2 * k:3 * k].copy()
    weights = rest[3 * k:].copy()
    return GroundTruth(joint, means, sigmas, weights, int(header.get("seed", -1)))
