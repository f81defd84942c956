"""Vocabulary and the two-matrix bilinear score model.

The model assigns every (context, target) pair the score

    score(i, j) = <W[i], O[j]>

where ``W`` holds one d-dimensional input row per context id and ``O`` one
output row per target id.  Training maximises scores of observed pairs
relative to competitors; everything downstream (losses, samplers, metrics)
is expressed in terms of these dot products.

Checkpoints use a small self-describing container: one JSON header line,
a raw little-endian float32 payload (W then O, row major), then the
context and target labels, one per line.  The float32 payload is the one
place the package departs from double precision; training and evaluation
math stays in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

CHECKPOINT_DTYPE = "f32"


# ── vocabulary ──────────────────────────────────────────────────────────────

@dataclass
class Vocab:
    """Label and frequency bookkeeping for context ids I and target ids J.

    ``context_counts`` / ``target_counts`` record how often each id occurs
    in that role among the training pairs the vocabulary was counted over;
    popularity-based samplers read them directly.
    """

    context_labels: list[str]
    target_labels: list[str]
    context_counts: np.ndarray = field(default=None)  # type: ignore[assignment]
    target_counts: np.ndarray = field(default=None)   # type: ignore[assignment]

    def __post_init__(self):
        if len(self.context_labels) < 1 or len(self.target_labels) < 1:
            raise ConfigError("vocabulary needs at least one context and one target")
        if len(set(self.context_labels)) != len(self.context_labels):
            raise ConfigError("context labels are not unique")
        if len(set(self.target_labels)) != len(self.target_labels):
            raise ConfigError("target labels are not unique")
        if self.context_counts is None:
            self.context_counts = np.zeros(len(self.context_labels), dtype=np.int64)
        if self.target_counts is None:
            self.target_counts = np.zeros(len(self.target_labels), dtype=np.int64)
        self.context_counts = np.asarray(self.context_counts, dtype=np.int64)
        self.target_counts = np.asarray(self.target_counts, dtype=np.int64)
        if self.context_counts.shape != (len(self.context_labels),):
            raise ConfigError("context_counts length does not match labels")
        if self.target_counts.shape != (len(self.target_labels),):
            raise ConfigError("target_counts length does not match labels")
        if (self.context_counts < 0).any() or (self.target_counts < 0).any():
            raise ConfigError("negative occurrence counts")

    @property
    def card_i(self) -> int:
        return len(self.context_labels)

    @property
    def card_j(self) -> int:
        return len(self.target_labels)

    def with_counts_from(self, pairs: np.ndarray) -> "Vocab":
        """Same labels, counts recomputed from an (n, 2) id array."""
        pairs = np.asarray(pairs)
        cc = np.bincount(pairs[:, 0], minlength=self.card_i).astype(np.int64)
        tc = np.bincount(pairs[:, 1], minlength=self.card_j).astype(np.int64)
        return Vocab(self.context_labels, self.target_labels, cc, tc)


# ── parameters ──────────────────────────────────────────────────────────────

@dataclass
class ModelParams:
    """Input rows ``W`` (card_i, d) and output rows ``O`` (card_j, d)."""

    W: np.ndarray
    O: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.O = np.asarray(self.O, dtype=np.float64)
        if self.W.ndim != 2 or self.O.ndim != 2:
            raise ConfigError("W and O must be 2-D")
        if self.W.shape[1] != self.O.shape[1]:
            raise ConfigError(
                f"dimension mismatch: W has d={self.W.shape[1]}, O has d={self.O.shape[1]}")

    @property
    def card_i(self) -> int:
        return self.W.shape[0]

    @property
    def card_j(self) -> int:
        return self.O.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(self.W.copy(), self.O.copy())


def init_params(card_i: int, card_j: int, d: int, seed: int,
                scale: float | None = None) -> ModelParams:
    """Uniform init in [-scale, +scale]; scale defaults to 0.5/d.

    The default keeps initial scores of order 1/d so early softmax rows are
    near uniform regardless of dimension.
    """
    if card_i < 1 or card_j < 1 or d < 1:
        raise ConfigError(f"non-positive model dimensions: ({card_i}, {card_j}, {d})")
    if scale is None:
        scale = 0.5 / d
    if scale <= 0:
        raise ConfigError("init scale must be positive")
    rng = np.random.default_rng(seed)
    W = rng.uniform(-scale, scale, size=(card_i, d))
    O = rng.uniform(-scale, scale, size=(card_j, d))
    return ModelParams(W, O)


def _check_index(idx: int, bound: int, what: str) -> int:
    idx = int(idx)
    if not 0 <= idx < bound:
        raise IndexError(f"{what} id {idx} out of range [0, {bound})")
    return idx


def score(params: ModelParams, i: int, j: int) -> float:
    """Dot product of W[i] and O[j].

    Uses einsum so the accumulation order matches score_all_targets exactly;
    BLAS gemv and scalar dot do not agree bitwise on this platform.
    """
    i = _check_index(i, params.card_i, "context")
    j = _check_index(j, params.card_j, "target")
    return float(np.einsum("d,d->", params.W[i], params.O[j]))


def score_all_targets(params: ModelParams, i: int) -> np.ndarray:
    """Scores of context i against every target; entry j equals score(params, i, j)."""
    i = _check_index(i, params.card_i, "context")
    return np.einsum("jd,d->j", params.O, params.W[i])


# ── checkpoint container ────────────────────────────────────────────────────

def save_checkpoint(path, params: ModelParams, vocab: Vocab) -> None:
    """Write header line + float32 payload (W then O) + label lines.

    Matrices are stored in single precision; values not representable in
    float32 are rounded once at save time and survive further round trips
    unchanged.
    """
    if params.card_i != vocab.card_i or params.card_j != vocab.card_j:
        raise ConfigError("parameter shapes do not match the vocabulary")
    header = {"card_i": params.card_i, "card_j": params.card_j,
              "d": params.d, "dtype": CHECKPOINT_DTYPE}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(params.W, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(params.O, dtype="<f4").tobytes())
        for label in vocab.context_labels:
            fh.write(label.encode("utf-8") + b"\n")
        for label in vocab.target_labels:
            fh.write(label.encode("utf-8") + b"\n")


def load_checkpoint(path) -> tuple[ModelParams, Vocab]:
    """Inverse of save_checkpoint.

    Returns float64 matrices whose values are exactly the stored float32
    ones.  Occurrence counts are not part of the container, so the returned
    vocabulary has zero counts.
    """
    with open(path, "rb") as fh:
        raw = fh.read()

    nl = raw.find(b"\n")
    if nl < 0:
        raise DataError(f"{path}: checkpoint header: no newline-terminated JSON line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: checkpoint header: {exc}") from exc
    for key in ("card_i", "card_j", "d", "dtype"):
        if key not in header:
            raise DataError(f"{path}: checkpoint header: missing key {key!r}")
    if header["dtype"] != CHECKPOINT_DTYPE:
        raise DataError(f"{path}: checkpoint header: unsupported dtype {header['dtype']!r}")
    card_i, card_j, d = int(header["card_i"]), int(header["card_j"]), int(header["d"])
    if min(card_i, card_j, d) < 1:
        raise DataError(f"{path}: checkpoint header: non-positive dimensions")

    payload_len = 4 * d * (card_i + card_j)
    body = raw[nl + 1:]
    if len(body) < payload_len:
        raise DataError(
            f"{path}: checkpoint payload: expected {payload_len} bytes for "
            f"d={d}, got {len(body)}")
    flat = np.frombuffer(body[:payload_len], dtype="<f4")
    W = flat[:card_i * d].reshape(card_i, d).astype(np.float64)
    O = flat[card_i * d:].reshape(card_j, d).astype(np.float64)

    label_block = body[payload_len:]
    if label_block[-1:] != b"\n":
        raise DataError(f"{path}: checkpoint labels: block must end with newline")
    try:
        lines = label_block[:-1].decode("utf-8").split("\n")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: checkpoint labels: {exc}") from exc
    if len(lines) != card_i + card_j:
        raise DataError(
            f"{path}: checkpoint labels: expected {card_i + card_j} lines, "
            f"got {len(lines)}; header/payload sizes likely inconsistent")
    vocab = Vocab(lines[:card_i], lines[card_i:])
    return ModelParams(W, O), vocab


def export_word2vec(path, params: ModelParams, vocab: Vocab, matrix: str = "W") -> None:
    """Plain-text embedding export: '<count> <dim>' header, then one row per line.

    ``matrix`` selects the input rows W (context labels) or output rows O
    (target labels).  Whitespace inside labels is replaced by underscores
    because the format is space-delimited.
    """
    if matrix == "W":
        rows, labels = params.W, vocab.context_labels
    elif matrix == "O":
        rows, labels = params.O, vocab.target_labels
    else:
        raise ConfigError(f"matrix must be 'W' or 'O', got {matrix!r}")
    if rows.shape[0] != len(labels):
        raise ConfigError("matrix rows do not match the vocabulary")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{rows.shape[0]} {rows.shape[1]}\n")
        for label, vec in zip(labels, rows):
            token = "_".join(label.split())
            fh.write(token + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")
