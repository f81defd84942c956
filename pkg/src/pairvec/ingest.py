"""Pair extraction from corpora and event logs, plus the pair-cache format.

Both ingestion paths reduce their input to the same shape: an id-mapped
vocabulary and an ordered array of (context, target) pairs produced by a
forward sliding window.  Splitting is a seeded pair-level assignment; the
returned dataset's vocabulary counts are recomputed on the train split so
popularity-driven components never see validation or test pairs.

The on-disk cache is a raw little-endian uint32 pair file next to a JSON
sidecar carrying the vocabulary, the split assignment, and provenance.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .model import Vocab

SPLIT_NAMES = ("train", "valid", "test")


@dataclass
class PairDataset:
    """Ordered (context, target) id pairs with an attached vocabulary.

    ``split`` assigns each pair 0/1/2 for train/valid/test, or is None when
    the dataset has not been split (then every pair counts as train).
    """

    vocab: Vocab
    pairs: np.ndarray
    split: np.ndarray | None = None
    source_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64)
        if self.pairs.ndim != 2 or self.pairs.shape[1] != 2:
            raise DataError("pairs must be an (n, 2) id array")
        if self.pairs.size:
            if self.pairs.min() < 0:
                raise DataError("negative pair id")
            if self.pairs[:, 0].max() >= self.vocab.card_i:
                raise DataError("context id outside the vocabulary")
            if self.pairs[:, 1].max() >= self.vocab.card_j:
                raise DataError("target id outside the vocabulary")
        if self.split is not None:
            self.split = np.asarray(self.split, dtype=np.int8)
            if self.split.shape != (len(self.pairs),):
                raise DataError("split assignment length does not match pairs")
            if self.split.size and (self.split.min() < 0 or self.split.max() > 2):
                raise DataError("split labels must be 0, 1 or 2")

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def pairs_for(self, name: str) -> np.ndarray:
        if name not in SPLIT_NAMES:
            raise ConfigError(f"unknown split {name!r}")
        if self.split is None:
            return self.pairs if name == "train" else self.pairs[:0]
        return self.pairs[self.split == SPLIT_NAMES.index(name)]


def _top_by_frequency(counter: Counter, limit: int) -> list[str]:
    # frequency descending, ties resolved lexicographically
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return [token for token, _ in ranked[:limit]]


def _window_pairs(sequences: list[np.ndarray], window: int,
                  bidirectional: bool) -> np.ndarray:
    # Emitted position-major within each sequence: all pairs anchored at
    # position t (offsets k = 1..window) precede anything anchored at t+1,
    # and a mirrored pair follows its forward twin.
    out = []
    for seq in sequences:
        chunks, keys = [], []
        for k in range(1, window + 1):
            if len(seq) <= k:
                break
            left, right = seq[:-k], seq[k:]
            anchor = np.arange(len(left), dtype=np.int64) * (window + 1) + k
            chunks.append(np.stack([left, right], axis=1))
            keys.append(2 * anchor)
            if bidirectional:
                chunks.append(np.stack([right, left], axis=1))
                keys.append(2 * anchor + 1)
        if chunks:
            flat = np.concatenate(chunks, axis=0)
            order = np.argsort(np.concatenate(keys), kind="stable")
            out.append(flat[order])
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(out, axis=0)


def pairs_from_text(tokens, window: int, vocab_size: int,
                    bidirectional: bool = False) -> PairDataset:
    """Sliding-window pairs (t, t+k), k = 1..window, over one token stream.

    Keeps the ``vocab_size`` most frequent tokens, drops the rest before
    windowing (so pairs can span removed tokens), and uses the surviving
    vocabulary for both contexts and targets.  ``bidirectional`` adds the
    mirrored (t+k, t) pairs.
    """
    if window < 1:
        raise ConfigError("window must be >= 1")
    if vocab_size < 1:
        raise ConfigError("vocab_size must be >= 1")
    tokens = list(tokens)
    if not tokens:
        raise DataError("empty token stream")

    keep = _top_by_frequency(Counter(tokens), vocab_size)
    index = {tok: idx for idx, tok in enumerate(keep)}
    ids = np.fromiter((index[t] for t in tokens if t in index), dtype=np.int64)
    pairs = _window_pairs([ids], window, bidirectional)
    if not len(pairs):
        raise DataError("no pairs produced; corpus too short after vocabulary filtering")

    vocab = Vocab(list(keep), list(keep)).with_counts_from(pairs)
    meta = {"kind": "text", "window": window, "vocab_size": vocab_size,
            "bidirectional": bidirectional, "n_tokens": len(tokens)}
    return PairDataset(vocab, pairs, None, meta)


def pairs_from_ratings(events, threshold: float, max_items: int,
                       window: int, bidirectional: bool = False) -> PairDataset:
    """Windowed item pairs from per-user rating histories.

    ``events`` is an iterable of (user, item, rating) already in each
    user's temporal order; rows below ``threshold`` are discarded, the
    ``max_items`` most frequent surviving items form the vocabulary, and
    each user's retained sequence is windowed like a sentence.  Users with
    fewer than two retained items contribute nothing.
    """
    if window < 1:
        raise ConfigError("window must be >= 1")
    if max_items < 1:
        raise ConfigError("max_items must be >= 1")

    per_user: dict = {}
    item_counter: Counter = Counter()
    for row in events:
        try:
            user, item, rating = row[0], row[1], float(row[2])
        except (TypeError, ValueError, IndexError) as exc:
            raise DataError(f"malformed rating event {row!r}") from exc
        if rating >= threshold:
            per_user.setdefault(user, []).append(item)
            item_counter[item] += 1
    if not item_counter:
        raise DataError("no events at or above the rating threshold")

    keep = _top_by_frequency(item_counter, max_items)
    index = {item: idx for idx, item in enumerate(keep)}
    sequences = []
    for user in per_user:
        seq = np.fromiter((index[it] for it in per_user[user] if it in index),
                          dtype=np.int64)
        if len(seq) >= 2:
            sequences.append(seq)
    pairs = _window_pairs(sequences, window, bidirectional)
    if not len(pairs):
        raise DataError("no pairs produced; every user history is too short")

    vocab = Vocab([str(k) for k in keep], [str(k) for k in keep]).with_counts_from(pairs)
    meta = {"kind": "ratings", "threshold": threshold, "max_items": max_items,
            "window": window, "bidirectional": bidirectional,
            "n_users": len(per_user)}
    return PairDataset(vocab, pairs, None, meta)


def split_dataset(dataset: PairDataset, fractions, seed: int) -> PairDataset:
    """Seeded uniform pair-level split into train/valid/test.

    Class sizes follow the largest-remainder rounding of n * fraction, so
    they match the requested fractions within one pair.  The returned
    vocabulary's counts cover the train split only.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.shape != (3,):
        raise ConfigError("fractions must be (train, valid, test)")
    if (fractions < 0).any():
        raise ConfigError("fractions must be non-negative")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise ConfigError(f"fractions sum to {fractions.sum()!r}, expected 1")
    n = dataset.n_pairs
    active = int((fractions > 0).sum())
    if n < active:
        raise DataError(f"cannot split {n} pairs into {active} non-empty classes")

    base = np.floor(fractions * n).astype(np.int64)
    remainder = fractions * n - base
    for k in np.argsort(-remainder, kind="stable")[: n - int(base.sum())]:
        base[k] += 1

    assignment = np.repeat(np.arange(3, dtype=np.int8), base)
    perm = np.random.default_rng(seed).permutation(n)
    split = np.empty(n, dtype=np.int8)
    split[perm] = assignment

    vocab = dataset.vocab.with_counts_from(dataset.pairs[split == 0])
    meta = dict(dataset.source_meta)
    meta["split"] = {"fractions": fractions.tolist(), "seed": seed}
    return PairDataset(vocab, dataset.pairs, split, meta)


# ── benchmark file parsers ──────────────────────────────────────────────────

def _fields(line: str) -> list[str]:
    parts = line.split()
    if len(parts) == 1 and "," in line:
        parts = [p for p in line.strip().split(",") if p]
    return parts


def load_similarity_file(path) -> list[tuple[str, str, float]]:
    """Word pairs with human similarity scores: 'w1 w2 score' per line.

    Whitespace- or comma-delimited; blank lines and '#' comments skipped.
    """
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = _fields(line)
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 'word1 word2 score'")
            try:
                score = float(parts[2])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: score {parts[2]!r} is not a number") from exc
            triples.append((parts[0], parts[1], score))
    if not triples:
        raise DataError(f"{path}: no similarity triples found")
    return triples


def load_analogy_file(path) -> list[tuple[str, str, str, str, str]]:
    """Analogy quadruples grouped by ': section' headers.

    Returns (a, b, c, d, kind) rows where kind is 'syntactic' for sections
    whose name starts with 'gram' and 'semantic' otherwise.
    """
    quads = []
    kind = "semantic"
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(":"):
                section = line[1:].strip()
                kind = "syntactic" if section.startswith("gram") else "semantic"
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected four words per analogy line")
            quads.append((*parts, kind))
    if not quads:
        raise DataError(f"{path}: no analogy quadruples found")
    return quads


# ── pair cache ──────────────────────────────────────────────────────────────

def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def save_pair_cache(path, dataset: PairDataset) -> None:
    """Raw '<u32 context><u32 target>' records plus a JSON sidecar."""
    if dataset.vocab.card_i > 2 ** 32 or dataset.vocab.card_j > 2 ** 32:
        raise DataError("vocabulary too large for the u32 pair format")
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(dataset.pairs, dtype="<u4").tobytes())
    sidecar = {
        "format": "pair_cache_v1",
        "n_pairs": dataset.n_pairs,
        "context_labels": dataset.vocab.context_labels,
        "target_labels": dataset.vocab.target_labels,
        "context_counts": dataset.vocab.context_counts.tolist(),
        "target_counts": dataset.vocab.target_counts.tolist(),
        "split": None if dataset.split is None else dataset.split.tolist(),
        "source_meta": dataset.source_meta,
    }
    with open(_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh)


def load_pair_cache(path) -> PairDataset:
    sidecar_path = _sidecar(path)
    if not sidecar_path.exists():
        raise DataError(f"{path}: missing sidecar {sidecar_path}")
    with open(sidecar_path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{sidecar_path}: {exc}") from exc
    if meta.get("format") != "pair_cache_v1":
        raise DataError(f"{sidecar_path}: unknown cache format {meta.get('format')!r}")

    raw = np.fromfile(path, dtype="<u4")
    n = int(meta["n_pairs"])
    if raw.size != 2 * n:
        raise DataError(f"{path}: expected {2 * n} u32 values, found {raw.size}")
    pairs = raw.reshape(n, 2).astype(np.int64)
    vocab = Vocab(meta["context_labels"], meta["target_labels"],
                  np.asarray(meta["context_counts"], dtype=np.int64),
                  np.asarray(meta["target_counts"], dtype=np.int64))
    split = meta["split"]
    return PairDataset(vocab, pairs,
                       None if split is None else np.asarray(split, dtype=np.int8),
                       meta.get("source_meta", {}))
