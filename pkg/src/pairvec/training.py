"""Training loop, temperature grid search, and the experiment suite driver.

One trainer serves every method.  A method names a loss plus, where one is
needed, a negative sampler:

    MLE  full-softmax likelihood, no sampling
    SS   sampled softmax with popularity proposal and expected-count logits
    US   relaxed softmax, uniform draws
    PS   relaxed softmax, popularity draws
    UBS  relaxed softmax, Boltzmann draws with uniform degeneracy
    PBS  relaxed softmax, Boltzmann draws with popularity degeneracy
    OBS  relaxed softmax, Boltzmann draws with inverse-conditional degeneracy
         taken from a supplied ground truth
    BCE  logistic loss on the positive plus popularity-drawn negatives

Negatives are drawn per pair (fresh i.i.d. draws for every training
example); parameter updates are grouped per mini-batch and use the mean
gradient.  Since parameters are frozen within a batch, Boltzmann
distributions are computed once per distinct context per batch, which is
exactly the per-pair distribution at the current parameters.

Determinism: a run is a pure function of (config, dataset, ground truth).
Shuffling, sampling, and evaluation subsampling use three independent
seeded streams, so evaluation cadence never perturbs training draws.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, NumericalAbort
from .evaluation import approx_mpr, precision_at_k, test_likelihood
from .ingest import PairDataset, split_dataset
from .model import ModelParams, init_params, save_checkpoint
from .sampling import CategoricalTable, popularity_distribution
from . import synthetic as syn

logger = logging.getLogger(__name__)

METHODS = ("MLE", "SS", "US", "PS", "UBS", "PBS", "OBS", "BCE")
BOLTZMANN_METHODS = ("UBS", "PBS", "OBS")
OPTIMIZERS = ("sgd", "adagrad", "adam")
LR_SCHEDULES = ("linear", "constant")
_LR_FLOOR = 1e-4
_SNAPSHOT_PAIR_CAP = 2048


@dataclass
class TrainConfig:
    method: str = "MLE"
    d: int = 64
    epochs: int = 1
    batch_size: int = 512
    learning_rate: float = 0.05
    lr_schedule: str = "linear"
    optimizer: str = "sgd"
    n_negatives: int = 5
    temperature: float = 1.0
    popularity_exponent: float = 1.0
    include_positive: bool = True
    init_scale: float | None = None
    seed: int = 0
    max_steps: int | None = None
    eval_every: int | None = None
    eval_negatives: int = 100
    checkpoint_path: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.method != "MLE" and self.n_negatives < 1:
            raise ConfigError("n_negatives must be >= 1 for sampled methods")
        if not (self.temperature > 0 or math.isinf(self.temperature)):
            raise ConfigError("temperature must be positive (math.inf allowed)")
        if self.popularity_exponent < 0:
            raise ConfigError("popularity_exponent must be >= 0")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1 when given")
        if self.eval_every is not None and self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1 when given")
        if self.eval_negatives < 1:
            raise ConfigError("eval_negatives must be >= 1")

    def resolved(self) -> dict:
        out = dataclasses.asdict(self)
        out["temperature"] = "inf" if math.isinf(self.temperature) else self.temperature
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.resolved(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def replace(self, **kwargs) -> "TrainConfig":
        return dataclasses.replace(self, **kwargs)


@dataclass
class RunRecord:
    """Everything needed to audit or reproduce one training run."""

    config: dict
    config_hash: str
    loss_trace: list
    snapshots: list
    final_metrics: dict
    checkpoint_path: str | None
    wall_time_s: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


def _popularity_weights(counts: np.ndarray, alpha: float) -> np.ndarray:
    counts = counts.astype(np.float64)
    if alpha == 0.0:
        return (counts > 0).astype(np.float64)
    return counts ** alpha


def _boltzmann_rows(scores: np.ndarray, log_deg: np.ndarray,
                    temperature: float) -> np.ndarray:
    """Row-wise Boltzmann distributions; log_deg is ln D broadcastable to rows."""
    if math.isinf(temperature):
        logw = np.broadcast_to(log_deg, scores.shape).astype(np.float64, copy=True)
    else:
        logw = log_deg + scores / temperature
    logw -= logw.max(axis=1, keepdims=True)
    np.exp(logw, out=logw)
    logw /= logw.sum(axis=1, keepdims=True)
    return logw


def _rowwise_cdf_draws(q_rows: np.ndarray, row_of: np.ndarray, n: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws: n per entry of row_of, from q_rows[row_of[b]]."""
    cdf = np.cumsum(q_rows, axis=1)
    cdf[:, -1] = 1.0
    u, j = cdf.shape
    flat = (cdf + np.arange(u)[:, None]).ravel()
    r = rng.random((row_of.size, n)) + row_of[:, None]
    pos = np.searchsorted(flat, r.ravel(), side="right")
    return (pos % j).reshape(row_of.size, n).astype(np.int64)


class _Optimizer:
    """Row-sparse SGD / Adagrad / Adam over the two parameter matrices."""

    def __init__(self, config: TrainConfig, params: ModelParams, total_steps: int):
        self.kind = config.optimizer
        self.lr0 = config.learning_rate
        self.schedule = config.lr_schedule
        self.total = max(total_steps, 1)
        self.t = 0
        if self.kind == "adagrad":
            self.acc = [np.zeros_like(params.W), np.zeros_like(params.O)]
        elif self.kind == "adam":
            self.m = [np.zeros_like(params.W), np.zeros_like(params.O)]
            self.v = [np.zeros_like(params.W), np.zeros_like(params.O)]

    def lr(self) -> float:
        if self.schedule == "constant":
            return self.lr0
        return self.lr0 * max(1.0 - self.t / self.total, _LR_FLOOR)

    def apply(self, which: int, matrix: np.ndarray, rows: np.ndarray,
              grad_rows: np.ndarray) -> None:
        lr = self.lr()
        if self.kind == "sgd":
            matrix[rows] -= lr * grad_rows
        elif self.kind == "adagrad":
            acc = self.acc[which]
            acc[rows] += grad_rows ** 2
            matrix[rows] -= lr * grad_rows / (np.sqrt(acc[rows]) + 1e-10)
        else:
            b1, b2, eps = 0.9, 0.999, 1e-8
            m, v = self.m[which], self.v[which]
            m[rows] = b1 * m[rows] + (1 - b1) * grad_rows
            v[rows] = b2 * v[rows] + (1 - b2) * grad_rows ** 2
            step = self.t + 1
            mhat = m[rows] / (1 - b1 ** step)
            vhat = v[rows] / (1 - b2 ** step)
            matrix[rows] -= lr * mhat / (np.sqrt(vhat) + eps)

    def step_done(self) -> None:
        self.t += 1


def _prepare_sampler(config: TrainConfig, dataset: PairDataset,
                     ground_truth) -> dict:
    """Method-specific static state: alias tables, degeneracies, proposals."""
    vocab = dataset.vocab
    state: dict = {}
    if config.method in ("PS", "BCE", "SS"):
        table = popularity_distribution(vocab, config.popularity_exponent)
        state["table"] = table
        if config.method == "SS":
            state["proposal"] = table.probs
    elif config.method in BOLTZMANN_METHODS:
        if config.method == "UBS":
            deg = np.ones(vocab.card_j)
        elif config.method == "PBS":
            deg = _popularity_weights(vocab.target_counts, config.popularity_exponent)
            if not (deg.sum() > 0):
                raise DataError("popularity degeneracy is all zero")
        else:
            if ground_truth is None:
                raise ConfigError("method OBS needs a ground truth for its degeneracy")
            state["deg_table"] = syn.oracle_degeneracy_table(ground_truth)
            return state
        with np.errstate(divide="ignore"):
            state["log_deg"] = np.where(deg > 0, np.log(deg, where=deg > 0), -np.inf)
    return state


def train(config: TrainConfig, dataset: PairDataset,
          ground_truth=None) -> tuple[ModelParams, RunRecord]:
    """Run one training job and return the parameters with their record.

    ``ground_truth`` enables divergence snapshots and is required by OBS.
    Aborts with NumericalAbort (diagnosing step, pair and score range) the
    moment a loss or an updated parameter goes non-finite.
    """
    config.validate()
    t_start = time.perf_counter()
    vocab = dataset.vocab
    train_pairs = dataset.pairs_for("train")
    if len(train_pairs) == 0:
        raise DataError("dataset has no training pairs")
    valid_pairs = dataset.pairs_for("valid")
    if ground_truth is not None and \
            (ground_truth.card_i, ground_truth.card_j) != (vocab.card_i, vocab.card_j):
        raise ConfigError("ground truth does not match the vocabulary")

    params = init_params(vocab.card_i, vocab.card_j, config.d, config.seed,
                         config.init_scale)
    W, O = params.W, params.O
    card_j = vocab.card_j

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    shuffle_rng = np.random.default_rng(seeds[0])
    sample_rng = np.random.default_rng(seeds[1])
    eval_rng = np.random.default_rng(seeds[2])

    n_train = len(train_pairs)
    batches_per_epoch = -(-n_train // config.batch_size)
    total_steps = config.epochs * batches_per_epoch
    if config.max_steps is not None:
        total_steps = min(total_steps, config.max_steps)
    opt = _Optimizer(config, params, total_steps)
    state = _prepare_sampler(config, dataset, ground_truth)

    method = config.method
    n_neg = config.n_negatives
    needs_rows = method == "MLE" or method in BOLTZMANN_METHODS
    grad_w_buf = np.zeros_like(W)
    grad_o_buf = np.zeros_like(O) if method != "MLE" else None

    loss_trace: list[float] = []
    snapshots: list[dict] = []
    pending_losses: list[float] = []

    def snapshot(step: int, epoch: int) -> dict:
        snap: dict = {"step": step, "epoch": epoch,
                      "time_s": time.perf_counter() - t_start}
        if pending_losses:
            snap["mean_loss"] = float(np.mean(pending_losses))
            pending_losses.clear()
        if ground_truth is not None:
            snap["kl_joint"] = syn.kl_joint(ground_truth, params, vocab)
            snap["kl_true_conditional"] = syn.mean_true_conditional_kl(ground_truth, params)
            snap["kl_empirical_conditional"] = \
                syn.mean_empirical_conditional_kl(train_pairs, params)
        if len(valid_pairs):
            if len(valid_pairs) > _SNAPSHOT_PAIR_CAP:
                sel = eval_rng.choice(len(valid_pairs), _SNAPSHOT_PAIR_CAP, replace=False)
                sub = valid_pairs[sel]
            else:
                sub = valid_pairs
            mpr_seed = int(eval_rng.integers(2 ** 31))
            snap["valid_likelihood"] = test_likelihood(params, sub)
            snap["valid_mpr"] = approx_mpr(params, sub, config.eval_negatives, mpr_seed)
        snapshots.append(snap)
        return snap

    step = 0
    done = False
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            idx = order[start:start + config.batch_size]
            ctx = train_pairs[idx, 0]
            tgt = train_pairs[idx, 1]
            b = len(idx)

            uniq, inv = np.unique(ctx, return_inverse=True)
            rows = W[uniq] @ O.T if needs_rows else None

            if method == "MLE":
                m = rows.max(axis=1, keepdims=True)
                probs = np.exp(rows - m)
                z = probs.sum(axis=1, keepdims=True)
                probs /= z
                lse = (m + np.log(z)).ravel()
                s_pos = rows[inv, tgt]
                batch_loss = lse[inv] - s_pos
                coef = probs[inv]
                w_ctx = W[ctx]
                grad_o = coef.T @ w_ctx
                np.add.at(grad_o, tgt, -w_ctx)
                grad_w_rows = coef @ O - O[tgt]
            else:
                if method == "US":
                    neg = sample_rng.integers(0, card_j, size=(b, n_neg))
                elif method in ("PS", "BCE", "SS"):
                    neg = state["table"].draw(sample_rng, (b, n_neg))
                else:
                    if method == "OBS":
                        deg = state["deg_table"][uniq]
                        with np.errstate(divide="ignore"):
                            log_deg = np.where(deg > 0, np.log(deg, where=deg > 0),
                                               -np.inf)
                    else:
                        log_deg = state["log_deg"]
                    q_rows = _boltzmann_rows(rows, log_deg, config.temperature)
                    neg = _rowwise_cdf_draws(q_rows, inv, n_neg, sample_rng)

                w_ctx = W[ctx]
                if needs_rows:
                    s_neg = rows[inv[:, None], neg]
                    s_pos = rows[inv, tgt]
                else:
                    s_neg = np.einsum("bd,bkd->bk", w_ctx, O[neg])
                    s_pos = np.einsum("bd,bd->b", w_ctx, O[tgt])

                if method == "SS":
                    slot_ids = np.concatenate([tgt[:, None], neg], axis=1)
                    q = state["proposal"][slot_ids]
                    if (q[:, 0] <= 0).any():
                        bad = int(np.flatnonzero(q[:, 0] <= 0)[0])
                        raise DataError(
                            f"sampled-softmax proposal is zero at training target "
                            f"{int(tgt[bad])}")
                    logits = np.concatenate([s_pos[:, None], s_neg], axis=1) \
                        - np.log(n_neg * q)
                    m = logits.max(axis=1, keepdims=True)
                    e = np.exp(logits - m)
                    z = e.sum(axis=1, keepdims=True)
                    batch_loss = (m + np.log(z)).ravel() - logits[:, 0]
                    coefs = e / z
                    coefs[:, 0] -= 1.0
                elif method == "BCE":
                    slot_ids = np.concatenate([tgt[:, None], neg], axis=1)
                    batch_loss = np.logaddexp(0.0, -s_pos) \
                        + np.logaddexp(0.0, s_neg).sum(axis=1)
                    sig_neg = np.exp(-np.logaddexp(0.0, -s_neg))
                    sig_pos = np.exp(-np.logaddexp(0.0, s_pos))  # sigmoid(-s_pos)
                    coefs = np.concatenate([-sig_pos[:, None], sig_neg], axis=1)
                else:
                    # relaxed softmax family: US, PS, UBS, PBS, OBS
                    if config.include_positive:
                        norm_scores = np.concatenate([s_neg, s_pos[:, None]], axis=1)
                        norm_ids = np.concatenate([neg, tgt[:, None]], axis=1)
                    else:
                        norm_scores, norm_ids = s_neg, neg
                    m = norm_scores.max(axis=1, keepdims=True)
                    e = np.exp(norm_scores - m)
                    z = e.sum(axis=1, keepdims=True)
                    batch_loss = (m + np.log(z)).ravel() - s_pos
                    ghat = e / z
                    slot_ids = np.concatenate([norm_ids, tgt[:, None]], axis=1)
                    coefs = np.concatenate([ghat, np.full((b, 1), -1.0)], axis=1)

                grad_w_rows = np.einsum("bk,bkd->bd", coefs, O[slot_ids])
                flat_ids = slot_ids.ravel()
                np.add.at(grad_o_buf, flat_ids,
                          (coefs[:, :, None] * w_ctx[:, None, :]).reshape(-1, O.shape[1]))

            if not np.isfinite(batch_loss).all():
                bad = int(np.flatnonzero(~np.isfinite(batch_loss))[0])
                smin, smax = float(np.nanmin(s_pos)), float(np.nanmax(s_pos))
                raise NumericalAbort("non-finite loss", step=step,
                                     pair=(int(ctx[bad]), int(tgt[bad])),
                                     score_range=(smin, smax))

            np.add.at(grad_w_buf, ctx, grad_w_rows)
            scale = 1.0 / b
            opt.apply(0, W, uniq, grad_w_buf[uniq] * scale)
            grad_w_buf[uniq] = 0.0
            if method == "MLE":
                opt.apply(1, O, np.arange(card_j), grad_o * scale)
                o_touched = None
            else:
                o_touched = np.unique(slot_ids)
                opt.apply(1, O, o_touched, grad_o_buf[o_touched] * scale)
                grad_o_buf[o_touched] = 0.0
            opt.step_done()

            touched_ok = np.isfinite(W[uniq]).all() and (
                np.isfinite(O).all() if o_touched is None
                else np.isfinite(O[o_touched]).all())
            if not touched_ok:
                raise NumericalAbort("non-finite parameter after update", step=step,
                                     pair=(int(ctx[0]), int(tgt[0])),
                                     score_range=(float(np.nanmin(s_pos)),
                                                  float(np.nanmax(s_pos))))

            mean_loss = float(batch_loss.mean())
            loss_trace.append(mean_loss)
            pending_losses.append(mean_loss)
            step += 1
            if config.eval_every is not None and step % config.eval_every == 0:
                snapshot(step, epoch)
            if config.max_steps is not None and step >= config.max_steps:
                done = True
                break
        if done:
            break

    final = snapshot(step, epoch)
    checkpoint_path = None
    if config.checkpoint_path is not None:
        save_checkpoint(config.checkpoint_path, params, vocab)
        checkpoint_path = str(config.checkpoint_path)

    record = RunRecord(config=config.resolved(), config_hash=config.config_hash(),
                       loss_trace=loss_trace, snapshots=snapshots,
                       final_metrics=dict(final), checkpoint_path=checkpoint_path,
                       wall_time_s=time.perf_counter() - t_start)
    return params, record


# ── temperature grid search ─────────────────────────────────────────────────

def _metric_direction(metric: str) -> int:
    """+1 when larger is better, -1 when smaller is better."""
    return -1 if metric == "kl_joint" else 1


def _metric_value(metric: str, params: ModelParams, pairs: np.ndarray,
                  vocab, ground_truth, eval_seed: int) -> float:
    if metric == "kl_joint":
        if ground_truth is None:
            raise ConfigError("metric kl_joint needs a ground truth")
        return syn.kl_joint(ground_truth, params, vocab)
    if len(pairs) == 0:
        raise ConfigError(f"metric {metric!r} needs a non-empty evaluation split")
    if metric == "likelihood":
        return test_likelihood(params, pairs)
    if metric == "mpr":
        return approx_mpr(params, pairs, seed=eval_seed)
    if metric.startswith("prec@"):
        try:
            k = int(metric.split("@", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad precision metric {metric!r}") from exc
        return precision_at_k(params, pairs, k)
    raise ConfigError(f"unknown grid metric {metric!r}")


@dataclass
class GridSearchResult:
    metric: str
    rows: list
    best_temperature: float
    best_value: float

    def to_json(self) -> str:
        out = dataclasses.asdict(self)
        out["best_temperature"] = _json_safe(out["best_temperature"])
        for row in out["rows"]:
            row["temperature"] = _json_safe(row["temperature"])
        return json.dumps(out, sort_keys=True)


def _json_safe(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def grid_search_temperature(base_config: TrainConfig, temperatures,
                            dataset: PairDataset, metric: str,
                            ground_truth=None) -> GridSearchResult:
    """Train once per temperature and pick the best validation value.

    Only the Boltzmann methods expose a temperature.  Runs that abort
    numerically are kept in the table as failures; ties on the metric go to
    the earliest grid entry.
    """
    if base_config.method not in BOLTZMANN_METHODS:
        raise ConfigError(f"method {base_config.method} has no temperature to search")
    temperatures = list(temperatures)
    if not temperatures:
        raise ConfigError("empty temperature grid")
    direction = _metric_direction(metric)

    rows = []
    best_idx, best_value = None, None
    for pos, temp in enumerate(temperatures):
        cfg = base_config.replace(temperature=float(temp))
        row = {"temperature": float(temp), "failed": False, "value": None}
        try:
            params, record = train(cfg, dataset, ground_truth)
            value = _metric_value(metric, params, dataset.pairs_for("valid"),
                                  dataset.vocab, ground_truth,
                                  eval_seed=base_config.seed)
            row["value"] = value
            row["wall_time_s"] = record.wall_time_s
            if math.isfinite(value) and \
                    (best_value is None or direction * value > direction * best_value):
                best_idx, best_value = pos, value
        except NumericalAbort as exc:
            logger.warning("grid point T=%s aborted: %s", temp, exc)
            row["failed"] = True
        rows.append(row)
    if best_idx is None:
        raise NumericalAbort("every temperature grid point failed or was non-finite")
    return GridSearchResult(metric=metric, rows=rows,
                            best_temperature=float(temperatures[best_idx]),
                            best_value=float(best_value))


# ── experiment suite ────────────────────────────────────────────────────────

def _build_suite_dataset(spec: dict, seed: int):
    """Materialise one dataset entry for one run seed."""
    kind = spec.get("kind")
    if kind == "synthetic":
        gt = syn.build_mixture(int(spec["card_i"]), int(spec["card_j"]),
                               int(spec["n_components"]),
                               int(spec.get("mixture_seed", 0)),
                               tuple(spec.get("sigma_range", (0.02, 0.08))))
        dataset = syn.sample_pairs(gt, int(spec["n_pairs"]), seed=seed)
        fractions = spec.get("split", (0.7, 0.1, 0.2))
        dataset = split_dataset(dataset, fractions, seed=seed)
        return dataset, gt
    if kind == "pair_cache":
        from .ingest import load_pair_cache
        dataset = load_pair_cache(spec["path"])
        if dataset.split is None:
            dataset = split_dataset(dataset, spec.get("split", (0.7, 0.1, 0.2)),
                                    seed=seed)
        return dataset, None
    raise ConfigError(f"unknown dataset kind {kind!r}")


def run_experiment_suite(suite: dict, out_dir) -> dict:
    """Cross product of datasets x methods x seeds, with aggregation.

    ``suite`` schema (TOML/JSON friendly): ``seeds`` (list of ints),
    ``base`` (TrainConfig field defaults), ``datasets`` (list of dataset
    specs), ``methods`` (list of {name?, method, overrides...}), and
    ``metrics`` (test-split metric names: likelihood, mpr, prec@K).
    Divergence metrics are added automatically for synthetic datasets.
    Writes one record per run plus aggregate.csv / aggregate.json.
    """
    out_dir = Path(out_dir)
    (out_dir / "runs").mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in suite.get("seeds", [0])]
    if not seeds:
        raise ConfigError("suite needs at least one seed")
    base = dict(suite.get("base", {}))
    datasets = suite.get("datasets") or []
    methods = suite.get("methods") or []
    if not datasets or not methods:
        raise ConfigError("suite needs datasets and methods")
    metric_names = list(suite.get("metrics", ["likelihood", "mpr"]))

    results: dict = {}
    for ds_spec in datasets:
        ds_name = ds_spec.get("name") or ds_spec.get("kind")
        for seed in seeds:
            dataset, gt = _build_suite_dataset(ds_spec, seed)
            test_pairs = dataset.pairs_for("test")
            for m_spec in methods:
                overrides = {k: v for k, v in m_spec.items() if k != "name"}
                m_name = m_spec.get("name") or overrides["method"]
                cfg = TrainConfig(**{**base, **overrides, "seed": seed})
                params, record = train(cfg, dataset, gt)

                values: dict = {}
                for metric in metric_names:
                    if len(test_pairs) == 0:
                        raise ConfigError(
                            f"metric {metric!r} needs a test split in {ds_name!r}")
                    values[metric] = _metric_value(metric, params, test_pairs,
                                                   dataset.vocab, gt, eval_seed=seed)
                if gt is not None:
                    values["kl_joint"] = syn.kl_joint(gt, params, dataset.vocab)
                    values["kl_true_conditional"] = \
                        syn.mean_true_conditional_kl(gt, params)

                run_path = out_dir / "runs" / f"{ds_name}~{m_name}~s{seed}.json"
                payload = json.loads(record.to_json())
                payload["suite_metrics"] = values
                run_path.write_text(json.dumps(payload, sort_keys=True))
                results.setdefault((ds_name, m_name), []).append(values)

    rows = []
    for (ds_name, m_name), per_seed in sorted(results.items()):
        names = sorted({k for values in per_seed for k in values})
        for metric in names:
            vals = np.array([v[metric] for v in per_seed if metric in v], dtype=float)
            rows.append({"dataset": ds_name, "method": m_name, "metric": metric,
                         "mean": float(vals.mean()), "std": float(vals.std(ddof=0)),
                         "n_seeds": int(vals.size)})
    aggregate = {"rows": rows, "seeds": seeds}
    (out_dir / "aggregate.json").write_text(json.dumps(aggregate, indent=2,
                                                       sort_keys=True))
    import csv as _csv
    with open(out_dir / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        writer = _csv.DictWriter(fh, fieldnames=["dataset", "method", "metric",
                                                 "mean", "std", "n_seeds"])
        writer.writeheader()
        writer.writerows(rows)
    return aggregate
