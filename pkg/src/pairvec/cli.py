"""Command-line front end.

Subcommands cover the full workflow: synth-gen / ingest-text /
ingest-ratings produce pair caches, train / grid-temp / suite fit models,
eval / export-embeddings / report consume checkpoints and run records.
Run settings come from an optional TOML or JSON config file; any flag
given on the command line overrides the corresponding config key.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical abort during training.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation, ingest, report, synthetic
from .errors import ConfigError, DataError, NumericalAbort
from .model import export_word2vec, load_checkpoint
from .training import TrainConfig, grid_search_temperature, run_experiment_suite, train

logger = logging.getLogger(__name__)

_CONFIG_FIELDS = set(TrainConfig.__dataclass_fields__)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _load_config_file(path) -> dict:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix == ".json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    elif path.suffix == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            obj = tomllib.loads(text.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        raise ConfigError(f"{path}: config must be .toml or .json")
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config root must be a table/object")
    return obj


def _train_config(args, overrides: dict | None = None) -> TrainConfig:
    merged: dict = {}
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        unknown = set(file_cfg) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if overrides:
        merged.update(overrides)
    if merged.get("temperature") == "inf":
        merged["temperature"] = float("inf")
    return TrainConfig(**merged)


def _add_train_flags(sub):
    sub.add_argument("--config", help="TOML or JSON file with TrainConfig keys")
    sub.add_argument("--method", choices=("MLE", "SS", "US", "PS", "UBS", "PBS",
                                          "OBS", "BCE"))
    sub.add_argument("--d", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--learning-rate", dest="learning_rate", type=float)
    sub.add_argument("--lr-schedule", dest="lr_schedule",
                     choices=("linear", "constant"))
    sub.add_argument("--optimizer", choices=("sgd", "adagrad", "adam"))
    sub.add_argument("--n-negatives", dest="n_negatives", type=int)
    sub.add_argument("--temperature", type=lambda s: float(s))
    sub.add_argument("--popularity-exponent", dest="popularity_exponent", type=float)
    sub.add_argument("--literal-normalisation", dest="include_positive",
                     action="store_const", const=False,
                     help="normalise over the drawn negatives only")
    sub.add_argument("--init-scale", dest="init_scale", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--max-steps", dest="max_steps", type=int)
    sub.add_argument("--eval-every", dest="eval_every", type=int)
    sub.add_argument("--eval-negatives", dest="eval_negatives", type=int)


def _split_arg(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ConfigError("--split expects three comma-separated fractions")
    return tuple(parts)  # type: ignore[return-value]


def _load_dataset(args) -> ingest.PairDataset:
    dataset = ingest.load_pair_cache(args.dataset)
    if dataset.split is None and getattr(args, "split", None):
        dataset = ingest.split_dataset(dataset, args.split, args.split_seed)
    return dataset


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pairvec",
                     description="co-occurrence embeddings with sampled softmax losses")
    parser.add_argument("-v", "--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("synth-gen", help="generate a mixture ground truth "
                                              "and optionally sample pairs")
    p.add_argument("--card-i", type=int, default=200)
    p.add_argument("--card-j", type=int, default=200)
    p.add_argument("--components", type=int, default=50)
    p.add_argument("--sigma-range", type=lambda s: tuple(float(x) for x in s.split(",")),
                   default=(0.02, 0.08))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="ground truth output file")
    p.add_argument("--pairs", type=int, help="also sample this many pairs")
    p.add_argument("--pairs-out", help="pair cache path (requires --pairs)")
    p.add_argument("--pairs-seed", type=int, default=1)
    p.add_argument("--split", type=_split_arg)
    p.add_argument("--split-seed", type=int, default=0)

    p = commands.add_parser("ingest-text", help="whitespace corpus to pair cache")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--vocab-size", type=int, default=15000)
    p.add_argument("--bidirectional", action="store_true")
    p.add_argument("--max-bytes", type=int, help="read only the first N bytes")
    p.add_argument("--split", type=_split_arg)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = commands.add_parser("ingest-ratings", help="ratings CSV to pair cache")
    p.add_argument("--input", required=True)
    p.add_argument("--user-col", default="userId")
    p.add_argument("--item-col", default="movieId")
    p.add_argument("--rating-col", default="rating")
    p.add_argument("--timestamp-col", help="sort each user's events by this column")
    p.add_argument("--threshold", type=float, default=4.0)
    p.add_argument("--max-items", type=int, default=20000)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--bidirectional", action="store_true")
    p.add_argument("--split", type=_split_arg)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = commands.add_parser("train", help="train one model on a pair cache")
    _add_train_flags(p)
    p.add_argument("--dataset", required=True, help="pair cache path")
    p.add_argument("--ground-truth", help="mixture file for divergence metrics / OBS")
    p.add_argument("--split", type=_split_arg, help="split an unsplit cache")
    p.add_argument("--split-seed", dest="split_seed", type=int, default=0)
    p.add_argument("--checkpoint", dest="checkpoint_path")
    p.add_argument("--record-out", help="write the RunRecord JSON here")

    p = commands.add_parser("grid-temp", help="temperature grid search")
    _add_train_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ground-truth")
    p.add_argument("--split", type=_split_arg)
    p.add_argument("--split-seed", dest="split_seed", type=int, default=0)
    p.add_argument("--grid", required=True,
                   help="comma-separated temperatures, e.g. 0.5,1,3,6,12,36")
    p.add_argument("--metric", default="mpr",
                   help="kl_joint | likelihood | mpr | prec@K")
    p.add_argument("--out", help="write the grid table JSON here")

    p = commands.add_parser("suite", help="run a (datasets x methods x seeds) suite")
    p.add_argument("--config", required=True, help="suite TOML/JSON")
    p.add_argument("--out-dir", required=True)

    p = commands.add_parser("eval", help="evaluate a checkpoint on a pair cache split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--mpr-negatives", type=int, default=100)
    p.add_argument("--prec-k", type=lambda s: tuple(int(x) for x in s.split(",")),
                   default=(1, 5, 15))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--similarity", action="append", default=[],
                   help="word similarity file (repeatable)")
    p.add_argument("--spearman", action="store_true",
                   help="rank correlation instead of Pearson")
    p.add_argument("--analogy", help="analogy quadruple file")
    p.add_argument("--out", help="write the metrics report JSON here")

    p = commands.add_parser("export-embeddings", help="checkpoint to text vectors")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--matrix", choices=("W", "O"), default="W")
    p.add_argument("--out", required=True)

    p = commands.add_parser("report", help="tables and plots from a suite aggregate")
    p.add_argument("--aggregate", required=True, help="aggregate.json from 'suite'")
    p.add_argument("--dataset", help="dataset name when the suite has several")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plots", action="store_true", help="also emit SVG charts")
    return parser


# ── command bodies ──────────────────────────────────────────────────────────

def _cmd_synth_gen(args) -> int:
    gt = synthetic.build_mixture(args.card_i, args.card_j, args.components,
                                 args.seed, args.sigma_range)
    synthetic.save_ground_truth(args.out, gt)
    print(f"ground truth: {args.out} ({gt.card_i}x{gt.card_j}, "
          f"{gt.n_components} components)")
    if args.pairs:
        if not args.pairs_out:
            raise ConfigError("--pairs requires --pairs-out")
        dataset = synthetic.sample_pairs(gt, args.pairs, args.pairs_seed)
        if args.split:
            dataset = ingest.split_dataset(dataset, args.split, args.split_seed)
        ingest.save_pair_cache(args.pairs_out, dataset)
        print(f"pairs: {args.pairs_out} ({dataset.n_pairs})")
    elif args.pairs_out:
        raise ConfigError("--pairs-out requires --pairs")
    return 0


def _cmd_ingest_text(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if args.max_bytes:
        with open(path, "rb") as fh:
            text = fh.read(args.max_bytes).decode("utf-8", errors="ignore")
    else:
        text = path.read_text(encoding="utf-8")
    dataset = ingest.pairs_from_text(text.split(), args.window, args.vocab_size,
                                     args.bidirectional)
    if args.split:
        dataset = ingest.split_dataset(dataset, args.split, args.split_seed)
    ingest.save_pair_cache(args.out, dataset)
    print(f"pairs: {args.out} ({dataset.n_pairs} pairs, "
          f"vocab {dataset.vocab.card_j})")
    return 0


def _read_rating_events(args):
    import csv as _csv
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{args.input}: empty CSV")
        for col in (args.user_col, args.item_col, args.rating_col):
            if col not in reader.fieldnames:
                raise DataError(f"{args.input}: missing column {col!r}")
        if args.timestamp_col and args.timestamp_col not in reader.fieldnames:
            raise DataError(f"{args.input}: missing column {args.timestamp_col!r}")
        rows = list(reader)
    if args.timestamp_col:
        try:
            rows.sort(key=lambda r: (r[args.user_col], float(r[args.timestamp_col])))
        except ValueError as exc:
            raise DataError(f"{args.input}: bad timestamp: {exc}") from exc
    for r in rows:
        try:
            yield r[args.user_col], r[args.item_col], float(r[args.rating_col])
        except ValueError as exc:
            raise DataError(f"{args.input}: bad rating {r[args.rating_col]!r}") from exc


def _cmd_ingest_ratings(args) -> int:
    events = list(_read_rating_events(args))
    dataset = ingest.pairs_from_ratings(events, args.threshold, args.max_items,
                                        args.window, args.bidirectional)
    if args.split:
        dataset = ingest.split_dataset(dataset, args.split, args.split_seed)
    ingest.save_pair_cache(args.out, dataset)
    print(f"pairs: {args.out} ({dataset.n_pairs} pairs, "
          f"{dataset.vocab.card_j} items)")
    return 0


def _cmd_train(args) -> int:
    config = _train_config(args)
    dataset = _load_dataset(args)
    gt = synthetic.load_ground_truth(args.ground_truth) if args.ground_truth else None
    params, record = train(config, dataset, gt)
    if args.record_out:
        Path(args.record_out).write_text(record.to_json(), encoding="utf-8")
    final = {k: v for k, v in record.final_metrics.items() if k not in ("step", "epoch")}
    print(f"trained {config.method} ({record.wall_time_s:.1f}s): "
          + ", ".join(f"{k}={v:.6g}" for k, v in sorted(final.items())))
    return 0


def _cmd_grid_temp(args) -> int:
    config = _train_config(args)
    dataset = _load_dataset(args)
    gt = synthetic.load_ground_truth(args.ground_truth) if args.ground_truth else None
    try:
        grid = [float("inf") if t.strip() == "inf" else float(t)
                for t in args.grid.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad --grid: {exc}") from exc
    result = grid_search_temperature(config, grid, dataset, args.metric, gt)
    for row in result.rows:
        status = "failed" if row["failed"] else f"{row['value']:.6g}"
        print(f"T={row['temperature']:g}: {args.metric}={status}")
    print(f"best: T={result.best_temperature:g} ({args.metric}={result.best_value:.6g})")
    if args.out:
        Path(args.out).write_text(result.to_json(), encoding="utf-8")
    return 0


def _cmd_suite(args) -> int:
    suite = _load_config_file(args.config)
    aggregate = run_experiment_suite(suite, args.out_dir)
    print(f"suite: {len(aggregate['rows'])} aggregate rows -> {args.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    params, vocab = load_checkpoint(args.checkpoint)
    dataset = ingest.load_pair_cache(args.dataset)
    pairs = dataset.pairs_for(args.split)
    if len(pairs) == 0:
        raise DataError(f"dataset has no {args.split!r} pairs")
    values = {
        "likelihood": evaluation.test_likelihood(params, pairs),
        "mpr": evaluation.approx_mpr(params, pairs, args.mpr_negatives, args.seed),
    }
    for k in args.prec_k:
        values[f"prec@{k}"] = evaluation.precision_at_k(params, pairs, k)
    method = "spearman" if args.spearman else "pearson"
    for sim_path in args.similarity:
        triples = ingest.load_similarity_file(sim_path)
        res = evaluation.similarity_eval(params, vocab, triples, method)
        values[f"similarity:{Path(sim_path).stem}"] = res.correlation
    if args.analogy:
        quads = ingest.load_analogy_file(args.analogy)
        res = evaluation.analogy_eval(params, vocab, quads)
        for (kind, k), v in sorted(res.precision.items()):
            values[f"analogy:{kind}@{k}"] = v
    rep = evaluation.MetricsReport(values, {
        "checkpoint": str(args.checkpoint), "dataset": str(args.dataset),
        "split": args.split, "seed": args.seed})
    if args.out:
        Path(args.out).write_text(rep.to_json(), encoding="utf-8")
    for name in sorted(values):
        print(f"{name}: {values[name]:.6g}")
    return 0


def _cmd_export(args) -> int:
    params, vocab = load_checkpoint(args.checkpoint)
    export_word2vec(args.out, params, vocab, args.matrix)
    rows = params.card_i if args.matrix == "W" else params.card_j
    print(f"wrote {rows} vectors to {args.out}")
    return 0


def _cmd_report(args) -> int:
    aggregate = report.load_aggregate(args.aggregate)
    table = report.method_metric_table(aggregate["rows"], args.dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_method_table_csv(table, out_dir / "methods.csv")
    report.write_method_table_markdown(table, out_dir / "methods.md")
    print(f"tables -> {out_dir}")
    if args.plots:
        for metric in table["metrics"]:
            safe = metric.replace("@", "_at_").replace(":", "_")
            report.plot_method_bars(table, metric, out_dir / f"{safe}.svg")
        print(f"plots -> {out_dir}")
    return 0


_COMMANDS = {
    "synth-gen": _cmd_synth_gen,
    "ingest-text": _cmd_ingest_text,
    "ingest-ratings": _cmd_ingest_ratings,
    "train": _cmd_train,
    "grid-temp": _cmd_grid_temp,
    "suite": _cmd_suite,
    "eval": _cmd_eval,
    "export-embeddings": _cmd_export,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
