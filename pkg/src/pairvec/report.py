"""Comparison tables and SVG charts from run records and suite aggregates.

The method table follows the usual benchmark layout: one row per metric,
one column per method, cells "mean +/- std".  Plots are written as SVG so
they render anywhere without a display server.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ConfigError, DataError


def load_aggregate(path) -> dict:
    """Read an aggregate.json written by run_experiment_suite."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if "rows" not in obj:
        raise DataError(f"{path}: missing 'rows'; not a suite aggregate")
    return obj


def method_metric_table(rows, dataset: str | None = None) -> dict:
    """Pivot aggregate rows into {metric: {method: (mean, std)}}.

    ``dataset`` restricts the rows when the aggregate covers several; with
    one dataset it can stay None.
    """
    datasets = sorted({r["dataset"] for r in rows})
    if dataset is None:
        if len(datasets) > 1:
            raise ConfigError(f"aggregate covers several datasets {datasets}; pick one")
        dataset = datasets[0] if datasets else None
    table: dict = {}
    methods: list = []
    for r in rows:
        if r["dataset"] != dataset:
            continue
        if r["method"] not in methods:
            methods.append(r["method"])
        table.setdefault(r["metric"], {})[r["method"]] = (r["mean"], r["std"])
    if not table:
        raise DataError(f"no aggregate rows for dataset {dataset!r}")
    return {"dataset": dataset, "methods": methods, "metrics": table}


def write_method_table_csv(table: dict, path) -> None:
    """Metric rows x method columns, cells 'mean +/- std'."""
    methods = table["methods"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", *methods])
        for metric in sorted(table["metrics"]):
            cells = []
            for m in methods:
                if m in table["metrics"][metric]:
                    mean, std = table["metrics"][metric][m]
                    cells.append(f"{mean:.6g} +/- {std:.2g}")
                else:
                    cells.append("")
            writer.writerow([metric, *cells])


def write_method_table_markdown(table: dict, path) -> None:
    methods = table["methods"]
    lines = [f"| metric | {' | '.join(methods)} |",
             f"|---{'|---' * len(methods)}|"]
    for metric in sorted(table["metrics"]):
        cells = []
        for m in methods:
            if m in table["metrics"][metric]:
                mean, std = table["metrics"][metric][m]
                cells.append(f"{mean:.6g} ± {std:.2g}")
            else:
                cells.append("")
        lines.append(f"| {metric} | {' | '.join(cells)} |")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _axes(title, xlabel, ylabel):
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def plot_metric_vs_temperature(grid_results: dict, metric: str, path) -> None:
    """One line per label from {label: GridSearchResult-like rows}."""
    fig, ax = _axes(f"{metric} vs temperature", "temperature", metric)
    for label, rows in grid_results.items():
        xs = [r["temperature"] for r in rows if not r.get("failed")]
        ys = [r["value"] for r in rows if not r.get("failed")]
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xscale("log")
    ax.legend()
    fig.savefig(path, format="svg", bbox_inches="tight")
    _close(fig)


def plot_method_bars(table: dict, metric: str, path) -> None:
    """Bar chart of one metric across methods, with std error bars."""
    if metric not in table["metrics"]:
        raise ConfigError(f"metric {metric!r} not in the table")
    cells = table["metrics"][metric]
    methods = [m for m in table["methods"] if m in cells]
    means = [cells[m][0] for m in methods]
    stds = [cells[m][1] for m in methods]
    fig, ax = _axes(f"{metric} ({table['dataset']})", "", metric)
    ax.bar(range(len(methods)), means, yerr=stds, capsize=3)
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods, rotation=30, ha="right")
    fig.savefig(path, format="svg", bbox_inches="tight")
    _close(fig)


def plot_kl_vs_steps(records: dict, key: str, path) -> None:
    """Divergence trajectories from run-record snapshots, one line per label."""
    fig, ax = _axes(f"{key} during training", "step", key)
    for label, record in records.items():
        snaps = record.snapshots if hasattr(record, "snapshots") else record["snapshots"]
        xs = [s["step"] for s in snaps if key in s]
        ys = [s[key] for s in snaps if key in s]
        ax.plot(xs, ys, marker=".", label=label)
    ax.legend()
    fig.savefig(path, format="svg", bbox_inches="tight")
    _close(fig)


def _close(fig) -> None:
    import matplotlib.pyplot as plt
    plt.close(fig)
