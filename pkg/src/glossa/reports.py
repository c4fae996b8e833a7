"""Report writers: delimited tables (TSV + JSON) and matplotlib figures
rendered alongside them."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def write_tsv(rows: Sequence[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        path.write_text("")
        return
    columns = list(rows[0])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_cell(row[c]) for c in columns) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


def write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_grid_figure(rows: Sequence[dict], path) -> None:
    """Grouped bar chart: accuracy per tagger, one group per condition."""
    conditions = sorted({r["condition"] for r in rows})
    taggers = sorted({r["tagger"] for r in rows})
    by_key = {(r["tagger"], r["condition"]): r["accuracy"] for r in rows}
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(conditions), 4))
    width = 0.8 / max(len(taggers), 1)
    for t_idx, tagger in enumerate(taggers):
        xs = [c_idx + t_idx * width for c_idx in range(len(conditions))]
        ys = [100 * by_key.get((tagger, cond), float("nan")) for cond in conditions]
        ax.bar(xs, ys, width=width, label=tagger)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(conditions))])
    ax.set_xticklabels(conditions)
    ax.set_ylabel("Accuracy (%)")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_al_curve(log: Sequence[dict], path) -> None:
    """Accuracy on the remaining test set per iteration, one line per
    tagger, plus the pre-annotation accuracy of each narrative."""
    if not log:
        return
    taggers = sorted(log[0]["accuracy_on_remaining"])
    iterations = [rec["iteration"] for rec in log]
    fig, ax = plt.subplots(figsize=(7, 4))
    for tagger in taggers:
        ys = [100 * rec["accuracy_on_remaining"][tagger] for rec in log]
        ax.plot(iterations, ys, marker="o", label=f"{tagger} (remaining)")
    ax.plot(iterations, [100 * rec["accuracy_on_annotated"] for rec in log],
            marker="s", linestyle="--", color="gray", label="annotated narrative")
    ax.set_xlabel("Iteration")
    ax.set_ylabel("Accuracy (%)")
    ax.set_xticks(iterations)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_cv_figure(folds: Sequence[tuple[str, float]], mean: float, path) -> None:
    fig, ax = plt.subplots(figsize=(max(4, 0.7 * len(folds)), 4))
    ids = [fid for fid, _ in folds]
    ys = [100 * acc for _, acc in folds]
    ax.bar(range(len(folds)), ys)
    ax.axhline(100 * mean, color="red", linestyle="--", label=f"mean {100 * mean:.1f}%")
    ax.set_xticks(range(len(folds)))
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("Accuracy (%)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
