"""Delimited report files and companion figures.

Every table is TSV with a header row and numbers at 6 significant digits.
Figures are rendered headlessly next to the tables they visualize; the
TSVs stay the source of truth.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from sailor.graphs import AttributedGraph, NodePartition, degrees
from sailor.homophily import HomophilyReport
from sailor.losses import softmax_np
from sailor.training import EpochLog, SweepRow


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    return str(x)


def write_tsv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------- tables

def degree_histogram_rows(g: AttributedGraph) -> list[tuple[int, int]]:
    deg = degrees(g)
    values, counts = np.unique(deg, return_counts=True)
    return [(int(d), int(c)) for d, c in zip(values, counts)]


def partition_summary_row(g: AttributedGraph, partition: NodePartition) -> tuple:
    return (g.n_nodes, g.n_edges, g.n_features, g.n_classes,
            partition.degree_threshold)


def heterophily_rows(report: HomophilyReport,
                     partition: NodePartition) -> list[tuple]:
    return [
        ("head", int(partition.head_nodes.size), report.head_total_het_count,
         100.0 * report.head_total_het_prop),
        ("tail", int(partition.tail_nodes.size), report.tail_total_het_count,
         100.0 * report.tail_total_het_prop),
    ]


def cdf_rows(cdf: list[tuple[float, float]]) -> list[tuple[float, float]]:
    return [(float(x), float(y)) for x, y in cdf]


def paired_cdf_rows(original: list[tuple[float, float]],
                    augmented: list[tuple[float, float]]):
    """Evaluate both step functions on the union of their breakpoints."""
    from sailor.homophily import cdf_at
    xs = sorted({x for x, _ in original} | {x for x, _ in augmented})
    return [(x, cdf_at(original, x), cdf_at(augmented, x)) for x in xs]


def prediction_rows(logits: np.ndarray):
    probs = softmax_np(np.asarray(logits, dtype=np.float64))
    pred = np.argmax(probs, axis=1)
    for v in range(probs.shape[0]):
        yield (v, int(pred[v]), *probs[v])


def sweep_rows(rows: list[SweepRow]) -> list[tuple]:
    return [(r.value, r.mean_accuracy, r.std_accuracy, r.mean_f1, r.std_f1,
             r.n_seeds) for r in rows]


def added_edge_rows(edges: list[tuple[int, int]], epoch: int):
    return [(u, v, epoch) for u, v in edges]


# --------------------------------------------------------------- figures

def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def fig_degree_histogram(g: AttributedGraph, partition: NodePartition,
                         path: str | Path) -> Path:
    rows = degree_histogram_rows(g)
    deg = [d for d, _ in rows]
    cnt = [c for _, c in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.scatter(deg, cnt, s=12, color="tab:blue")
    ax.axvline(partition.degree_threshold + 0.5, color="tab:red", lw=1,
               ls="--", label=f"tail/head threshold = {partition.degree_threshold}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("degree")
    ax.set_ylabel("node count")
    ax.legend(fontsize=8)
    return _save(fig, path)


def fig_homophily_cdfs(curves: dict[str, list[tuple[float, float]]],
                       path: str | Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, cdf in curves.items():
        if not cdf:
            continue
        xs = [x for x, _ in cdf]
        ys = [y for _, y in cdf]
        ax.step([0.0] + xs, [0.0] + ys, where="post", label=label)
    ax.set_xlabel("node homophily")
    ax.set_ylabel("cumulative fraction of nodes")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(0, 1.05)
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)


def fig_sweep(rows: list[SweepRow], param: str, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [r.value for r in rows]
    ax.errorbar(xs, [r.mean_accuracy for r in rows],
                yerr=[r.std_accuracy for r in rows],
                marker="o", capsize=3, label="accuracy")
    ax.errorbar(xs, [r.mean_f1 for r in rows],
                yerr=[r.std_f1 for r in rows],
                marker="s", capsize=3, label="weighted F1")
    if min(xs) > 0:
        ax.set_xscale("log")
    ax.set_xlabel(param)
    ax.set_ylabel("test metric")
    ax.legend(fontsize=8)
    return _save(fig, path)


def fig_training_curves(logs: list[EpochLog], path: str | Path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    epochs = [r.epoch for r in logs]
    for key, label in (("l_sup", "supervised"), ("l_aug", "reconstruction"),
                       ("l_p", "propagation"), ("l_ali", "alignment")):
        series = [getattr(r, key) for r in logs]
        if any(v != 0.0 for v in series):
            ax1.plot(epochs, series, label=label, lw=1)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend(fontsize=8)
    ax2.plot(epochs, [r.valid_accuracy for r in logs], color="tab:green", lw=1)
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation accuracy")
    fig.tight_layout()
    return _save(fig, path)
