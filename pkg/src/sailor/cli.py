"""Command-line entry points.

Commands: analyze, train, eval, augment-report, sweep, demo-bundle.
Every command writes a manifest.json into its output directory before any
real work starts, with enough detail to replay the run. Tables are TSV,
metrics are JSON, and each report path also renders companion PNG figures.

Exit codes: 0 success, 1 validation error (bad bundle, config, checkpoint,
or shapes), 2 numeric failure during training.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

import sailor
from sailor import reporting as rep
from sailor.bundles import BundleError, load_graph, load_masks
from sailor.checkpoint import CheckpointError, check_graph_match, \
    load_checkpoint, save_checkpoint
from sailor.demo import write_demo_bundle
from sailor.graphs import AttributedGraph, make_splits, pareto_split, preprocess
from sailor.homophily import heterophily_report, homophily_cdf, per_node_homophily
from sailor.training import ConfigError, TrainConfig, TrainingDivergence, \
    evaluate, load_config, log_grid, predict_logits, rebuild_augmented, \
    sweep, train

_SPLIT_MODES = {"tail": "tail-protocol", "public": "public"}


def _write_manifest(out: Path, command: str, args_record: dict,
                    config: TrainConfig | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool_version": sailor.__version__,
        "command": command,
        "out": str(out),
        **args_record,
    }
    if config is not None:
        manifest["config"] = config.to_dict()
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_preprocessed(bundle: str) -> AttributedGraph:
    g = load_graph(bundle)
    before = g.n_nodes
    g = preprocess(g)
    if g.n_nodes != before:
        print(f"note: restricted to largest connected component "
              f"({before} -> {g.n_nodes} nodes)")
    return g


def _build_split(g: AttributedGraph, bundle: str, mode_flag: str, seed: int):
    mode = _SPLIT_MODES[mode_flag]
    partition = pareto_split(g)
    masks = load_masks(bundle) if mode == "public" else None
    split = make_splits(g, partition, mode, seed, masks=masks)
    return partition, split


def _write_metrics(path: Path, metrics: dict) -> None:
    path.write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


# ------------------------------------------------------------- commands

def cmd_analyze(args) -> int:
    out = Path(args.out)
    _write_manifest(out, "analyze", {"bundle": args.bundle})
    g = _load_preprocessed(args.bundle)
    partition = pareto_split(g)
    report = heterophily_report(g, partition)

    rep.write_tsv(out / "summary.tsv",
                  ["n_nodes", "n_edges", "n_features", "n_classes", "degree_threshold"],
                  [rep.partition_summary_row(g, partition)])
    rep.write_tsv(out / "degree_histogram.tsv", ["degree", "count"],
                  rep.degree_histogram_rows(g))
    rep.write_tsv(out / "heterophily.tsv",
                  ["group", "n_nodes", "total_heterophilic", "percent"],
                  rep.heterophily_rows(report, partition))
    hom = report.per_node_homophily
    curves = {
        "all": homophily_cdf(hom),
        "head": report.homophily_cdf["head"],
        "tail": report.homophily_cdf["tail"],
    }
    for name, cdf in curves.items():
        rep.write_tsv(out / f"homophily_cdf_{name}.tsv",
                      ["homophily", "cumulative"], rep.cdf_rows(cdf))
    rep.fig_degree_histogram(g, partition, out / "degree_histogram.png")
    rep.fig_homophily_cdfs(curves, out / "homophily_cdf.png")

    print(f"nodes={g.n_nodes} edges={g.n_edges} features={g.n_features} "
          f"classes={g.n_classes} degree_threshold={partition.degree_threshold}")
    print(f"total-heterophilic: head {report.head_total_het_count} "
          f"({100 * report.head_total_het_prop:.2f}%), "
          f"tail {report.tail_total_het_count} "
          f"({100 * report.tail_total_het_prop:.2f}%)")
    print(f"reports written to {out}")
    return 0


def _train_one_seed(bundle: str, cfg_dict: dict, split_flag: str,
                    out_dir: str) -> dict:
    """Worker for one seed; runs in its own process under --seeds."""
    cfg = TrainConfig(**cfg_dict)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = load_graph(bundle)
    g = preprocess(g)
    partition, split = _build_split(g, bundle, split_flag, cfg.seed)
    result = train(g, partition, split, cfg)

    with open(out / "epochs.jsonl", "w", encoding="utf-8") as fh:
        for record in result.logs:
            fh.write(record.to_json() + "\n")
    save_checkpoint(out / "checkpoint.bin", result, g)
    metrics = evaluate(result.gnn, result.augmentor, g, split, result.config,
                       result.sample_seed)
    metrics["best_epoch"] = result.best_epoch
    metrics["best_valid_accuracy"] = result.best_valid_accuracy
    metrics["epochs_run"] = len(result.logs)
    _write_metrics(out / "metrics.json", metrics)
    if result.augmentor is not None:
        aug_graph = rebuild_augmented(result.augmentor, g, result.config,
                                      result.sample_seed)
        rep.write_tsv(out / "added_edges.tsv", ["u", "v", "epoch"],
                      rep.added_edge_rows(aug_graph.added_edges,
                                          result.best_epoch))
    rep.fig_training_curves(result.logs, out / "training_curves.png")
    return metrics


def cmd_train(args) -> int:
    out = Path(args.out)
    config = load_config(args.config, args.set)
    if args.ablation:
        config = dataclasses.replace(config, ablation=args.ablation)
    seeds = args.seeds if args.seeds else [args.seed if args.seed is not None
                                           else config.seed]
    config.validate()
    _write_manifest(out, "train",
                    {"bundle": args.bundle, "split": args.split,
                     "seeds": list(seeds)}, config=config)

    if len(seeds) == 1:
        cfg = dataclasses.replace(config, seed=seeds[0])
        metrics = _train_one_seed(args.bundle, cfg.to_dict(), args.split, str(out))
        print(f"test accuracy {metrics['test_accuracy']:.4f}, "
              f"weighted F1 {metrics['test_weighted_f1']:.4f} "
              f"(best epoch {metrics['best_epoch']})")
        print(f"artifacts written to {out}")
        return 0

    jobs = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=min(len(seeds), 4)) as pool:
        for s in seeds:
            cfg = dataclasses.replace(config, seed=int(s))
            jobs.append((s, pool.submit(_train_one_seed, args.bundle,
                                        cfg.to_dict(), args.split,
                                        str(out / f"seed_{s}"))))
        per_seed = {str(s): job.result() for s, job in jobs}
    accs = [m["test_accuracy"] for m in per_seed.values()]
    f1s = [m["test_weighted_f1"] for m in per_seed.values()]
    summary = {
        "per_seed": per_seed,
        "mean_test_accuracy": float(np.mean(accs)),
        "std_test_accuracy": float(np.std(accs)),
        "mean_test_weighted_f1": float(np.mean(f1s)),
        "std_test_weighted_f1": float(np.std(f1s)),
        "n_seeds": len(seeds),
    }
    _write_metrics(out / "summary.json", summary)
    print(f"mean test accuracy over {len(seeds)} seeds: "
          f"{summary['mean_test_accuracy']:.4f} "
          f"± {summary['std_test_accuracy']:.4f}")
    print(f"artifacts written to {out}")
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    _write_manifest(out, "eval", {"bundle": args.bundle,
                                  "checkpoint": args.checkpoint,
                                  "split": args.split})
    gnn, aug, config, sidecar = load_checkpoint(args.checkpoint)
    g = _load_preprocessed(args.bundle)
    check_graph_match(sidecar, g)
    _, split = _build_split(g, args.bundle, args.split, config.seed)
    metrics = evaluate(gnn, aug, g, split, config, sidecar["sample_seed"])
    _write_metrics(out / "metrics.json", metrics)

    logits, _ = predict_logits(gnn, aug, g, config, sidecar["sample_seed"])
    header = ["node", "predicted"] + [f"prob_{c}" for c in range(g.n_classes)]
    rep.write_tsv(out / "predictions.tsv", header, rep.prediction_rows(logits))

    for key in sorted(metrics):
        print(f"{key}\t{rep.fmt(metrics[key])}")
    print(f"reports written to {out}")
    return 0


def cmd_augment_report(args) -> int:
    out = Path(args.out)
    _write_manifest(out, "augment-report", {"bundle": args.bundle,
                                            "checkpoint": args.checkpoint})
    gnn, aug, config, sidecar = load_checkpoint(args.checkpoint)
    if aug is None:
        raise CheckpointError("checkpoint holds a plain classifier; "
                              "there is no augmentor to report on")
    g = _load_preprocessed(args.bundle)
    check_graph_match(sidecar, g)
    partition = pareto_split(g)
    aug_graph = rebuild_augmented(aug, g, config, sidecar["sample_seed"])
    g2 = AttributedGraph(n_nodes=g.n_nodes, adjacency=aug_graph.adjacency,
                         features=g.features, labels=g.labels,
                         n_classes=g.n_classes)

    hom_orig = per_node_homophily(g)
    hom_aug = per_node_homophily(g2)
    cdf_orig = homophily_cdf(hom_orig)
    cdf_aug = homophily_cdf(hom_aug)
    rep.write_tsv(out / "homophily_cdf_compare.tsv",
                  ["homophily", "cdf_original", "cdf_augmented"],
                  rep.paired_cdf_rows(cdf_orig, cdf_aug))
    het_orig = int(np.sum(hom_orig == 0.0))
    het_aug = int(np.sum(hom_aug == 0.0))
    rep.write_tsv(out / "total_heterophily_compare.tsv",
                  ["graph", "total_heterophilic", "n_nodes", "n_edges"],
                  [("original", het_orig, g.n_nodes, g.n_edges),
                   ("augmented", het_aug, g2.n_nodes, g2.n_edges)])
    rep.write_tsv(out / "added_edges.tsv", ["u", "v", "epoch"],
                  rep.added_edge_rows(aug_graph.added_edges,
                                      sidecar["best_epoch"]))
    rep.fig_homophily_cdfs({"original": cdf_orig, "augmented": cdf_aug},
                           out / "homophily_cdf_compare.png",
                           title="homophily before/after augmentation")

    print(f"added edges: {len(aug_graph.added_edges)} "
          f"(all touch tail nodes; threshold {partition.degree_threshold})")
    print(f"total-heterophilic nodes: original {het_orig}, augmented {het_aug}")
    print(f"reports written to {out}")
    return 0


def cmd_sweep(args) -> int:
    out = Path(args.out)
    config = load_config(args.config, args.set)
    if args.values:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    else:
        lo, hi, n = args.log_grid
        values = log_grid(float(lo), float(hi), int(n))
    seeds = args.seeds if args.seeds else [config.seed]
    _write_manifest(out, "sweep",
                    {"bundle": args.bundle, "param": args.param,
                     "values": values, "seeds": list(seeds),
                     "split": args.split}, config=config)
    g = _load_preprocessed(args.bundle)
    partition, split = _build_split(g, args.bundle, args.split, config.seed)
    rows = sweep(g, partition, split, config, args.param, values,
                 [int(s) for s in seeds])
    rep.write_tsv(out / "sweep.tsv",
                  ["value", "mean_accuracy", "std_accuracy", "mean_f1",
                   "std_f1", "n_seeds"],
                  rep.sweep_rows(rows))
    rep.fig_sweep(rows, args.param, out / "sweep.png")
    for r in rows:
        print(f"{args.param}={r.value:.6g}\taccuracy "
              f"{r.mean_accuracy:.4f} ± {r.std_accuracy:.4f}")
    print(f"reports written to {out}")
    return 0


def cmd_demo_bundle(args) -> int:
    path = write_demo_bundle(args.out, n_nodes=args.nodes,
                             n_classes=args.classes, seed=args.seed)
    print(f"demo bundle written to {path}")
    return 0


# --------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for numeric
    failures, so usage problems become ConfigError -> exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sailor",
        description="Tail-node structure augmentation for graph classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, bundle=True, config=False, checkpoint=False):
        if bundle:
            p.add_argument("--bundle", required=True, help="bundle directory")
        if config:
            p.add_argument("--config", default=None,
                           help="key=value config file")
            p.add_argument("--set", action="append", default=[],
                           metavar="KEY=VALUE", help="config override")
        if checkpoint:
            p.add_argument("--checkpoint", required=True,
                           help="checkpoint binary written by train")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("analyze", help="degree/homophily diagnostics")
    add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="joint augmentor + classifier training")
    add_common(p, config=True)
    p.add_argument("--seed", type=int, default=None, help="single run seed")
    p.add_argument("--seeds", type=int, nargs="+", default=None,
                   help="multiple seeds, one process each")
    p.add_argument("--split", choices=sorted(_SPLIT_MODES), default="tail")
    p.add_argument("--ablation", choices=["no-aug-loss", "no-prop", "no-align"],
                   default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a bundle")
    add_common(p, checkpoint=True)
    p.add_argument("--split", choices=sorted(_SPLIT_MODES), default="tail")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment-report",
                       help="homophily before/after augmentation")
    add_common(p, checkpoint=True)
    p.set_defaults(func=cmd_augment_report)

    p = sub.add_parser("sweep", help="1-D hyperparameter grid")
    add_common(p, config=True)
    p.add_argument("--param", required=True, help="config field to sweep")
    p.add_argument("--values", default=None,
                   help="comma-separated grid values")
    p.add_argument("--log-grid", nargs=3, metavar=("LO", "HI", "N"),
                   default=None, help="log-spaced grid endpoints and size")
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--split", choices=sorted(_SPLIT_MODES), default="tail")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo-bundle", help="write a synthetic demo bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", type=int, default=300)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_demo_bundle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", "") == "sweep" \
                and bool(args.values) == bool(args.log_grid):
            raise ConfigError("sweep needs exactly one of --values or --log-grid")
        return args.func(args)
    except TrainingDivergence as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (BundleError, ConfigError, CheckpointError, ValueError,
            FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
