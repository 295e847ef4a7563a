"""Dataset bundle IO.

A bundle is a directory of TSV files with 0-based integer node ids:

    edges.tsv      u<TAB>v, one undirected edge per line
    features.tsv   id<TAB>f0<TAB>f1...       (dense rows)
                   id<TAB>idx:val<TAB>...    (sparse rows, mixable per file)
    labels.tsv     id<TAB>class
    masks.tsv      id<TAB>{train|valid|test}   (optional, public splits)
    meta.tsv       key<TAB>value for n_nodes, n_features, n_classes
                   (optional, cross-checked when present)
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from sailor import sparse as sx
from sailor.graphs import AttributedGraph

log = logging.getLogger(__name__)

MASK_NAMES = ("train", "valid", "test")


class BundleError(Exception):
    """Raised for malformed or incomplete bundles."""


def _read_rows(path: Path) -> list[list[str]]:
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise BundleError(f"missing bundle file: {path}") from None
    rows = []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append(line.split("\t"))
    return rows


def _int(token: str, path: Path) -> int:
    try:
        return int(token)
    except ValueError:
        raise BundleError(f"{path}: expected an integer id, got {token!r}") from None


def _read_meta(bundle: Path) -> dict[str, int]:
    path = bundle / "meta.tsv"
    if not path.exists():
        return {}
    return {row[0]: _int(row[1], path) for row in _read_rows(path)}


def load_graph(bundle_path) -> AttributedGraph:
    """Load a bundle directory into an AttributedGraph. Duplicate edges are
    deduplicated; self-loops are dropped with a warning count."""
    bundle = Path(bundle_path)
    if not bundle.is_dir():
        raise BundleError(f"bundle directory not found: {bundle}")
    meta = _read_meta(bundle)

    label_rows = _read_rows(bundle / "labels.tsv")
    n_nodes = len(label_rows)
    if meta.get("n_nodes", n_nodes) != n_nodes:
        raise BundleError(f"meta says n_nodes={meta['n_nodes']} but labels.tsv has {n_nodes}")
    labels = np.full(n_nodes, -1, dtype=np.int64)
    for row in label_rows:
        if len(row) != 2:
            raise BundleError(f"labels.tsv: expected 'id<TAB>class', got {row}")
        i = _int(row[0], bundle / "labels.tsv")
        if not 0 <= i < n_nodes:
            raise BundleError(f"labels.tsv: node id {i} outside [0, {n_nodes})")
        labels[i] = _int(row[1], bundle / "labels.tsv")
    if np.any(labels < 0):
        raise BundleError("labels.tsv does not cover every node id in [0, n_nodes)")
    n_classes = meta.get("n_classes", int(labels.max()) + 1)
    if labels.max() >= n_classes:
        raise BundleError(f"label {labels.max()} out of range for n_classes={n_classes}")

    features = _read_features(bundle / "features.tsv", n_nodes, meta.get("n_features"))

    edge_rows = _read_rows(bundle / "edges.tsv")
    edges = []
    self_loops = 0
    for row in edge_rows:
        if len(row) != 2:
            raise BundleError(f"edges.tsv: expected 'u<TAB>v', got {row}")
        u = _int(row[0], bundle / "edges.tsv")
        v = _int(row[1], bundle / "edges.tsv")
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise BundleError(f"edges.tsv: endpoint ({u}, {v}) outside [0, {n_nodes})")
        if u == v:
            self_loops += 1
            continue
        edges.append((u, v))
    if self_loops:
        log.warning("dropped %d self-loop(s) from %s", self_loops, bundle / "edges.tsv")

    g = AttributedGraph(
        n_nodes=n_nodes,
        adjacency=sx.from_edges(n_nodes, edges),
        features=features,
        labels=labels,
        n_classes=n_classes,
    )
    g.validate()
    return g


def _read_features(path: Path, n_nodes: int, n_features: int | None) -> np.ndarray:
    rows = _read_rows(path)
    parsed: dict[int, tuple[str, list]] = {}
    width = n_features
    for row in rows:
        i = _int(row[0], path)
        if not 0 <= i < n_nodes:
            raise BundleError(f"features.tsv: node id {i} outside [0, {n_nodes})")
        body = row[1:]
        if not body or ":" in body[0]:
            entries = []
            for tok in body:
                idx_s, _, val_s = tok.partition(":")
                try:
                    entries.append((_int(idx_s, path), float(val_s)))
                except ValueError:
                    raise BundleError(
                        f"features.tsv: bad sparse entry {tok!r} for node {i}") from None
            parsed[i] = ("sparse", entries)
        else:
            try:
                dense = [float(tok) for tok in body]
            except ValueError:
                raise BundleError(f"features.tsv: non-numeric value in row for node {i}") from None
            if width is None:
                width = len(dense)
            elif len(dense) != width:
                raise BundleError(
                    f"features.tsv: ragged row for node {i}: {len(dense)} values, expected {width}")
            parsed[i] = ("dense", dense)
    if len(parsed) != n_nodes:
        raise BundleError(f"features.tsv covers {len(parsed)} of {n_nodes} nodes")
    if width is None:
        # purely sparse file without meta: width is the largest index + 1
        width = 1 + max((idx for kind, ent in parsed.values() if kind == "sparse"
                         for idx, _ in ent), default=-1)
    out = np.zeros((n_nodes, width), dtype=np.float64)
    for i, (kind, ent) in parsed.items():
        if kind == "sparse":
            for idx, val in ent:
                if not 0 <= idx < width:
                    raise BundleError(f"features.tsv: feature index {idx} outside [0, {width})")
                out[i, idx] = val
        else:
            out[i, :] = ent
    return out


def load_masks(bundle_path) -> dict[str, np.ndarray] | None:
    """Read masks.tsv if present; returns {train, valid, test} id arrays."""
    path = Path(bundle_path) / "masks.tsv"
    if not path.exists():
        return None
    buckets: dict[str, list[int]] = {name: [] for name in MASK_NAMES}
    for row in _read_rows(path):
        if len(row) != 2 or row[1] not in MASK_NAMES:
            raise BundleError(f"masks.tsv: expected 'id<TAB>{{train|valid|test}}', got {row}")
        buckets[row[1]].append(_int(row[0], path))
    return {name: np.asarray(sorted(ids), dtype=np.int64) for name, ids in buckets.items()}


def write_bundle(g: AttributedGraph, out_dir, masks: dict[str, np.ndarray] | None = None,
                 sparse_features: bool = True) -> Path:
    """Write a graph back out in the bundle format (edges stored once per
    undirected pair, canonical u < v order)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w") as fh:
        for u, v in sorted(sx.edge_set(g.adjacency)):
            fh.write(f"{u}\t{v}\n")
    with open(out / "labels.tsv", "w") as fh:
        for i, y in enumerate(g.labels):
            fh.write(f"{i}\t{y}\n")
    with open(out / "features.tsv", "w") as fh:
        for i in range(g.n_nodes):
            row = g.features[i]
            if sparse_features:
                toks = [f"{j}:{row[j]:.6g}" for j in np.flatnonzero(row)]
            else:
                toks = [f"{x:.6g}" for x in row]
            fh.write("\t".join([str(i)] + toks) + "\n")
    with open(out / "meta.tsv", "w") as fh:
        fh.write(f"n_nodes\t{g.n_nodes}\n")
        fh.write(f"n_features\t{g.n_features}\n")
        fh.write(f"n_classes\t{g.n_classes}\n")
    if masks:
        with open(out / "masks.tsv", "w") as fh:
            for name in MASK_NAMES:
                for i in masks[name]:
                    fh.write(f"{i}\t{name}\n")
    return out
