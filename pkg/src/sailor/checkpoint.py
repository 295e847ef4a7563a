"""Parameter checkpoints.

Binary layout: 8-byte magic, uint32 format version, uint64 index length,
UTF-8 JSON index mapping parameter name -> {shape, offset, size} (offsets
in bytes into the payload), then the payload of little-endian float64
arrays in C order. A JSON sidecar next to the binary records the config,
the best epoch, the stored sampling seed, and a graph fingerprint so a
checkpoint cannot silently be evaluated against the wrong bundle.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from sailor.augmentor import AugmentorParams
from sailor.gcn import GnnParams
from sailor.graphs import AttributedGraph
from sailor.training import TrainConfig, TrainResult, augmentor_from_arrays, \
    gnn_from_arrays

MAGIC = b"SAILCKPT"
VERSION = 1


class CheckpointError(RuntimeError):
    """Corrupt, truncated, or mismatched checkpoint."""


def graph_fingerprint(g: AttributedGraph) -> dict:
    return {
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "n_features": g.n_features,
        "n_classes": g.n_classes,
    }


def _named_arrays(gnn: GnnParams, aug: AugmentorParams | None) -> dict[str, np.ndarray]:
    out = {name: p.value for name, p in gnn.named().items()}
    if aug is not None:
        out.update({name: p.value for name, p in aug.named().items()})
    return out


def save_checkpoint(path: str | Path, result: TrainResult,
                    g: AttributedGraph) -> Path:
    """Write the binary parameter file and its .json sidecar; returns the
    binary path."""
    path = Path(path)
    arrays = _named_arrays(result.gnn, result.augmentor)
    index: dict[str, dict] = {}
    offset = 0
    chunks: list[bytes] = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        raw = arr.tobytes()
        index[name] = {"shape": list(arr.shape), "offset": offset, "size": len(raw)}
        chunks.append(raw)
        offset += len(raw)
    index_bytes = json.dumps(index, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(index_bytes)))
        fh.write(index_bytes)
        for raw in chunks:
            fh.write(raw)
    sidecar = {
        "format_version": VERSION,
        "config": result.config.to_dict(),
        "best_epoch": result.best_epoch,
        "best_valid_accuracy": result.best_valid_accuracy,
        "sample_seed": result.sample_seed,
        "graph": graph_fingerprint(g),
    }
    sidecar_path(path).write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def load_checkpoint(path: str | Path):
    """Returns (GnnParams, AugmentorParams or None, TrainConfig, sidecar dict)."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if len(blob) < len(MAGIC) + 12:
        raise CheckpointError(f"{path}: file too short to hold a header")
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    (index_len,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if pos + index_len > len(blob):
        raise CheckpointError(f"{path}: truncated index")
    try:
        index = json.loads(blob[pos:pos + index_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable index ({exc})")
    payload = blob[pos + index_len:]
    arrays: dict[str, np.ndarray] = {}
    for name, entry in index.items():
        off, size, shape = entry["offset"], entry["size"], tuple(entry["shape"])
        if off + size > len(payload):
            raise CheckpointError(f"{path}: payload truncated at '{name}'")
        arr = np.frombuffer(payload[off:off + size], dtype="<f8")
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"{path}: size/shape mismatch at '{name}'")
        arrays[name] = arr.reshape(shape).astype(np.float64)

    sc_path = sidecar_path(path)
    if not sc_path.exists():
        raise CheckpointError(f"missing sidecar {sc_path}")
    sidecar = json.loads(sc_path.read_text(encoding="utf-8"))
    config = TrainConfig(**sidecar["config"])

    gnn_arrays = {k: v for k, v in arrays.items() if k.startswith("gnn.")}
    aug_arrays = {k: v for k, v in arrays.items() if k.startswith("aug.")}
    if not gnn_arrays:
        raise CheckpointError(f"{path}: no classifier parameters present")
    gnn = gnn_from_arrays(gnn_arrays)
    aug = augmentor_from_arrays(aug_arrays) if aug_arrays else None
    return gnn, aug, config, sidecar


def check_graph_match(sidecar: dict, g: AttributedGraph) -> None:
    stored = sidecar.get("graph", {})
    actual = graph_fingerprint(g)
    if stored != actual:
        raise CheckpointError(
            f"checkpoint was trained on a different graph: stored {stored}, "
            f"bundle has {actual}")
