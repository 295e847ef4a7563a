"""Joint optimization of the augmentor and the classifier.

Each epoch: build P2 from the current augmentor, Bernoulli-sample an
augmented adjacency for the tail nodes, take one classifier step on it,
then one augmentor step against the three weighted constraint losses.
Early stopping tracks validation accuracy. The best snapshot keeps the
classifier weights after that epoch's update together with the augmentor
state that generated that epoch's augmented graph, so evaluation can
rebuild the exact adjacency from the stored sampling seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, fields

import numpy as np

from sailor import autodiff as ad
from sailor import sparse as sx
from sailor.augmentor import AugmentedGraph, AugmentorParams, forge_tails, \
    fused_embeddings, loss_aug, loss_ali, loss_p, sample_augmented_edges
from sailor.autodiff import Parameter, Tape
from sailor.gcn import GnnParams, accuracy, gcn_forward, loss_sup, weighted_f1
from sailor.graphs import AttributedGraph, DatasetSplit, NodePartition, pareto_split


class ConfigError(ValueError):
    """Bad configuration key, value, or combination."""


class TrainingDivergence(RuntimeError):
    """A loss went non-finite; carries the epoch for context."""

    def __init__(self, epoch: int, what: str):
        super().__init__(f"non-finite {what} at epoch {epoch}")
        self.epoch = epoch


_ABLATIONS = {
    "": {},
    "no-aug-loss": {"beta": 0.0},
    "no-prop": {"eta": 0.0},
    "no-align": {"delta": 0.0},
}


@dataclass(frozen=True)
class TrainConfig:
    """Flat run configuration. Loss weights alpha (supervised), beta
    (reconstruction), eta (propagation), delta (alignment); delta_drop is
    the forged-edge fraction. Everything else is plumbing."""

    alpha: float = 1.0
    beta: float = 0.1
    eta: float = 0.1
    delta: float = 0.1
    delta_drop: float = 0.5
    lr_g: float = 0.01
    lr_a: float = 0.01
    batch: int = 512
    max_epochs: int = 1000
    patience: int = 100
    seed: int = 0
    ablation: str = ""
    model: str = "sailor"
    optimizer: str = "adam"
    activation: str = "relu"
    dropout: float = 0.5
    hidden_gnn: int = 64
    hidden_aug: int = 32
    layers_gnn: int = 2
    layers_aug: int = 2
    rounds: int = 1
    reforge_every: int = 0

    def validate(self) -> None:
        for key in ("alpha", "beta", "eta", "delta"):
            if getattr(self, key) < 0:
                raise ConfigError(f"loss weight '{key}' must be >= 0")
        if not 0.0 <= self.delta_drop < 1.0:
            raise ConfigError("'delta_drop' must be in [0, 1)")
        if self.lr_g <= 0 or self.lr_a <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch < 1:
            raise ConfigError("'batch' must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("'max_epochs' must be >= 1")
        if not 1 <= self.patience <= self.max_epochs:
            raise ConfigError("'patience' must satisfy 1 <= patience <= max_epochs")
        if self.ablation not in _ABLATIONS:
            raise ConfigError(f"unknown ablation '{self.ablation}' "
                              f"(choose from {sorted(k for k in _ABLATIONS if k)})")
        if self.model not in ("sailor", "gcn"):
            raise ConfigError(f"unknown model '{self.model}' (sailor or gcn)")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}' (adam or sgd)")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"unknown activation '{self.activation}' (relu or tanh)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("'dropout' must be in [0, 1)")
        if self.hidden_gnn < 1 or self.hidden_aug < 1:
            raise ConfigError("hidden widths must be >= 1")
        if self.layers_gnn < 1 or self.layers_aug < 1:
            raise ConfigError("layer counts must be >= 1")
        if self.rounds < 1:
            raise ConfigError("'rounds' must be >= 1")
        if self.reforge_every < 0:
            raise ConfigError("'reforge_every' must be >= 0")

    def resolved(self) -> "TrainConfig":
        """Config with the ablation flag folded into the loss weights."""
        self.validate()
        return dataclasses.replace(self, **_ABLATIONS[self.ablation])

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "TrainConfig":
        """Build from string key=value pairs with per-field type coercion."""
        coerced = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in mapping.items():
            if key not in types:
                raise ConfigError(f"unknown config key '{key}'")
            kind = types[key]
            try:
                if kind == "int":
                    coerced[key] = int(raw)
                elif kind == "float":
                    coerced[key] = float(raw)
                else:
                    coerced[key] = str(raw)
            except ValueError:
                raise ConfigError(f"config key '{key}' expects {kind}, got '{raw}'")
        cfg = cls(**coerced)
        cfg.validate()
        return cfg


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got '{line}'")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def parse_overrides(items: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not key=value")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | None = None,
                overrides: list[str] | None = None) -> TrainConfig:
    mapping = parse_config_file(path) if path else {}
    if overrides:
        mapping.update(parse_overrides(overrides))
    return TrainConfig.from_mapping(mapping)


@dataclass
class EpochLog:
    epoch: int
    l_sup: float
    l_aug: float
    l_p: float
    l_ali: float
    added_edge_count: int
    valid_accuracy: float
    wall_time: float

    def to_json(self) -> str:
        # wall_time is the one machine-dependent field; everything else is
        # deterministic for a fixed (config, bundle)
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


@dataclass
class TrainResult:
    gnn: GnnParams
    augmentor: AugmentorParams | None
    logs: list[EpochLog]
    best_epoch: int
    best_valid_accuracy: float
    sample_seed: int
    config: TrainConfig


def _zero_grads(params: list[Parameter]) -> None:
    for p in params:
        p.grad[...] = 0.0


def _sample_seed(seed: int, epoch: int) -> int:
    """Per-epoch edge-sampling seed, stable given the run seed."""
    return int(np.random.SeedSequence((seed, 0xA2, epoch)).generate_state(1)[0])


def _forge_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence((seed, 0xF0, epoch)).generate_state(1)[0])


def _eval_logits(g: AttributedGraph, gnn: GnnParams, adj_norm,
                 activation: str) -> np.ndarray:
    tape = Tape()
    return gcn_forward(tape, adj_norm, g.features_csr(), gnn,
                       training=False, activation=activation).value


def compute_p2(g: AttributedGraph, params: AugmentorParams, adj_norm,
               activation: str = "relu") -> np.ndarray:
    """Evaluation-mode P2 (deterministic: mean-mode encoder, no noise)."""
    tape = Tape()
    return fused_embeddings(tape, g, adj_norm, params, activation=activation).value


def _snapshot(named: dict[str, Parameter]) -> dict[str, np.ndarray]:
    return {k: p.value.copy() for k, p in named.items()}


def gnn_from_arrays(snap: dict[str, np.ndarray]) -> GnnParams:
    layers = [Parameter(snap[f"gnn.layer{i}"])
              for i in range(sum(1 for k in snap if k.startswith("gnn.layer")))]
    return GnnParams(layers=layers)


def augmentor_from_arrays(snap: dict[str, np.ndarray]) -> AugmentorParams:
    n_layers = sum(1 for k in snap if k.startswith("aug.layer"))
    return AugmentorParams(
        encoder_layers=[Parameter(snap[f"aug.layer{i}"]) for i in range(n_layers)],
        mu_head=Parameter(snap["aug.mu_head"]),
        sigma_head=Parameter(snap["aug.sigma_head"]),
        eps_raw=Parameter(snap["aug.eps_raw"]),
    )


def train(g: AttributedGraph, partition: NodePartition, split: DatasetSplit,
          config: TrainConfig) -> TrainResult:
    """Run the joint loop and return the best-validation snapshots along
    with the per-epoch log. Fully deterministic given config.seed."""
    cfg = config.resolved()
    if partition.tail_nodes.size == 0:
        raise ValueError("empty tail set: nothing to augment")
    if split.train.size == 0 or split.valid.size == 0:
        raise ValueError("train and validation splits must be nonempty")

    streams = np.random.SeedSequence(cfg.seed).spawn(4)
    rng_init_gnn = np.random.default_rng(streams[0])
    rng_init_aug = np.random.default_rng(streams[1])
    rng_noise = np.random.default_rng(streams[2])
    rng_dropout = np.random.default_rng(streams[3])

    x = g.features_csr()
    a_norm = sx.normalize_adjacency(g.adjacency)
    gnn = GnnParams.init(g.n_features, g.n_classes, rng_init_gnn,
                         hidden=cfg.hidden_gnn, n_layers=cfg.layers_gnn)
    step = ad.adam_step if cfg.optimizer == "adam" else ad.sgd_step

    sailor_mode = cfg.model == "sailor"
    aug = forged = a1_norm = None
    if sailor_mode:
        aug = AugmentorParams.init(g.n_nodes, g.n_features, g.n_classes,
                                   rng_init_aug, hidden=cfg.hidden_aug,
                                   n_layers=cfg.layers_aug)
        forged = forge_tails(g, partition, cfg.delta_drop, seed=cfg.seed)
        a1_norm = sx.normalize_adjacency(forged.adjacency)

    logs: list[EpochLog] = []
    best_acc = -1.0
    best_epoch = 0
    best_seed = -1
    best_gnn: dict[str, np.ndarray] = {}
    best_aug: dict[str, np.ndarray] = {}
    stale = 0

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()

        if sailor_mode and cfg.reforge_every and epoch > 1 \
                and (epoch - 1) % cfg.reforge_every == 0:
            forged = forge_tails(g, partition, cfg.delta_drop,
                                 seed=_forge_seed(cfg.seed, epoch))
            a1_norm = sx.normalize_adjacency(forged.adjacency)

        if sailor_mode:
            # pre-update P2 drives this epoch's sampling; snapshot the
            # matching augmentor state so evaluation can rebuild A2
            p2_val = compute_p2(g, aug, a_norm, cfg.activation)
            seed_e = _sample_seed(cfg.seed, epoch)
            aug_graph = sample_augmented_edges(p2_val, g, partition,
                                               cfg.batch, seed_e,
                                               rounds=cfg.rounds)
            a2 = aug_graph.adjacency
            a2_norm = sx.normalize_adjacency(a2)
            added = len(aug_graph.added_edges)
            aug_state = _snapshot(aug.named())
        else:
            a2, a2_norm, added, seed_e, aug_state = g.adjacency, a_norm, 0, -1, {}

        tape = Tape()
        logits = gcn_forward(tape, a2_norm, x, gnn, training=True,
                             dropout_rate=cfg.dropout, rng=rng_dropout,
                             activation=cfg.activation)
        l_sup = loss_sup(tape, logits, g.labels, split.train)
        l_sup_val = float(l_sup.value)
        if not math.isfinite(l_sup_val):
            raise TrainingDivergence(epoch, "supervised loss")
        if cfg.alpha > 0:
            tape.backward(ad.scale(tape, l_sup, cfg.alpha))
            step(gnn.parameters(), cfg.lr_g)
            _zero_grads(gnn.parameters())

        l_aug_val = l_p_val = l_ali_val = 0.0
        if sailor_mode:
            tape2 = Tape()
            terms = []
            if cfg.beta > 0:
                la = loss_aug(tape2, g, forged, aug, rng=rng_noise,
                              batch_size=cfg.batch, activation=cfg.activation,
                              a1_norm=a1_norm)
                l_aug_val = float(la.value)
                terms.append(ad.scale(tape2, la, cfg.beta))
            if cfg.eta > 0:
                lp, _ = loss_p(tape2, g, a_norm, aug, split.train,
                               activation=cfg.activation)
                l_p_val = float(lp.value)
                terms.append(ad.scale(tape2, lp, cfg.eta))
            if cfg.delta > 0:
                z2 = _eval_logits(g, gnn, a2_norm, cfg.activation)
                lali = loss_ali(tape2, a2, g, aug, z2, rng=rng_noise,
                                activation=cfg.activation, a2_norm=a2_norm)
                l_ali_val = float(lali.value)
                terms.append(ad.scale(tape2, lali, cfg.delta))
            for name, v in (("reconstruction loss", l_aug_val),
                            ("propagation loss", l_p_val),
                            ("alignment loss", l_ali_val)):
                if not math.isfinite(v):
                    raise TrainingDivergence(epoch, name)
            if terms:
                total = terms[0]
                for t in terms[1:]:
                    total = ad.add(tape2, total, t)
                tape2.backward(total)
                step(aug.parameters(), cfg.lr_a)
                _zero_grads(aug.parameters())

        v_logits = _eval_logits(g, gnn, a2_norm, cfg.activation)
        v_acc = accuracy(v_logits, g.labels, split.valid)
        logs.append(EpochLog(epoch=epoch, l_sup=l_sup_val, l_aug=l_aug_val,
                             l_p=l_p_val, l_ali=l_ali_val,
                             added_edge_count=added, valid_accuracy=v_acc,
                             wall_time=time.perf_counter() - t0))

        if v_acc > best_acc:
            best_acc = v_acc
            best_epoch = epoch
            best_seed = seed_e
            best_gnn = _snapshot(gnn.named())
            best_aug = aug_state
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    return TrainResult(
        gnn=gnn_from_arrays(best_gnn),
        augmentor=augmentor_from_arrays(best_aug) if sailor_mode else None,
        logs=logs,
        best_epoch=best_epoch,
        best_valid_accuracy=best_acc,
        sample_seed=best_seed,
        config=cfg,
    )


def rebuild_augmented(aug_params: AugmentorParams, g: AttributedGraph,
                      config: TrainConfig, seed: int) -> AugmentedGraph:
    """Regenerate the augmented graph a snapshot saw: deterministic P2 from
    the stored augmentor state, then the stored sampling seed."""
    cfg = config.resolved()
    a_norm = sx.normalize_adjacency(g.adjacency)
    p2 = compute_p2(g, aug_params, a_norm, cfg.activation)
    partition = pareto_split(g)
    return sample_augmented_edges(p2, g, partition, cfg.batch, seed,
                                  rounds=cfg.rounds)


def _check_shapes(gnn_params: GnnParams, aug_params: AugmentorParams | None,
                  g: AttributedGraph) -> None:
    w0 = gnn_params.layers[0].value
    if w0.shape[0] != g.n_features:
        raise ValueError(f"classifier expects {w0.shape[0]} features, "
                         f"graph has {g.n_features}")
    if gnn_params.layers[-1].value.shape[1] != g.n_classes:
        raise ValueError("classifier output width does not match n_classes")
    if aug_params is not None:
        if aug_params.encoder_layers[0].value.shape[0] != g.n_features:
            raise ValueError("augmentor feature width does not match the graph")
        if aug_params.eps_raw.value.shape[0] != g.n_nodes:
            raise ValueError("augmentor structure weights do not match n_nodes")


def predict_logits(gnn_params: GnnParams, aug_params: AugmentorParams | None,
                   g: AttributedGraph, config: TrainConfig, seed: int):
    """Rebuild the evaluation adjacency and run the classifier once.
    Returns (logits, AugmentedGraph or None)."""
    cfg = config.resolved()
    _check_shapes(gnn_params, aug_params, g)
    if cfg.model == "gcn" or aug_params is None:
        a2_norm = sx.normalize_adjacency(g.adjacency)
        return _eval_logits(g, gnn_params, a2_norm, cfg.activation), None
    aug_graph = rebuild_augmented(aug_params, g, cfg, seed)
    a2_norm = sx.normalize_adjacency(aug_graph.adjacency)
    return _eval_logits(g, gnn_params, a2_norm, cfg.activation), aug_graph


def evaluate(gnn_params: GnnParams, aug_params: AugmentorParams | None,
             g: AttributedGraph, split: DatasetSplit, config: TrainConfig,
             seed: int) -> dict:
    """Metrics on the test split; public-protocol splits additionally get a
    head/tail breakdown of the test nodes."""
    logits, aug_graph = predict_logits(gnn_params, aug_params, g, config, seed)
    metrics: dict = {
        "test_accuracy": accuracy(logits, g.labels, split.test),
        "test_weighted_f1": weighted_f1(logits, g.labels, split.test),
        "n_test": int(split.test.size),
        "added_edges": 0 if aug_graph is None else len(aug_graph.added_edges),
    }
    if split.mode == "public":
        partition = pareto_split(g)
        tail = np.intersect1d(split.test, partition.tail_nodes)
        head = np.intersect1d(split.test, partition.head_nodes)
        if head.size:
            metrics["head_accuracy"] = accuracy(logits, g.labels, head)
            metrics["head_weighted_f1"] = weighted_f1(logits, g.labels, head)
            metrics["n_head"] = int(head.size)
        if tail.size:
            metrics["tail_accuracy"] = accuracy(logits, g.labels, tail)
            metrics["tail_weighted_f1"] = weighted_f1(logits, g.labels, tail)
            metrics["n_tail"] = int(tail.size)
    return metrics


def log_grid(low: float, high: float, count: int) -> list[float]:
    """count points evenly spaced in log10 between low and high inclusive."""
    if low <= 0 or high <= 0:
        raise ValueError("log grid endpoints must be positive")
    if count < 1:
        raise ValueError("log grid needs at least one point")
    if count == 1:
        return [low]
    return [float(v) for v in np.logspace(math.log10(low), math.log10(high), count)]


@dataclass
class SweepRow:
    value: float
    mean_accuracy: float
    std_accuracy: float
    mean_f1: float
    std_f1: float
    n_seeds: int


_SWEEPABLE = {"alpha", "beta", "eta", "delta", "delta_drop", "lr_g", "lr_a",
              "dropout", "batch", "rounds", "hidden_gnn", "hidden_aug"}


def sweep(g: AttributedGraph, partition: NodePartition, split: DatasetSplit,
          base_config: TrainConfig, param: str, values: list[float],
          seeds: list[int]) -> list[SweepRow]:
    """Train and evaluate at each grid value for each seed; one aggregate
    row per value (mean and population std over seeds)."""
    if not values:
        raise ValueError("empty sweep grid")
    if not seeds:
        raise ValueError("sweep needs at least one seed")
    if param not in _SWEEPABLE:
        raise ConfigError(f"'{param}' is not a sweepable hyperparameter "
                          f"(choose from {sorted(_SWEEPABLE)})")
    is_int = {f.name: f.type == "int" for f in fields(TrainConfig)}[param]
    rows: list[SweepRow] = []
    for value in values:
        cast = int(value) if is_int else float(value)
        accs, f1s = [], []
        for s in seeds:
            cfg = dataclasses.replace(base_config, **{param: cast}, seed=int(s))
            result = train(g, partition, split, cfg)
            m = evaluate(result.gnn, result.augmentor, g, split, cfg,
                         result.sample_seed)
            accs.append(m["test_accuracy"])
            f1s.append(m["test_weighted_f1"])
        rows.append(SweepRow(
            value=float(value),
            mean_accuracy=float(np.mean(accs)),
            std_accuracy=float(np.std(accs)),
            mean_f1=float(np.mean(f1s)),
            std_f1=float(np.std(f1s)),
            n_seeds=len(seeds),
        ))
    return rows
