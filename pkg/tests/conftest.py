import dataclasses

import numpy as np
import pytest

from sailor.demo import make_demo_graph, make_demo_masks, write_demo_bundle
from sailor.graphs import make_splits, pareto_split
from sailor.training import TrainConfig, train

# small-but-real settings used by every training-path test; full-size runs
# belong to the acceptance criteria
FAST = dict(max_epochs=8, patience=8, hidden_gnn=8, hidden_aug=8, batch=64)


def fast_config(**kw) -> TrainConfig:
    merged = {**FAST, **kw}
    return TrainConfig(**merged)


@pytest.fixture(scope="session")
def demo_graph():
    return make_demo_graph(n_nodes=120, n_classes=3, seed=7)


@pytest.fixture(scope="session")
def demo_partition(demo_graph):
    return pareto_split(demo_graph)


@pytest.fixture(scope="session")
def demo_split(demo_graph, demo_partition):
    return make_splits(demo_graph, demo_partition, "tail-protocol", seed=0)


@pytest.fixture(scope="session")
def demo_masks(demo_graph):
    # sized for the 120-node fixture graph: 30 train, 30 valid, 60 test
    return make_demo_masks(demo_graph, seed=7, train_per_class=10, n_valid=30)


@pytest.fixture(scope="session")
def demo_bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle") / "demo"
    return write_demo_bundle(out, n_nodes=120, n_classes=3, seed=7)


@pytest.fixture(scope="session")
def trained_small(demo_graph, demo_partition, demo_split):
    """One real joint-training run shared by trainer/checkpoint tests."""
    cfg = fast_config(seed=3)
    result = train(demo_graph, demo_partition, demo_split, cfg)
    return demo_graph, demo_partition, demo_split, cfg, result


def config_with(cfg: TrainConfig, **kw) -> TrainConfig:
    return dataclasses.replace(cfg, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
