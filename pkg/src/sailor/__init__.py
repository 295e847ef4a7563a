"""Structural augmentation for tail nodes in long-tailed graphs.

A tail structure augmentor (variational graph encoder with a linear twin)
learns to add pseudo-homophilic edges to low-degree nodes; a GCN classifier
is trained jointly on the augmented graph. The package also ships the
degree/homophily diagnostics and the evaluation protocol used to study the
effect of the augmentation.
"""

__version__ = "0.1.0"

from sailor.graphs import (
    AttributedGraph,
    NodePartition,
    DatasetSplit,
    degrees,
    make_splits,
    pareto_split,
    preprocess,
)
from sailor.bundles import BundleError, load_graph, write_bundle
from sailor.homophily import (
    HomophilyReport,
    expected_total_het_prob,
    heterophily_report,
    node_homophily,
    per_node_homophily,
)
from sailor.training import (
    ConfigError,
    TrainConfig,
    TrainingDivergence,
    TrainResult,
    evaluate,
    load_config,
    sweep,
    train,
)

__all__ = [
    "AttributedGraph",
    "BundleError",
    "ConfigError",
    "DatasetSplit",
    "HomophilyReport",
    "NodePartition",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergence",
    "degrees",
    "evaluate",
    "expected_total_het_prob",
    "heterophily_report",
    "load_config",
    "load_graph",
    "make_splits",
    "node_homophily",
    "pareto_split",
    "per_node_homophily",
    "preprocess",
    "sweep",
    "train",
    "write_bundle",
]
