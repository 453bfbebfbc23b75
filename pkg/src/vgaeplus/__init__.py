"""Variational graph auto-encoder with link, feature and label decoders, for subgraph queries."""

from .errors import NumericError, ParseError, ValidationError
from .evaluation import EvalReport, evaluate
from .gaussian import kl_standard_gaussian, reparameterize, sample_gaussian
from .graph import Graph, NodeSplit, induced_subgraph, load_graph, preprocess, split_nodes
from .inference import (
    SubgraphQuery,
    build_evidence_matrices,
    infer_deterministic,
    infer_mc,
    query_posterior,
    target_probability,
)
from .metrics import f1_macro, hit_rate_at_20, roc_auc
from .model import (
    TrainConfig,
    VgaePlusModel,
    classify_nodes,
    decode_features,
    decode_links,
    elbo_loss,
    encode,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .queries import QuerySuite, gen_link_queries, gen_neighborhood, gen_node_queries, gen_single_neighbor, generate
from .synthetic import planted_partition
from .tuning import BoState, tune_weights, validation_objective

__version__ = "0.1.0"

__all__ = [
    "BoState",
    "EvalReport",
    "Graph",
    "NodeSplit",
    "NumericError",
    "ParseError",
    "QuerySuite",
    "SubgraphQuery",
    "TrainConfig",
    "ValidationError",
    "VgaePlusModel",
    "build_evidence_matrices",
    "classify_nodes",
    "decode_features",
    "decode_links",
    "elbo_loss",
    "encode",
    "evaluate",
    "f1_macro",
    "gen_link_queries",
    "gen_neighborhood",
    "gen_node_queries",
    "gen_single_neighbor",
    "generate",
    "hit_rate_at_20",
    "induced_subgraph",
    "infer_deterministic",
    "infer_mc",
    "kl_standard_gaussian",
    "load_checkpoint",
    "load_graph",
    "planted_partition",
    "preprocess",
    "query_posterior",
    "reparameterize",
    "roc_auc",
    "sample_gaussian",
    "save_checkpoint",
    "split_nodes",
    "target_probability",
    "train",
    "tune_weights",
    "validation_objective",
]
