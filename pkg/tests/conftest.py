import numpy as np
import pytest

from vgaeplus.graph import Graph, induced_subgraph, preprocess, split_nodes
from vgaeplus.inference import SubgraphQuery
from vgaeplus.model import TrainConfig, VgaePlusModel, train
from vgaeplus.synthetic import planted_partition

NAN = np.nan

# Six-node worked example, 1-indexed in prose, 0-indexed here.
# The evidence adjacency is deliberately asymmetric at (1,4)/(4,1).
SIX_NODE_A_E = np.array(
    [
        [1, 1, 1, 0, 1, 0],
        [1, 1, 1, NAN, 0, 0],
        [1, 1, 1, 0, 0, 1],
        [1, NAN, 0, 1, 0, 0],
        [1, 0, 0, 0, 1, NAN],
        [0, 0, 1, 0, NAN, 1],
    ]
)
SIX_NODE_X_E = np.array([[1, 1], [0, 1], [NAN, NAN], [1, 0], [NAN, NAN], [1, 1]])
SIX_NODE_A_E0 = np.nan_to_num(SIX_NODE_A_E, nan=0.0)
SIX_NODE_X_E0 = np.nan_to_num(SIX_NODE_X_E, nan=0.0)

# Ground-truth 6-node graph behind the query walkthroughs (0-indexed).
SIX_NODE_POSITIVE = [(0, 1), (0, 2), (0, 3), (1, 2), (2, 5), (0, 4), (3, 4)]


def six_node_graph(labels=(0, 1, 0, 1, 1, 0)) -> Graph:
    a = np.zeros((6, 6))
    for u, v in SIX_NODE_POSITIVE:
        a[u, v] = 1.0
    x = SIX_NODE_X_E0.copy()
    lab = np.zeros((6, 2))
    lab[np.arange(6), list(labels)] = 1.0
    return preprocess(Graph(a, x, lab))


def six_node_query(**targets) -> SubgraphQuery:
    return SubgraphQuery.from_partial_matrices(SIX_NODE_A_E, SIX_NODE_X_E, **targets)


def random_graph(rng: np.random.Generator, n: int, k: int, l: int, p: float = 0.3, unlabelled: float = 0.2) -> Graph:
    a = (rng.random((n, n)) < p).astype(float)
    x = (rng.random((n, k)) < 0.5).astype(float)
    lab = np.zeros((n, l))
    cls = rng.integers(0, l, n)
    keep = rng.random(n) >= unlabelled
    lab[np.flatnonzero(keep), cls[keep]] = 1.0
    return preprocess(Graph(a, x, lab))


def random_model(rng_seed: int, k: int, l: int, d: int = 8, h: int = 16, log_sigma_scale: float = 0.3) -> VgaePlusModel:
    """Initialised model whose log-sigma head is non-zero, so sampling matters."""
    m = VgaePlusModel.initialize(k, l, d, h, seed=rng_seed)
    rng = np.random.default_rng(rng_seed + 1000)
    m.params["gin2.weight"].data[:, d:] = rng.normal(0.0, log_sigma_scale, (h, d))
    m.params["lambda"].data[...] = rng.normal(0.0, 0.5, (d, d))
    return m


@pytest.fixture(scope="session")
def sbm():
    g = planted_partition(n_nodes=100, seed=3)
    split = split_nodes(g, 3)
    return g, split


@pytest.fixture(scope="session")
def small_trained(sbm):
    g, split = sbm
    cfg = TrainConfig(epochs=120, seed=1, embedding_dim=16, hidden_dim=32)
    return train(induced_subgraph(g, split.train), cfg)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
