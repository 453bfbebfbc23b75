"""Planted-partition graphs with block-aligned features and labels, for tests and demos."""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .rng import stream

__all__ = ["planted_partition"]


def planted_partition(
    n_nodes: int = 200,
    n_blocks: int = 2,
    p_in: float = 0.3,
    p_out: float = 0.02,
    n_features: int = 8,
    feature_on: float = 0.8,
    feature_off: float = 0.1,
    seed: int = 0,
) -> Graph:
    """Stochastic block model with equal-size contiguous blocks.

    Features are split into ``n_blocks`` equal groups; a node turns on each
    bit of its own block's group with probability ``feature_on`` and every
    other bit with probability ``feature_off``.  The label is the block.
    The returned graph is already preprocessed (symmetric, self-loops).
    """
    rng = stream(seed, "planted-partition")
    block = np.arange(n_nodes) * n_blocks // n_nodes
    same = block[:, None] == block[None, :]
    upper = np.triu(rng.random((n_nodes, n_nodes)) < np.where(same, p_in, p_out), 1)
    a = (upper | upper.T).astype(np.float64)
    np.fill_diagonal(a, 1.0)

    group = np.arange(n_features) * n_blocks // n_features
    prob = np.where(group[None, :] == block[:, None], feature_on, feature_off)
    x = (rng.random((n_nodes, n_features)) < prob).astype(np.float64)

    labels = np.zeros((n_nodes, n_blocks))
    labels[np.arange(n_nodes), block] = 1.0
    return Graph(a, x, labels)
