"""Test-query generators for the six query families.

Each query is built around a target node ``u`` drawn from the test nodes.
Its query nodes are ``u`` plus the paired nodes (positive and negative
neighbours); the evidence gives every query node's features and the true
value of every non-target pair among the query nodes.

Paired nodes come from the test nodes in ``"inductive"`` mode and from
train and test nodes in ``"semi_inductive"`` mode.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import Graph, NodeSplit
from .inference import SubgraphQuery
from .rng import stream

__all__ = [
    "FAMILIES",
    "MODES",
    "QuerySuite",
    "gen_single_neighbor",
    "gen_neighborhood",
    "gen_link_queries",
    "gen_node_queries",
    "generate",
    "save_suite",
    "load_suite",
]

log = logging.getLogger(__name__)

FAMILIES = ("single_neighbor", "neighborhood", "single_link", "joint_link", "single_node", "joint_node")
MODES = ("semi_inductive", "inductive")
DEFAULT_TARGET_NODES = 100


@dataclass
class QuerySuite:
    queries: list[SubgraphQuery]
    family: str
    mode: str
    seed: int
    target_nodes: list[int] = field(default_factory=list)
    skipped: list[tuple[int, str]] = field(default_factory=list)
    short_negatives: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.queries)

    def ground_truth(self, i: int) -> dict:
        q = self.queries[i]
        return {
            "links": [a for _, _, a in q.target_links],
            "labels": [c for _, c in q.target_labels],
        }


def _pool(split: NodeSplit, mode: str) -> np.ndarray:
    if mode == "inductive":
        return np.array(sorted(split.test), dtype=np.intp)
    if mode == "semi_inductive":
        return np.array(sorted(split.train + split.test), dtype=np.intp)
    raise ValidationError(f"unknown mode {mode!r}; expected one of {MODES}")


def _target_nodes(split: NodeSplit, rng: np.random.Generator, n_target: int) -> np.ndarray:
    test = np.array(sorted(split.test), dtype=np.intp)
    take = min(n_target, test.size)
    if take < n_target:
        log.info("test pool has %d nodes; using all of them as targets", test.size)
    return rng.choice(test, size=take, replace=False)


def _partners(graph: Graph, u: int, pool: np.ndarray):
    row = graph.adjacency[u, pool] > 0
    others = pool != u
    return pool[row & others], pool[~row & others]


def _assemble(graph: Graph, nodes: list[int], target_pairs: list[tuple[int, int]], label_nodes: list[int]):
    """Local query over ``nodes``: evidence = features + every non-target pair; targets as given."""
    local = {g: i for i, g in enumerate(nodes)}
    a = graph.adjacency
    targets = {frozenset((local[x], local[y])) for x, y in target_pairs}
    evidence = []
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if frozenset((i, j)) not in targets:
                evidence.append((i, j, int(a[nodes[i], nodes[j]])))
    target_links = [(local[x], local[y], int(a[x, y])) for x, y in target_pairs]
    classes = graph.class_index
    target_labels = [(local[v], int(classes[v])) for v in label_nodes if classes[v] >= 0]
    return SubgraphQuery(
        n=len(nodes),
        evidence_links=evidence,
        evidence_features=[(i, graph.features[g]) for i, g in enumerate(nodes)],
        target_links=target_links,
        target_labels=target_labels,
        node_map=list(nodes),
    )


def _single(graph, split, mode, seed, family, n_target, links: bool, label_u: bool) -> QuerySuite:
    pool = _pool(split, mode)
    rng = stream(seed, f"queries/{family}/{mode}")
    suite = QuerySuite([], family, mode, seed)
    classes = graph.class_index
    for u in _target_nodes(split, rng, n_target):
        u = int(u)
        pos, neg = _partners(graph, u, pool)
        if pos.size == 0:
            suite.skipped.append((u, "no positive neighbour in pool"))
            log.info("skipping target %d: no positive neighbour in pool", u)
            continue
        if neg.size == 0:
            suite.skipped.append((u, "no negative node in pool"))
            continue
        if label_u and classes[u] < 0:
            suite.skipped.append((u, "unlabelled target"))
            continue
        vp, vn = int(rng.choice(pos)), int(rng.choice(neg))
        nodes = [u, vp, vn]
        pairs = [(u, vp), (u, vn)] if links else []
        suite.queries.append(_assemble(graph, nodes, pairs, [u] if label_u else []))
        suite.target_nodes.append(u)
    return suite


def _joint(graph, split, mode, seed, family, n_target, links: bool, labels: bool) -> QuerySuite:
    pool = _pool(split, mode)
    rng = stream(seed, f"queries/{family}/{mode}")
    suite = QuerySuite([], family, mode, seed)
    classes = graph.class_index
    for u in _target_nodes(split, rng, n_target):
        u = int(u)
        pos, neg = _partners(graph, u, pool)
        if pos.size == 0:
            suite.skipped.append((u, "no positive neighbour in pool"))
            log.info("skipping target %d: no positive neighbour in pool", u)
            continue
        if neg.size < pos.size:
            suite.short_negatives.append(u)
            log.info("target %d: only %d negatives for %d positives", u, neg.size, pos.size)
        negs = rng.choice(neg, size=min(pos.size, neg.size), replace=False)
        paired = [int(v) for v in pos] + [int(v) for v in negs]
        if labels and not links and all(classes[v] < 0 for v in paired):
            suite.skipped.append((u, "no labelled paired node"))
            continue
        nodes = [u] + paired
        pairs = [(u, v) for v in paired] if links else []
        suite.queries.append(_assemble(graph, nodes, pairs, paired if labels else []))
        suite.target_nodes.append(u)
    return suite


def gen_single_neighbor(graph: Graph, split: NodeSplit, mode: str, seed: int, n_target: int = DEFAULT_TARGET_NODES):
    """Targets ``A[u, v+] = 1``, ``A[u, v-] = 0`` and the label of ``u``."""
    return _single(graph, split, mode, seed, "single_neighbor", n_target, links=True, label_u=True)


def gen_neighborhood(graph: Graph, split: NodeSplit, mode: str, seed: int, n_target: int = DEFAULT_TARGET_NODES):
    """Targets every pool neighbour of ``u``, as many sampled non-neighbours, and all their labels."""
    return _joint(graph, split, mode, seed, "neighborhood", n_target, links=True, labels=True)


def gen_link_queries(
    graph: Graph, split: NodeSplit, mode: str, joint: bool, seed: int, n_target: int = DEFAULT_TARGET_NODES
):
    """Single/neighbourhood link targets without any label targets."""
    if joint:
        return _joint(graph, split, mode, seed, "joint_link", n_target, links=True, labels=False)
    return _single(graph, split, mode, seed, "single_link", n_target, links=True, label_u=False)


def gen_node_queries(
    graph: Graph, split: NodeSplit, mode: str, joint: bool, seed: int, n_target: int = DEFAULT_TARGET_NODES
):
    """Label targets only; every pair among the query nodes is evidence.

    The single variant targets the label of ``u``; the joint variant the
    labels of ``u``'s paired nodes.
    """
    if joint:
        return _joint(graph, split, mode, seed, "joint_node", n_target, links=False, labels=True)
    return _single(graph, split, mode, seed, "single_node", n_target, links=False, label_u=True)


def generate(graph: Graph, split: NodeSplit, family: str, mode: str, seed: int, n_target: int = DEFAULT_TARGET_NODES):
    if family == "single_neighbor":
        return gen_single_neighbor(graph, split, mode, seed, n_target)
    if family == "neighborhood":
        return gen_neighborhood(graph, split, mode, seed, n_target)
    if family in ("single_link", "joint_link"):
        return gen_link_queries(graph, split, mode, family == "joint_link", seed, n_target)
    if family in ("single_node", "joint_node"):
        return gen_node_queries(graph, split, mode, family == "joint_node", seed, n_target)
    raise ValidationError(f"unknown query family {family!r}; expected one of {FAMILIES}")


def save_suite(suite: QuerySuite, path) -> None:
    payload = {
        "family": suite.family,
        "mode": suite.mode,
        "seed": suite.seed,
        "target_nodes": suite.target_nodes,
        "skipped": [list(s) for s in suite.skipped],
        "short_negatives": suite.short_negatives,
        "queries": [
            {**q.to_json(), "ground_truth": suite.ground_truth(i)} for i, q in enumerate(suite.queries)
        ],
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")) + "\n")


def load_suite(path) -> QuerySuite:
    p = json.loads(Path(path).read_text())
    return QuerySuite(
        queries=[SubgraphQuery.from_json(q) for q in p["queries"]],
        family=p["family"],
        mode=p["mode"],
        seed=p["seed"],
        target_nodes=p.get("target_nodes", []),
        skipped=[tuple(s) for s in p.get("skipped", [])],
        short_negatives=p.get("short_negatives", []),
    )
