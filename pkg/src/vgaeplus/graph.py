"""Attributed labelled graphs: loading, preprocessing, node splits and induced subgraphs."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .rng import stream

__all__ = [
    "Graph",
    "NodeSplit",
    "load_graph",
    "preprocess",
    "split_nodes",
    "induced_subgraph",
    "save_split",
    "load_split",
    "save_graph_json",
    "load_graph_json",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    """Dense binary adjacency ``A`` (N x N), features ``X`` (N x k), one-hot labels ``L`` (N x l).

    A label row of all zeros means the node is unlabelled.  ``origin`` maps
    each row back to its index in the graph this one was cut from.
    """

    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    node_ids: tuple = ()
    origin: np.ndarray | None = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.float64)
        x = np.asarray(self.features, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.float64)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValidationError(f"adjacency must be square, got {a.shape}")
        if x.ndim != 2 or x.shape[0] != n:
            raise ValidationError(f"features must have {n} rows, got {x.shape}")
        if lab.ndim != 2 or lab.shape[0] != n:
            raise ValidationError(f"labels must have {n} rows, got {lab.shape}")
        for name, m in (("adjacency", a), ("features", x), ("labels", lab)):
            if not np.isin(m, (0.0, 1.0)).all():
                raise ValidationError(f"{name} entries must be 0 or 1")
        if (lab.sum(axis=1) > 1).any():
            raise ValidationError("label rows must sum to 0 or 1")
        for arr in (a, x, lab):
            arr.setflags(write=False)
        ids = tuple(self.node_ids) if len(self.node_ids) else tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise ValidationError(f"expected {n} node ids, got {len(ids)}")
        origin = np.arange(n) if self.origin is None else np.asarray(self.origin, dtype=np.intp)
        origin.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "node_ids", ids)
        object.__setattr__(self, "origin", origin)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def labelled(self) -> np.ndarray:
        """Boolean mask of nodes that carry a label."""
        return self.labels.sum(axis=1) > 0

    @property
    def class_index(self) -> np.ndarray:
        """Class per node, ``-1`` where unlabelled."""
        return np.where(self.labelled, self.labels.argmax(axis=1), -1)

    @property
    def n_links(self) -> int:
        """Undirected links, self-loops excluded."""
        a = np.maximum(self.adjacency, self.adjacency.T)
        return int(np.triu(a, 1).sum())

    def neighbors(self, u: int) -> np.ndarray:
        row = self.adjacency[u].copy()
        row[u] = 0
        return np.flatnonzero(row)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            np.array_equal(self.adjacency, other.adjacency)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class NodeSplit:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int

    def __post_init__(self):
        sets = [set(self.train), set(self.validation), set(self.test)]
        if sum(len(s) for s in sets) != len(set().union(*sets)):
            raise ValidationError("split parts overlap")


def _read_rows(path: Path, delimiter: str):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            yield lineno, [c.strip() for c in row]


def load_graph(
    edges_path,
    features_path,
    labels_path=None,
    n_classes: int | None = None,
) -> Graph:
    """Read ``edges.tsv``, ``features.csv`` and an optional ``labels.csv``.

    Node indices follow first appearance in the features file.  Nodes absent
    from the labels file (or every node, when it is missing) are unlabelled.
    The class count is ``n_classes`` if given, else ``1 + max(class_index)``.
    """
    features_path = Path(features_path)
    ids: list[str] = []
    rows: list[list[float]] = []
    index: dict[str, int] = {}
    width = None
    for lineno, row in _read_rows(features_path, ","):
        if width is None:
            width = len(row) - 1
            if width < 1:
                raise ParseError(f"{features_path}:{lineno}: header needs node_id and at least one feature")
            continue
        if len(row) != width + 1:
            raise ParseError(f"{features_path}:{lineno}: expected {width + 1} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(f"{features_path}:{lineno}: {exc}") from None
        if any(v not in (0.0, 1.0) for v in vals):
            raise ValidationError(f"{features_path}:{lineno}: feature values must be 0 or 1")
        if row[0] in index:
            raise ValidationError(f"{features_path}:{lineno}: duplicate node id {row[0]!r}")
        index[row[0]] = len(ids)
        ids.append(row[0])
        rows.append(vals)
    if width is None:
        raise ParseError(f"{features_path}: empty file")
    n = len(ids)
    x = np.array(rows, dtype=np.float64).reshape(n, width)

    a = np.zeros((n, n))
    edges_path = Path(edges_path)
    for lineno, row in _read_rows(edges_path, "\t"):
        if len(row) != 2:
            raise ParseError(f"{edges_path}:{lineno}: expected 'u<TAB>v', got {len(row)} fields")
        try:
            u, v = index[row[0]], index[row[1]]
        except KeyError as exc:
            raise ValidationError(f"{edges_path}:{lineno}: unknown node id {exc.args[0]!r}") from None
        a[u, v] = 1.0

    classes = np.full(n, -1)
    if labels_path is not None and Path(labels_path).exists():
        labels_path = Path(labels_path)
        for lineno, row in _read_rows(labels_path, ","):
            if lineno == 1 and not row[-1].lstrip("-").isdigit():
                continue  # header
            if len(row) != 2:
                raise ParseError(f"{labels_path}:{lineno}: expected 'node_id,class_index'")
            if row[0] not in index:
                raise ValidationError(f"{labels_path}:{lineno}: unknown node id {row[0]!r}")
            try:
                c = int(row[1])
            except ValueError:
                raise ParseError(f"{labels_path}:{lineno}: class index {row[1]!r} is not an integer") from None
            if c < 0 or (n_classes is not None and c >= n_classes):
                raise ValidationError(f"{labels_path}:{lineno}: class index {c} out of range")
            classes[index[row[0]]] = c
    elif labels_path is not None:
        log.warning("labels file %s not found; all nodes unlabelled", labels_path)
    if n_classes is None:
        n_classes = int(classes.max()) + 1 if (classes >= 0).any() else 1
    lab = np.zeros((n, n_classes))
    known = classes >= 0
    lab[np.flatnonzero(known), classes[known]] = 1.0
    if (~known).any():
        log.info("%d of %d nodes unlabelled", int((~known).sum()), n)
    return Graph(a, x, lab, node_ids=tuple(ids))


def preprocess(g: Graph) -> Graph:
    """Symmetrize the adjacency and put ones on its diagonal."""
    a = np.maximum(g.adjacency, g.adjacency.T)
    np.fill_diagonal(a, 1.0)
    return Graph(a, g.features, g.labels, node_ids=g.node_ids, origin=g.origin)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_sizes(n: int) -> tuple[int, int, int]:
    """(train, validation, test) sizes for ``n`` nodes: 70% / 10% / remainder."""
    n_train = _round_half_up(0.7 * n)
    n_val = _round_half_up(0.1 * n)
    return n_train, n_val, n - n_train - n_val


def split_nodes(g: Graph, seed: int) -> NodeSplit:
    """Uniform random 70/10/20 partition of node indices into train/validation/test."""
    n = g.n_nodes
    if n < 10:
        raise ValidationError("graph too small to split")
    n_train, n_val, _ = split_sizes(n)
    perm = stream(seed, "split").permutation(n)
    return NodeSplit(
        train=tuple(sorted(int(i) for i in perm[:n_train])),
        validation=tuple(sorted(int(i) for i in perm[n_train : n_train + n_val])),
        test=tuple(sorted(int(i) for i in perm[n_train + n_val :])),
        seed=int(seed),
    )


def induced_subgraph(g: Graph, nodes: Sequence[int]) -> Graph:
    """Restrict ``g`` to ``nodes`` in the given order; ``origin`` records source indices."""
    idx = np.asarray(list(nodes), dtype=np.intp).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n_nodes):
        raise ValidationError("induced_subgraph: node index out of range")
    if len(set(idx.tolist())) != idx.size:
        raise ValidationError("induced_subgraph: duplicate node index")
    return Graph(
        g.adjacency[np.ix_(idx, idx)],
        g.features[idx],
        g.labels[idx],
        node_ids=tuple(g.node_ids[i] for i in idx),
        origin=g.origin[idx],
    )


def save_split(split: NodeSplit, g: Graph, path) -> None:
    payload = {
        "seed": split.seed,
        "train": [g.node_ids[i] for i in split.train],
        "validation": [g.node_ids[i] for i in split.validation],
        "test": [g.node_ids[i] for i in split.test],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_split(path, g: Graph) -> NodeSplit:
    payload = json.loads(Path(path).read_text())
    index = {nid: i for i, nid in enumerate(g.node_ids)}
    try:
        parts = {k: tuple(sorted(index[str(nid)] for nid in payload[k])) for k in ("train", "validation", "test")}
    except KeyError as exc:
        raise ValidationError(f"{path}: unknown node id or missing key {exc.args[0]!r}") from None
    return NodeSplit(seed=int(payload["seed"]), **parts)


def save_graph_json(g: Graph, path) -> None:
    """Sparse, deterministic JSON dump: directed edge list, feature on-indices, class per node."""
    rows, cols = np.nonzero(g.adjacency)
    payload = {
        "n": g.n_nodes,
        "k": g.n_features,
        "l": g.n_classes,
        "node_ids": list(g.node_ids),
        "edges": [[int(u), int(v)] for u, v in zip(rows, cols)],
        "features": [np.flatnonzero(r).tolist() for r in g.features],
        "labels": g.class_index.tolist(),
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")) + "\n")


def load_graph_json(path) -> Graph:
    p = json.loads(Path(path).read_text())
    n, k, l = p["n"], p["k"], p["l"]
    a = np.zeros((n, n))
    if p["edges"]:
        e = np.asarray(p["edges"], dtype=np.intp)
        a[e[:, 0], e[:, 1]] = 1.0
    x = np.zeros((n, k))
    for i, on in enumerate(p["features"]):
        x[i, on] = 1.0
    lab = np.zeros((n, l))
    for i, c in enumerate(p["labels"]):
        if c >= 0:
            lab[i, c] = 1.0
    return Graph(a, x, lab, node_ids=tuple(p["node_ids"]))
