"""Subgraph queries: evidence matrices, query posteriors and target probabilities.

A query names ``n`` local nodes ``0..n-1``.  Evidence links and features
are written into zero-imputed matrices that the trained encoder reads;
target links, labels and features are then scored either at the posterior
mean (deterministic) or averaged over posterior samples (Monte Carlo).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import log_expit, log_softmax, logsumexp

from .errors import ValidationError
from .model import Posterior, VgaePlusModel, encode
from .rng import stream

__all__ = [
    "SubgraphQuery",
    "EvidenceMatrices",
    "QueryAnswer",
    "build_evidence_matrices",
    "query_posterior",
    "target_probability",
    "infer_deterministic",
    "infer_mc",
    "load_query",
    "save_answer",
]

log = logging.getLogger(__name__)

DEFAULT_MC_SAMPLES = 30


def _pair(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u <= v else (v, u)


@dataclass
class SubgraphQuery:
    """Evidence and target assignments over ``n`` query nodes.

    Link entries are ``(u, v, value)``.  An evidence entry assigns
    ``A[u, v]`` and, unless ``(v, u)`` is listed too, its mirror ``A[v, u]``.
    ``node_map`` ties local indices to graph indices for bookkeeping only.
    """

    n: int
    evidence_links: list = field(default_factory=list)
    evidence_features: list = field(default_factory=list)
    evidence_labels: list = field(default_factory=list)
    target_links: list = field(default_factory=list)
    target_labels: list = field(default_factory=list)
    target_features: list = field(default_factory=list)
    node_map: list | None = None

    def __post_init__(self):
        self.evidence_links = [(int(u), int(v), int(a)) for u, v, a in self.evidence_links]
        self.target_links = [(int(u), int(v), int(a)) for u, v, a in self.target_links]
        self.evidence_features = [(int(u), np.asarray(x, dtype=np.float64)) for u, x in self.evidence_features]
        self.target_features = [(int(u), np.asarray(x, dtype=np.float64)) for u, x in self.target_features]
        self.evidence_labels = [(int(u), int(c)) for u, c in self.evidence_labels]
        self.target_labels = [(int(u), int(c)) for u, c in self.target_labels]
        self.validate()

    def validate(self) -> None:
        if self.n < 1:
            raise ValidationError("query needs at least one node")
        for name, links in (("evidence", self.evidence_links), ("target", self.target_links)):
            for u, v, a in links:
                if not (0 <= u < self.n and 0 <= v < self.n):
                    raise ValidationError(f"{name} link ({u}, {v}) outside 0..{self.n - 1}")
                if a not in (0, 1):
                    raise ValidationError(f"{name} link ({u}, {v}) has non-binary value {a}")
        for name, entries in (
            ("evidence feature", self.evidence_features),
            ("target feature", self.target_features),
            ("evidence label", self.evidence_labels),
            ("target label", self.target_labels),
        ):
            seen = set()
            for u, _ in entries:
                if not 0 <= u < self.n:
                    raise ValidationError(f"{name} node {u} outside 0..{self.n - 1}")
                if u in seen:
                    raise ValidationError(f"duplicate {name} for node {u}")
                seen.add(u)
        target_pairs = [_pair(u, v) for u, v, _ in self.target_links]
        if len(set(target_pairs)) != len(target_pairs):
            raise ValidationError("duplicate target link")
        overlap = set(target_pairs) & {_pair(u, v) for u, v, _ in self.evidence_links}
        if overlap:
            raise ValidationError(f"links {sorted(overlap)} are both evidence and target")

    @property
    def is_empty(self) -> bool:
        return not (self.target_links or self.target_labels or self.target_features)

    @classmethod
    def from_partial_matrices(cls, adjacency, features=None, **targets) -> "SubgraphQuery":
        """Query whose evidence is a partially specified adjacency (NaN = unspecified).

        Off-diagonal entries become evidence link assignments; a specified row
        of ``features`` becomes that node's evidence feature vector.
        """
        a = np.asarray(adjacency, dtype=np.float64)
        n = a.shape[0]
        links = []
        for u in range(n):
            for v in range(u + 1, n):
                fwd, back = a[u, v], a[v, u]
                if np.isnan(fwd) and np.isnan(back):
                    continue
                if np.isnan(back) or fwd == back:
                    links.append((u, v, int(fwd)))
                elif np.isnan(fwd):
                    links.append((v, u, int(back)))
                else:
                    links += [(u, v, int(fwd)), (v, u, int(back))]
        feats = []
        if features is not None:
            for u, row in enumerate(np.asarray(features, dtype=np.float64)):
                if not np.isnan(row).any():
                    feats.append((u, row))
        return cls(n, evidence_links=links, evidence_features=feats, **targets)

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "evidence": {
                "links": [list(e) for e in self.evidence_links],
                "features": [[u, x.astype(int).tolist()] for u, x in self.evidence_features],
                "labels": [list(e) for e in self.evidence_labels],
            },
            "target": {
                "links": [list(e) for e in self.target_links],
                "labels": [list(e) for e in self.target_labels],
                "features": [[u, x.astype(int).tolist()] for u, x in self.target_features],
            },
        }
        if self.node_map is not None:
            out["node_map"] = [int(i) for i in self.node_map]
        return out

    @classmethod
    def from_json(cls, payload: dict) -> "SubgraphQuery":
        try:
            ev = payload.get("evidence", {})
            tg = payload.get("target", {})
            return cls(
                n=int(payload["n"]),
                evidence_links=ev.get("links", []),
                evidence_features=ev.get("features", []),
                evidence_labels=ev.get("labels", []),
                target_links=tg.get("links", []),
                target_labels=tg.get("labels", []),
                target_features=tg.get("features", []),
                node_map=payload.get("node_map"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed query: {exc}") from None


@dataclass(frozen=True)
class EvidenceMatrices:
    a_e0: np.ndarray
    x_e0: np.ndarray


def build_evidence_matrices(q: SubgraphQuery, k: int) -> EvidenceMatrices:
    """Zero-imputed evidence adjacency (with self-loops) and feature matrix.

    Reusing an ordered pair with a different value is an error.
    """
    assigned: dict[tuple[int, int], int] = {}
    for u, v, val in q.evidence_links:
        prev = assigned.get((u, v))
        if prev is not None and prev != val:
            raise ValidationError(f"conflicting evidence for link ({u}, {v})")
        assigned[(u, v)] = val
    a = np.zeros((q.n, q.n))
    for (u, v), val in assigned.items():
        a[u, v] = val
        if (v, u) not in assigned:
            a[v, u] = val
    np.fill_diagonal(a, 1.0)

    x = np.zeros((q.n, k))
    for u, vec in q.evidence_features:
        if vec.shape != (k,):
            raise ValidationError(f"evidence feature for node {u} has length {vec.size}, expected {k}")
        x[u] = vec
    return EvidenceMatrices(a, x)


def query_posterior(model: VgaePlusModel, ev: EvidenceMatrices) -> Posterior:
    if ev.x_e0.shape[1] != model.n_features:
        raise ValidationError(f"query has {ev.x_e0.shape[1]} features, model expects {model.n_features}")
    return encode(model, ev.a_e0, ev.x_e0)


@dataclass
class QueryAnswer:
    """Component and joint probabilities for one query.

    ``link_p1`` is P(link present); ``link_probs`` the probability of each
    asserted value.  ``label_dists`` holds full class distributions and
    ``label_probs`` the asserted-class probability.  ``feature_dists`` holds
    per-dimension P(x = 1) and ``feature_probs`` the asserted vector's
    probability.
    """

    link_p1: np.ndarray
    link_probs: np.ndarray
    label_dists: np.ndarray
    label_probs: np.ndarray
    feature_dists: np.ndarray
    feature_probs: np.ndarray
    joint_prob: float
    joint_log_prob: float
    mode: str
    n_samples: int | None = None
    empty_target: bool = False

    def to_json(self, q: SubgraphQuery | None = None) -> dict:
        out = {
            "mode": self.mode,
            "n_samples": self.n_samples,
            "joint_prob": float(self.joint_prob),
            "joint_log_prob": float(self.joint_log_prob),
            "empty_target": self.empty_target,
            "links": [],
            "labels": [],
            "features": [],
        }
        for i in range(len(self.link_p1)):
            entry = {"p_link": float(self.link_p1[i]), "p_asserted": float(self.link_probs[i])}
            if q is not None:
                entry["u"], entry["v"], entry["value"] = q.target_links[i]
            out["links"].append(entry)
        for i in range(len(self.label_probs)):
            entry = {"distribution": self.label_dists[i].tolist(), "p_asserted": float(self.label_probs[i])}
            if q is not None:
                entry["u"], entry["class"] = q.target_labels[i]
            out["labels"].append(entry)
        for i in range(len(self.feature_probs)):
            entry = {"p_on": self.feature_dists[i].tolist(), "p_asserted": float(self.feature_probs[i])}
            if q is not None:
                entry["u"] = q.target_features[i][0]
            out["features"].append(entry)
        return out


def _component_logs(z: np.ndarray, q: SubgraphQuery, model: VgaePlusModel):
    """Per-component log-probabilities for embeddings ``z`` of shape (..., n, d).

    Returns log P(link=1), log P(asserted link value), label log-distributions,
    log P(asserted label), feature log P(x=1) and log P(asserted feature vector).
    """
    batch = z.shape[:-2]
    if q.target_links:
        pairs = np.array([(u, v) for u, v, _ in q.target_links], dtype=np.intp)
        vals = np.array([a for _, _, a in q.target_links], dtype=bool)
        s = model.link_logits(z, pairs)
        log_p1 = log_expit(s)
        log_asserted = np.where(vals, log_p1, log_expit(-s))
    else:
        log_p1 = log_asserted = np.zeros(batch + (0,))

    if q.target_labels:
        nodes = np.array([u for u, _ in q.target_labels], dtype=np.intp)
        classes = np.array([c for _, c in q.target_labels], dtype=np.intp)
        if classes.max() >= model.n_classes or classes.min() < 0:
            raise ValidationError(f"target class out of range 0..{model.n_classes - 1}")
        log_dist = log_softmax(model.label_logits(z[..., nodes, :]), axis=-1)
        log_label = np.take_along_axis(log_dist, classes.reshape((1,) * len(batch) + (-1, 1)), axis=-1)[..., 0]
    else:
        log_dist = np.zeros(batch + (0, model.n_classes))
        log_label = np.zeros(batch + (0,))

    if q.target_features:
        nodes = np.array([u for u, _ in q.target_features], dtype=np.intp)
        bits = np.stack([x for _, x in q.target_features]).astype(bool)
        if bits.shape[1] != model.n_features:
            raise ValidationError("target feature vector has the wrong length")
        f = model.feature_logits(z[..., nodes, :])
        log_on = log_expit(f)
        log_feat = np.where(bits, log_on, log_expit(-f)).sum(axis=-1)
    else:
        log_on = np.zeros(batch + (0, model.n_features))
        log_feat = np.zeros(batch + (0,))
    return log_p1, log_asserted, log_dist, log_label, log_on, log_feat


def target_probability(z, q: SubgraphQuery, model: VgaePlusModel):
    """Component probabilities and their product for fixed embeddings ``z`` (n x d).

    Returns ``(components, joint)`` where ``components`` maps
    ``"links"``, ``"labels"``, ``"features"`` to asserted-value probabilities.
    An empty target gives joint probability 1 and logs a warning.
    """
    z = np.asarray(z.data if hasattr(z, "data") and not isinstance(z, np.ndarray) else z, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValidationError("embeddings must be finite")
    if q.is_empty:
        log.warning("query has no targets; joint probability is 1")
    _, la, _, ll, _, lf = _component_logs(z, q, model)
    comps = {"links": np.exp(la), "labels": np.exp(ll), "features": np.exp(lf)}
    return comps, float(np.exp(la.sum() + ll.sum() + lf.sum()))


def _prepare(model: VgaePlusModel, q: SubgraphQuery) -> Posterior:
    return query_posterior(model, build_evidence_matrices(q, model.n_features))


def infer_deterministic(model: VgaePlusModel, q: SubgraphQuery) -> QueryAnswer:
    """Score the targets at the posterior mean embeddings."""
    return _answer_from_mean(model, q, _prepare(model, q).mean, "deterministic", None)


def _answer_from_mean(model, q, mu, mode, n_samples) -> QueryAnswer:
    if q.is_empty:
        log.warning("query has no targets; joint probability is 1")
    lp1, la, ld, ll, lon, lf = _component_logs(mu, q, model)
    joint_log = float(la.sum() + ll.sum() + lf.sum())
    return QueryAnswer(
        link_p1=np.exp(lp1),
        link_probs=np.exp(la),
        label_dists=np.exp(ld),
        label_probs=np.exp(ll),
        feature_dists=np.exp(lon),
        feature_probs=np.exp(lf),
        joint_prob=float(np.exp(joint_log)),
        joint_log_prob=joint_log,
        mode=mode,
        n_samples=n_samples,
        empty_target=q.is_empty,
    )


def infer_mc(
    model: VgaePlusModel,
    q: SubgraphQuery,
    s: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    log_sigma_override: float | None = None,
    chunk: int = 4096,
) -> QueryAnswer:
    """Average target probabilities over ``s`` reparameterized posterior draws.

    The joint and each component probability are averaged separately.
    ``log_sigma_override`` replaces the encoder's log standard deviations
    (``-inf`` collapses the posterior onto its mean).
    """
    if s < 1:
        raise ValidationError("sample count must be >= 1")
    post = _prepare(model, q)
    mu = post.mean
    ls = post.log_sigma.data if log_sigma_override is None else np.full_like(mu, log_sigma_override)
    sigma = np.exp(ls)
    mode = f"mc({s})"
    rng = stream(seed, "mc-inference")
    sums = None
    joint_logs = []
    done = 0
    while done < s:
        b = min(chunk, s - done)
        eps = rng.standard_normal((b,) + mu.shape)
        z = mu + sigma * eps
        lp1, la, ld, ll, lon, lf = _component_logs(z, q, model)
        joint_logs.append(la.sum(axis=-1) + ll.sum(axis=-1) + lf.sum(axis=-1))
        parts = [np.exp(x).sum(axis=0) for x in (lp1, la, ld, ll, lon, lf)]
        sums = parts if sums is None else [acc + p for acc, p in zip(sums, parts)]
        done += b
    p1, pa, pd, pl, pon, pf = (x / s for x in sums)
    joint_log = float(logsumexp(np.concatenate(joint_logs)) - np.log(s))
    if q.is_empty:
        log.warning("query has no targets; joint probability is 1")
    return QueryAnswer(
        link_p1=p1,
        link_probs=pa,
        label_dists=pd,
        label_probs=pl,
        feature_dists=pon,
        feature_probs=pf,
        joint_prob=float(np.exp(joint_log)),
        joint_log_prob=joint_log,
        mode=mode,
        n_samples=s,
        empty_target=q.is_empty,
    )


def mc_sample_joints(model: VgaePlusModel, q: SubgraphQuery, s: int, seed: int = 0) -> np.ndarray:
    """Per-sample joint probabilities drawn exactly as :func:`infer_mc` draws them."""
    post = _prepare(model, q)
    mu, sigma = post.mean, np.exp(post.log_sigma.data)
    rng = stream(seed, "mc-inference")
    eps = rng.standard_normal((s,) + mu.shape)
    _, la, _, ll, _, lf = _component_logs(mu + sigma * eps, q, model)
    return np.exp(la.sum(axis=-1) + ll.sum(axis=-1) + lf.sum(axis=-1))


def load_query(path) -> SubgraphQuery:
    return SubgraphQuery.from_json(json.loads(Path(path).read_text()))


def save_answer(answer: QueryAnswer, path, q: SubgraphQuery | None = None) -> None:
    Path(path).write_text(json.dumps(answer.to_json(q), indent=1) + "\n")
