"""VGAE+ : a GIN-encoded variational graph auto-encoder with link, feature and label decoders.

Shapes: ``N`` nodes, ``k`` binary features, ``l`` classes, ``d`` latent dims,
``h`` hidden width.  The encoder is two GIN layers, ``relu(P X W1 + b1)``
then ``P H W2 + b2`` split into ``mu`` and ``log_sigma``, where ``P`` is the
adjacency with self-loops, row-normalized under mean aggregation (default)
or used as-is under sum aggregation.  Links use a logistic SBM score
``z_u' Lambda_sym z_v``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericError, ValidationError
from .gaussian import kl_standard_gaussian_tensor, reparameterize
from .graph import Graph
from .optim import AdamState, adam_step
from .rng import stream

__all__ = [
    "VgaePlusModel",
    "Posterior",
    "TrainConfig",
    "LossTerms",
    "encode",
    "decode_links",
    "decode_features",
    "classify_nodes",
    "elbo_loss",
    "train",
    "reconstruction_nll",
    "save_checkpoint",
    "load_checkpoint",
    "write_trace",
]

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

PARAM_NAMES = (
    "gin1.weight",
    "gin1.bias",
    "gin2.weight",
    "gin2.bias",
    "lambda",
    "feat.hidden.weight",
    "feat.hidden.bias",
    "feat.out.weight",
    "feat.out.bias",
    "cls.hidden.weight",
    "cls.hidden.bias",
    "cls.out.weight",
    "cls.out.bias",
)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class VgaePlusModel:
    """Parameter container.  ``weights`` are the (alpha, beta, gamma) reconstruction weights."""

    params: dict[str, Tensor]
    n_features: int
    n_classes: int
    embedding_dim: int = 128
    hidden_dim: int = 128
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    aggregation: str = "mean"
    trace: list[dict] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.aggregation not in ("mean", "sum"):
            raise ValidationError(f"unknown aggregation {self.aggregation!r}")
        if any(not 0.0 <= w <= 1.0 for w in self.weights):
            raise ValidationError(f"reconstruction weights must lie in [0, 1], got {self.weights}")

    @classmethod
    def initialize(
        cls,
        n_features: int,
        n_classes: int,
        embedding_dim: int = 128,
        hidden_dim: int = 128,
        seed: int = 0,
        weights=(1.0, 1.0, 1.0),
        aggregation: str = "mean",
    ) -> "VgaePlusModel":
        rng = stream(seed, "init")
        k, l, d, h = n_features, n_classes, embedding_dim, hidden_dim
        shapes = {
            "gin1.weight": (k, h),
            "gin1.bias": (1, h),
            "gin2.weight": (h, 2 * d),
            "gin2.bias": (1, 2 * d),
            "lambda": (d, d),
            "feat.hidden.weight": (d, h),
            "feat.hidden.bias": (1, h),
            "feat.out.weight": (h, k),
            "feat.out.bias": (1, k),
            "cls.hidden.weight": (d, h),
            "cls.hidden.bias": (1, h),
            "cls.out.weight": (h, l),
            "cls.out.bias": (1, l),
        }
        params = {}
        for name in PARAM_NAMES:
            r, c = shapes[name]
            data = np.zeros((r, c)) if name.endswith("bias") else _glorot(rng, r, c)
            params[name] = Tensor(data, requires_grad=True)
        # log_sigma head starts at zero so every node begins at sigma = 1
        params["gin2.weight"].data[:, d:] = 0.0
        return cls(params, k, l, d, h, tuple(float(w) for w in weights), aggregation)

    @classmethod
    def zeros(cls, n_features: int, n_classes: int, embedding_dim: int = 128, hidden_dim: int = 128, **kw):
        """All-zero parameters; every probability it emits is uniform."""
        m = cls.initialize(n_features, n_classes, embedding_dim, hidden_dim, **kw)
        for p in m.params.values():
            p.data[...] = 0.0
        return m

    def parameters(self) -> list[Tensor]:
        return [self.params[n] for n in PARAM_NAMES]

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def lambda_sym(self) -> np.ndarray:
        lam = self.params["lambda"].data
        return 0.5 * (lam + lam.T)

    # numpy forward passes used at query time; leading batch axes are allowed
    def _mlp(self, prefix: str, z: np.ndarray) -> np.ndarray:
        p = self.params
        hid = np.maximum(z @ p[f"{prefix}.hidden.weight"].data + p[f"{prefix}.hidden.bias"].data[0], 0.0)
        return hid @ p[f"{prefix}.out.weight"].data + p[f"{prefix}.out.bias"].data[0]

    def feature_logits(self, z: np.ndarray) -> np.ndarray:
        return self._mlp("feat", z)

    def label_logits(self, z: np.ndarray) -> np.ndarray:
        return self._mlp("cls", z)

    def link_logits(self, z: np.ndarray, pairs: np.ndarray) -> np.ndarray:
        """Bilinear scores for ``pairs`` (m x 2) given ``z`` of shape (..., n, d)."""
        zu = z[..., pairs[:, 0], :]
        zv = z[..., pairs[:, 1], :]
        return np.einsum("...md,de,...me->...m", zu, self.lambda_sym(), zv)


@dataclass
class Posterior:
    """Per-node diagonal Gaussian; fields are graph-attached tensors."""

    mu: Tensor
    log_sigma: Tensor

    def __post_init__(self):
        if self.mu.shape != self.log_sigma.shape:
            raise ValidationError(f"posterior heads differ: {self.mu.shape} vs {self.log_sigma.shape}")

    @property
    def mean(self) -> np.ndarray:
        return self.mu.data

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma.data)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 1e-2
    seed: int = 0
    kl_weight: float | None = None  # None: 1 / N
    link_balance: str = "ratio"  # "ratio": positives weighted by #zeros/#ones; "none"
    alpha_zero: bool = False
    beta_zero: bool = False
    gamma_zero: bool = False
    embedding_dim: int = 128
    hidden_dim: int = 128
    aggregation: str = "mean"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.link_balance not in ("ratio", "none"):
            raise ValidationError(f"unknown link_balance {self.link_balance!r}")

    def effective_weights(self, weights) -> tuple[float, float, float]:
        a, b, g = (float(w) for w in weights)
        return (0.0 if self.alpha_zero else a, 0.0 if self.beta_zero else b, 0.0 if self.gamma_zero else g)


def _check_inputs(model: VgaePlusModel, adjacency: np.ndarray, features: np.ndarray) -> None:
    n = adjacency.shape[0]
    if adjacency.shape != (n, n):
        raise ad.ShapeError(f"encode: adjacency must be square, got {adjacency.shape}")
    if features.shape != (n, model.n_features):
        raise ad.ShapeError(f"encode: features shape {features.shape}, expected {(n, model.n_features)}")


def propagation_matrix(adjacency: np.ndarray, aggregation: str) -> np.ndarray:
    if aggregation == "sum":
        return adjacency
    deg = adjacency.sum(axis=1, keepdims=True)
    return adjacency / np.where(deg > 0, deg, 1.0)


def encode(model: VgaePlusModel, adjacency, features) -> Posterior:
    """Two GIN layers over the given adjacency; node labels are never an input."""
    a = np.asarray(adjacency, dtype=np.float64)
    x = np.asarray(features, dtype=np.float64)
    _check_inputs(model, a, x)
    a = propagation_matrix(a, model.aggregation)
    p = model.params
    d = model.embedding_dim
    h = ad.relu(ad.add(ad.matmul(Tensor(a @ x), p["gin1.weight"]), p["gin1.bias"]))
    out = ad.add(ad.matmul(ad.matmul(Tensor(a), h), p["gin2.weight"]), p["gin2.bias"])
    return Posterior(ad.slice_cols(out, 0, d), ad.slice_cols(out, d, 2 * d))


def _lambda_sym(lam) -> Tensor:
    lam = lam.params["lambda"] if isinstance(lam, VgaePlusModel) else ad.as_tensor(lam)
    return ad.scale(ad.add(lam, ad.transpose(lam)), 0.5)


def link_logits(z, lam) -> Tensor:
    z = ad.as_tensor(z)
    s = ad.matmul(ad.matmul(z, _lambda_sym(lam)), ad.transpose(z))
    # averaging with the transpose makes the matrix symmetric bit for bit
    return ad.scale(ad.add(s, ad.transpose(s)), 0.5)


def decode_links(z, lam) -> Tensor:
    """N x N link probabilities ``logistic(z_u' Lambda_sym z_v)``.

    ``lam`` is the d x d block matrix or a model carrying one.
    """
    return ad.sigmoid(link_logits(z, lam))


def _mlp_logits(z, model: VgaePlusModel, prefix: str) -> Tensor:
    p = model.params
    hid = ad.relu(ad.add(ad.matmul(ad.as_tensor(z), p[f"{prefix}.hidden.weight"]), p[f"{prefix}.hidden.bias"]))
    return ad.add(ad.matmul(hid, p[f"{prefix}.out.weight"]), p[f"{prefix}.out.bias"])


def decode_features(z, model: VgaePlusModel) -> Tensor:
    """N x k Bernoulli probabilities."""
    return ad.sigmoid(_mlp_logits(z, model, "feat"))


def classify_nodes(z, model: VgaePlusModel) -> Tensor:
    """N x l class probabilities."""
    return ad.softmax_rows(_mlp_logits(z, model, "cls"))


@dataclass
class LossTerms:
    total: Tensor
    link_ll: float
    feature_ll: float
    label_ll: float
    kl: float

    def row(self) -> dict:
        return {
            "total_loss": self.total.item(),
            "link_ll": self.link_ll,
            "feature_ll": self.feature_ll,
            "label_ll": self.label_ll,
            "kl": self.kl,
        }


def _bernoulli_ll(logits: Tensor, target: np.ndarray, pos_weight: float = 1.0) -> Tensor:
    """Mean over entries of ``w*y*log p + (1-y)*log(1-p)`` with ``p = sigmoid(logits)``."""
    pos = ad.elementwise_mul(ad.log_sigmoid(logits), Tensor(pos_weight * target))
    neg = ad.elementwise_mul(ad.log_sigmoid(ad.neg(logits)), Tensor(1.0 - target))
    return ad.mean(ad.add(pos, neg))


def _link_pos_weight(adjacency: np.ndarray, mode: str) -> float:
    if mode == "none":
        return 1.0
    ones = adjacency.sum()
    zeros = adjacency.size - ones
    return float(zeros / ones) if ones > 0 and zeros > 0 else 1.0


def _categorical_ll(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean log-probability of the true class over labelled rows (0 if none)."""
    rows = np.flatnonzero(labels.sum(axis=1) > 0)
    if rows.size == 0:
        return Tensor(0.0)
    picked = ad.gather_rows(ad.log_softmax_rows(logits), rows)
    return ad.scale(ad.sum(ad.elementwise_mul(picked, Tensor(labels[rows]))), 1.0 / rows.size)


def _reconstruction_terms(z, model: VgaePlusModel, graph: Graph, link_balance: str):
    w = _link_pos_weight(graph.adjacency, link_balance)
    link_ll = _bernoulli_ll(link_logits(z, model), graph.adjacency, w)
    feat_ll = _bernoulli_ll(_mlp_logits(z, model, "feat"), graph.features)
    label_ll = _categorical_ll(_mlp_logits(z, model, "cls"), graph.labels)
    return link_ll, feat_ll, label_ll


def elbo_loss(model: VgaePlusModel, graph: Graph, noise: np.ndarray, config: TrainConfig) -> LossTerms:
    """Negative weighted ELBO for one reparameterized sample ``z = mu + sigma * noise``.

    Each log-likelihood is averaged over its entries before weighting; link
    positives are up-weighted by the zero/one ratio unless
    ``config.link_balance == "none"``.  Terms with zero weight are left out
    of the total but still reported.
    """
    post = encode(model, graph.adjacency, graph.features)
    z = reparameterize(post.mu, post.log_sigma, noise)
    link_ll, feat_ll, label_ll = _reconstruction_terms(z, model, graph, config.link_balance)
    kl = kl_standard_gaussian_tensor(post.mu, post.log_sigma)
    kl_weight = config.kl_weight if config.kl_weight is not None else 1.0 / graph.n_nodes

    recon = None
    for wgt, term in zip(config.effective_weights(model.weights), (link_ll, feat_ll, label_ll)):
        if wgt == 0.0:
            continue
        piece = ad.scale(term, wgt)
        recon = piece if recon is None else ad.add(recon, piece)
    kl_part = ad.scale(kl, kl_weight)
    total = kl_part if recon is None else ad.sub(kl_part, recon)
    return LossTerms(total, link_ll.item(), feat_ll.item(), label_ll.item(), kl.item())


def train(
    train_graph: Graph,
    config: TrainConfig = TrainConfig(),
    weights=(1.0, 1.0, 1.0),
    model: VgaePlusModel | None = None,
) -> VgaePlusModel:
    """Full-batch Adam on :func:`elbo_loss`, one posterior sample per epoch.

    The per-epoch loss trace is stored on ``model.trace``.
    """
    if model is None:
        model = VgaePlusModel.initialize(
            train_graph.n_features,
            train_graph.n_classes,
            config.embedding_dim,
            config.hidden_dim,
            seed=config.seed,
            weights=weights,
            aggregation=config.aggregation,
        )
    else:
        model.weights = tuple(float(w) for w in weights)
    noise_rng = stream(config.seed, "train-noise")
    opt = AdamState(learning_rate=config.learning_rate)
    params = model.parameters()
    shape = (train_graph.n_nodes, model.embedding_dim)
    model.trace = []
    for epoch in range(config.epochs):
        terms = elbo_loss(model, train_graph, noise_rng.standard_normal(shape), config)
        row = {"epoch": epoch, **terms.row()}
        if not all(np.isfinite(v) for v in row.values()):
            raise NumericError(f"non-finite loss at epoch {epoch}")
        model.trace.append(row)
        terms.total.backward()
        adam_step(opt, params)
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.5f", epoch, row["total_loss"])
    return model


def reconstruction_nll(model: VgaePlusModel, graph: Graph, link_balance: str = "ratio") -> float:
    """Unweighted ``-(link_ll + feature_ll + label_ll)`` at the posterior mean."""
    z = encode(model, graph.adjacency, graph.features).mu.detach()
    link_ll, feat_ll, label_ll = _reconstruction_terms(z, model, graph, link_balance)
    return -(link_ll.item() + feat_ll.item() + label_ll.item())


def save_checkpoint(model: VgaePlusModel, path) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "dims": {"k": model.n_features, "l": model.n_classes, "d": model.embedding_dim, "h": model.hidden_dim},
        "aggregation": model.aggregation,
        "weights": dict(zip(("alpha", "beta", "gamma"), model.weights)),
        "tensors": {
            name: {"shape": list(model.params[name].shape), "data": model.params[name].data.reshape(-1).tolist()}
            for name in PARAM_NAMES
        },
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_checkpoint(path) -> VgaePlusModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint format {payload.get('format_version')!r}")
    dims = payload["dims"]
    params = {}
    for name in PARAM_NAMES:
        t = payload["tensors"][name]
        params[name] = Tensor(np.array(t["data"], dtype=np.float64).reshape(t["shape"]), requires_grad=True)
    w = payload["weights"]
    return VgaePlusModel(
        params,
        dims["k"],
        dims["l"],
        dims["d"],
        dims.get("h", params["gin1.weight"].shape[1]),
        (w["alpha"], w["beta"], w["gamma"]),
        payload.get("aggregation", "mean"),
    )


def write_trace(trace: list[dict], path) -> None:
    cols = ["epoch", "total_loss", "link_ll", "feature_ll", "label_ll", "kl"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in trace:
            writer.writerow({c: repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols})
