"""Bayesian optimisation of the reconstruction weights over the unit cube.

A Gaussian-process surrogate (RBF kernel, constant mean, fitted noise)
drives an Expected Improvement search.  Everything is deterministic given
the seed.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from .errors import NumericError, ValidationError
from .graph import Graph
from .model import TrainConfig, reconstruction_nll, train
from .rng import stream

__all__ = [
    "GaussianProcess",
    "BoState",
    "expected_improvement",
    "tune_weights",
    "validation_objective",
    "mock_objective",
    "write_tuning_trace",
    "N_INITIAL",
]

log = logging.getLogger(__name__)

N_INITIAL = 8
N_CANDIDATES = 2048
INNER_EPOCHS = 100


def _rbf(a: np.ndarray, b: np.ndarray, lengths: np.ndarray, signal: float) -> np.ndarray:
    d = (a[:, None, :] - b[None, :, :]) / lengths
    return signal * np.exp(-0.5 * np.sum(d * d, axis=-1))


@dataclass
class GaussianProcess:
    """Exact GP regression with hyperparameters ``(lengths, signal, noise, mean)``."""

    lengths: np.ndarray
    signal: float
    noise: float
    mean: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    _chol: tuple = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)
    theta: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        k = _rbf(self.x, self.x, self.lengths, self.signal)
        jitter = 1e-12 * max(self.signal, 1.0)
        while True:
            try:
                self._chol = cho_factor(k + (self.noise + jitter) * np.eye(len(self.x)), lower=True)
                break
            except np.linalg.LinAlgError:
                if jitter > 1e-3 * max(self.signal, 1.0):
                    raise NumericError("GP kernel matrix is not positive definite")
                jitter *= 10.0
        self._alpha = cho_solve(self._chol, self.y - self.mean)

    def predict(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation of the latent function at ``xs``."""
        xs = np.atleast_2d(xs)
        ks = _rbf(xs, self.x, self.lengths, self.signal)
        mu = self.mean + ks @ self._alpha
        v = cho_solve(self._chol, ks.T)
        var = self.signal - np.sum(ks * v.T, axis=1)
        return mu, np.sqrt(np.maximum(var, 0.0))

    @staticmethod
    def neg_log_marginal(theta: np.ndarray, sq: np.ndarray, y: np.ndarray, noise: float | None) -> float:
        """Negative log marginal likelihood; ``sq`` holds per-dimension squared distances."""
        dim, n = sq.shape[0], sq.shape[1]
        if max(abs(t) for t in theta[:-1]) > 25.0:
            return 1e25
        inv = np.exp(-2.0 * theta[:dim])
        signal = np.exp(theta[dim])
        nz = noise if noise is not None else np.exp(theta[dim + 1])
        k = signal * np.exp(-0.5 * (inv @ sq.reshape(dim, -1))).reshape(n, n)
        k.flat[:: n + 1] += nz + 1e-12
        try:
            c = np.linalg.cholesky(k)
        except np.linalg.LinAlgError:
            return 1e25
        r = y - theta[-1]
        w = solve_triangular(c, r, lower=True, check_finite=False)
        return float(0.5 * w @ w + np.sum(np.log(np.diag(c))) + 0.5 * len(y) * np.log(2 * np.pi))

    @classmethod
    def fit(cls, x, y, seed: int = 0, noise: float | None = None, restarts: int = 3, init=None) -> "GaussianProcess":
        """Maximise the log marginal likelihood with multi-start Nelder-Mead.

        ``noise`` pins the noise variance; otherwise it is fitted.  ``init``
        (a previous fit's ``theta``) is tried as an extra starting point.
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        dim = x.shape[1]
        ystd = max(float(np.std(y)), 1e-12)
        rng = stream(seed, "gp-fit")
        sq = np.stack([(x[:, i, None] - x[None, :, i]) ** 2 for i in range(dim)])
        base = [np.log(0.3)] * dim + [np.log(ystd**2)]
        if noise is None:
            base.append(np.log(1e-4 * ystd**2))
        base.append(float(np.mean(y)))
        base = np.array(base)
        starts = [base]
        if init is not None and len(init) == len(base):
            starts.append(np.asarray(init, dtype=np.float64))
        for _ in range(restarts - 1):
            start = base.copy()
            start[: dim + 1] += rng.normal(0.0, 1.0, dim + 1)
            if noise is None:
                start[dim + 1] += rng.normal(0.0, 2.0)
            starts.append(start)
        best = None
        for start in starts:
            res = minimize(
                cls.neg_log_marginal,
                start,
                args=(sq, y, noise),
                method="Nelder-Mead",
                options={"maxiter": 120 * len(start), "xatol": 1e-4, "fatol": 1e-7},
            )
            if best is None or res.fun < best.fun:
                best = res
        theta = best.x
        # keep hyperparameters in a numerically sane band
        lengths = np.clip(np.exp(theta[:dim]), 1e-3, 1e3)
        signal = float(np.clip(np.exp(theta[dim]), 1e-12 * ystd**2 + 1e-300, 1e6 * ystd**2))
        nz = noise if noise is not None else float(np.clip(np.exp(theta[dim + 1]), 1e-10, 1e2 * ystd**2))
        return cls(lengths, signal, nz, float(theta[-1]), x, y, theta=theta)


def expected_improvement(gp: GaussianProcess, xs: np.ndarray, best: float) -> np.ndarray:
    """EI for minimisation; zero wherever the posterior is degenerate."""
    mu, sd = gp.predict(xs)
    imp = best - mu
    out = np.zeros_like(mu)
    # a point whose latent variance is within the noise floor is already known
    ok = sd * sd > 2.0 * gp.noise + 1e-24
    z = imp[ok] / sd[ok]
    out[ok] = imp[ok] * norm.cdf(z) + sd[ok] * norm.pdf(z)
    return np.maximum(out, 0.0)


@dataclass
class BoState:
    budget: int
    seed: int
    points: list[tuple[float, float, float]] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    gp: GaussianProcess | None = None

    def add(self, w, value: float) -> None:
        w = tuple(float(v) for v in w)
        if not all(0.0 <= v <= 1.0 for v in w):
            raise ValidationError(f"weights {w} outside [0,1]^3")
        if not np.isfinite(value):
            raise NumericError(f"objective not finite at {w}")
        self.points.append(w)
        self.values.append(float(value))

    @property
    def best(self) -> tuple[tuple[float, float, float], float]:
        i = int(np.argmin(self.values))
        return self.points[i], self.values[i]

    def trace(self) -> list[tuple]:
        rows, run = [], np.inf
        for i, (w, v) in enumerate(zip(self.points, self.values)):
            run = min(run, v)
            rows.append((i, *w, v, run))
        return rows


def _next_point(state: BoState, iteration: int) -> np.ndarray:
    x = np.array(state.points)
    y = np.array(state.values)
    # standardise so the prior scales are sensible
    mu, sd = y.mean(), max(y.std(), 1e-12)
    prev = state.gp.theta if state.gp is not None else None
    gp = GaussianProcess.fit(x, (y - mu) / sd, seed=state.seed + iteration, init=prev)
    state.gp = gp
    best = (y.min() - mu) / sd
    cands = qmc.Sobol(3, scramble=True, seed=stream(state.seed, f"bo-candidates/{iteration}")).random(N_CANDIDATES)
    ei = expected_improvement(gp, cands, best)
    start = cands[int(np.argmax(ei))]
    res = minimize(
        lambda p: -expected_improvement(gp, np.clip(p, 0, 1)[None, :], best)[0],
        start,
        method="L-BFGS-B",
        bounds=[(0.0, 1.0)] * 3,
    )
    cand = np.clip(res.x, 0.0, 1.0)
    if -res.fun < ei.max():
        cand = start
    # a repeat evaluation teaches the surrogate nothing; fall back to the best unseen candidate
    if np.min(np.max(np.abs(x - cand), axis=1)) < 1e-9:
        order = np.argsort(-ei, kind="stable")
        for j in order:
            if np.min(np.max(np.abs(x - cands[j]), axis=1)) >= 1e-9:
                cand = cands[j]
                break
    return cand


def tune_weights(
    objective: Callable[[tuple[float, float, float]], float],
    budget: int = 25,
    seed: int = 0,
    state: BoState | None = None,
) -> tuple[tuple[float, float, float], BoState]:
    """Minimise ``objective`` over ``[0,1]^3`` with at most ``budget`` calls.

    The first eight points are a scrambled Sobol design; the rest maximise
    Expected Improvement.  Returns the best evaluated point and the state.
    """
    if budget < N_INITIAL:
        raise ValidationError(f"budget must be at least {N_INITIAL}, got {budget}")
    state = state or BoState(budget=budget, seed=seed)
    design = qmc.Sobol(3, scramble=True, seed=stream(seed, "bo-initial")).random(N_INITIAL)
    for w in design:
        state.add(w, objective(tuple(float(v) for v in w)))
    for it in range(budget - N_INITIAL):
        w = _next_point(state, it)
        state.add(w, objective(tuple(float(v) for v in w)))
        log.debug("bo iter %d: %s -> %.6g", it, w, state.values[-1])
    return state.best[0], state


def validation_objective(weights, train_graph: Graph, val_graph: Graph, config: TrainConfig | None = None) -> float:
    """Train with ``weights`` and return the unweighted reconstruction NLL on ``val_graph``."""
    w = tuple(float(v) for v in weights)
    if len(w) != 3 or not all(0.0 <= v <= 1.0 for v in w):
        raise ValidationError(f"weights must lie in [0,1]^3, got {w}")
    config = config or replace(TrainConfig(), epochs=INNER_EPOCHS)
    model = train(train_graph, config, weights=w)
    return reconstruction_nll(model, val_graph, config.link_balance)


def mock_objective(w) -> float:
    """Quadratic with its minimum at (0.3, 0.7, 0.5)."""
    a, b, g = w
    return (a - 0.3) ** 2 + (b - 0.7) ** 2 + (g - 0.5) ** 2


def write_tuning_trace(state: BoState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "alpha", "beta", "gamma", "objective", "best_so_far"])
        for row in state.trace():
            w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
