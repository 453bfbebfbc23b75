"""Diagonal Gaussian helpers: KL to the standard normal and reparameterized draws."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .rng import stream

__all__ = ["kl_standard_gaussian", "kl_standard_gaussian_tensor", "sample_gaussian", "reparameterize"]


def kl_standard_gaussian_tensor(mu: Tensor, log_sigma: Tensor) -> Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) summed over all entries, as a graph node."""
    var = ad.exp(ad.scale(log_sigma, 2.0))
    inner = ad.sub(ad.add(ad.elementwise_mul(mu, mu), var), ad.scale(log_sigma, 2.0))
    return ad.scale(ad.sub(ad.sum(inner), float(mu.data.size)), 0.5)


def kl_standard_gaussian(mu, log_sigma) -> float:
    mu = np.asarray(mu.data if isinstance(mu, Tensor) else mu, dtype=np.float64)
    ls = np.asarray(log_sigma.data if isinstance(log_sigma, Tensor) else log_sigma, dtype=np.float64)
    # expm1 keeps precision when log_sigma is near zero
    return float(0.5 * np.sum(mu * mu + np.expm1(2.0 * ls) - 2.0 * ls))


def reparameterize(mu: Tensor, log_sigma: Tensor, noise: np.ndarray) -> Tensor:
    """``mu + exp(log_sigma) * noise`` keeping the gradient path to both heads."""
    if noise.shape != mu.shape:
        raise ad.ShapeError(f"reparameterize: noise shape {noise.shape} != {mu.shape}")
    return ad.add(mu, ad.elementwise_mul(ad.exp(log_sigma), Tensor(noise)))


def sample_gaussian(mu, log_sigma, rng_seed: int | np.random.Generator) -> np.ndarray:
    """One draw ``mu + sigma * eps``; ``log_sigma = -inf`` gives ``mu`` exactly."""
    mu = np.asarray(mu.data if isinstance(mu, Tensor) else mu, dtype=np.float64)
    ls = np.asarray(log_sigma.data if isinstance(log_sigma, Tensor) else log_sigma, dtype=np.float64)
    if mu.shape != ls.shape:
        raise ValueError(f"sample_gaussian: shapes differ {mu.shape} vs {ls.shape}")
    gen = rng_seed if isinstance(rng_seed, np.random.Generator) else stream(rng_seed, "sample_gaussian")
    eps = gen.standard_normal(mu.shape)
    sigma = np.exp(ls)
    return mu + np.where(sigma == 0.0, 0.0, sigma * eps)
