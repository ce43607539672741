"""Driftless geometric Brownian motion for the marginal price."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidData, InvalidParameter


@dataclass(frozen=True)
class GbmParams:
    """Per-step volatility ``sigma`` and initial marginal price ``P_0``."""

    sigma: float
    initial_price: float

    def __post_init__(self) -> None:
        if not self.sigma >= 0.0:
            raise InvalidParameter(f"sigma must be nonnegative, got {self.sigma!r}")
        if not self.initial_price > 0.0:
            raise InvalidParameter(f"initial_price must be positive, got {self.initial_price!r}")


def estimate_sigma(marginal_prices) -> float:
    """Sample standard deviation (``ddof=1``) of one-step log returns."""
    prices = np.asarray(marginal_prices, dtype=float)
    if prices.ndim != 1 or prices.size < 2:
        raise InvalidData("need at least two prices to estimate volatility")
    if not np.all(prices > 0.0):
        bad = int(np.argmax(~(prices > 0.0)))
        raise InvalidData(f"price at index {bad} is not positive: {prices[bad]!r}")
    returns = np.diff(np.log(prices))
    if returns.size == 1:
        return 0.0
    return float(np.std(returns, ddof=1))


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for path ``index``; depends only on ``(seed, index)``."""
    return np.random.default_rng([int(seed), int(index)])


def sample_gbm_paths(params: GbmParams, num_paths: int, horizon: int, seed: int) -> np.ndarray:
    """Sample sqrt-price paths of shape ``(num_paths, horizon + 1)``.

    The marginal price follows ``dP = sigma P dW``, i.e.
    ``P_t = P_{t-1} exp(-sigma**2 / 2 + sigma Z_t)``, so ``E[P_t] = P_0``.
    Path ``i`` is drawn from its own generator seeded by ``(seed, i)``, which
    makes any subset of paths reproducible regardless of batching.
    """
    if num_paths < 1 or horizon < 1:
        raise InvalidParameter("num_paths and horizon must both be at least 1")
    sigma = params.sigma
    shocks = np.empty((num_paths, horizon))
    for i in range(num_paths):
        shocks[i] = path_rng(seed, i).standard_normal(horizon)
    log_steps = -0.5 * sigma * sigma + sigma * shocks
    growth = np.concatenate([np.zeros((num_paths, 1)), np.cumsum(log_steps, axis=1)], axis=1)
    paths = math.sqrt(params.initial_price) * np.exp(0.5 * growth)
    return paths
