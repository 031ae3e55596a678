"""Seeded synthetic datasets for tests, demos and the CLI."""

from __future__ import annotations

import numpy as np


def regression(n: int, rng, informative: int = 1, noise_features: int = 1, noise: float = 0.1):
    """Features uniform on [0, 1]; the target is a monotone step-like signal of the informative columns.

    Returns ``(X, y)`` with ``X`` of shape ``(n, informative + noise_features)``.
    """
    X = rng.uniform(0.0, 1.0, size=(n, informative + noise_features))
    signal = np.sum(np.sqrt(X[:, :informative]) * 3.0, axis=1)
    return X, signal + rng.normal(0.0, noise, size=n)


def classification(n: int, rng, informative: int = 2, noise_features: int = 1, flip: float = 0.05):
    """Binary labels from a linear threshold on the informative columns, with label noise."""
    X = rng.uniform(0.0, 1.0, size=(n, informative + noise_features))
    score = X[:, :informative] @ np.linspace(1.0, 2.0, informative)
    y = (score > np.median(score)).astype(float)
    flips = rng.random(n) < flip
    y[flips] = 1.0 - y[flips]
    return X, y


def uniform_values(n: int, domain, rng) -> np.ndarray:
    return rng.integers(domain.L, domain.R + 1, size=n)


def two_cluster_values(n: int, domain, rng, spread: float = 0.08) -> np.ndarray:
    """Half the values near the lower quarter of the domain, half near the upper quarter."""
    width = domain.R - domain.L
    centers = np.where(np.arange(n) % 2 == 0, domain.L + 0.25 * width, domain.L + 0.75 * width)
    v = np.rint(centers + rng.normal(0.0, spread * width, size=n))
    return np.clip(v, domain.L, domain.R).astype(np.int64)


def normal_values(n: int, domain, rng, spread: float = 0.15) -> np.ndarray:
    width = domain.R - domain.L
    v = np.rint(domain.L + 0.5 * width + rng.normal(0.0, spread * width, size=n))
    return np.clip(v, domain.L, domain.R).astype(np.int64)
