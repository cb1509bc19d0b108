"""Synthetic clustered unit vectors, a stand-in for a multi-topic corpus."""

from __future__ import annotations

import numpy as np

GENERATOR = "PCG64"


def clustered_vectors(dims: int, docs: int, clusters: int, sigma: float, seed: int) -> np.ndarray:
    """Unit vectors scattered around ``clusters`` random unit centers.

    Document ``i`` belongs to cluster ``i % clusters`` and equals
    ``normalize(center + sigma * noise)`` with ``noise`` standard normal per
    coordinate. At 400 dims and sigma 0.3 the noise dominates the center,
    so near neighbours are only loosely tied to their cluster.
    """
    if dims < 1 or docs < 1 or clusters < 1:
        raise ValueError("dims, docs and clusters must be >= 1")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = rng.standard_normal((clusters, dims))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    noise = rng.standard_normal((docs, dims)) * sigma
    rows = centers[np.arange(docs) % clusters] + noise
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows


def random_unit_vectors(dims: int, docs: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = rng.standard_normal((docs, dims))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)
