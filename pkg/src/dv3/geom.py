"""Point-set sampling and neighborhood primitives on single clouds.

These are the reference (numpy) versions; :mod:`dv3.net.ops` holds the
batched torch equivalents used during training and is tested against them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class GroupSpec:
    n_centroids: int
    radius: float
    max_neighbors: int

    def __post_init__(self):
        if self.n_centroids < 1 or self.max_neighbors < 1:
            raise ValueError("n_centroids and max_neighbors must be >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be positive")


def farthest_point_sample(points: np.ndarray, k: int, start: int = 0) -> np.ndarray:
    """Greedy max-min selection; ties go to the smallest index."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"cannot sample k={k} of {n} points")
    if not 0 <= start < n:
        raise ValueError(f"start index {start} out of range")
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = start
    mind = np.full(n, np.inf)
    for i in range(1, k):
        d = np.sum((points - points[chosen[i - 1]]) ** 2, axis=1)
        np.minimum(mind, d, out=mind)
        mind[chosen[i - 1]] = -1.0  # selected points never win again
        chosen[i] = int(np.argmax(mind))
    return chosen


def ball_query(points: np.ndarray, center: Sequence[float], radius: float, k: int) -> np.ndarray:
    """Indices within the closed ball, ascending, truncated to the first ``k``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    points = np.asarray(points, dtype=np.float64)
    d2 = np.sum((points - np.asarray(center, dtype=np.float64)) ** 2, axis=1)
    return np.flatnonzero(d2 <= radius * radius)[:k]


def group(points: np.ndarray, features: np.ndarray | None, centroids: Sequence[int],
          spec: GroupSpec) -> np.ndarray:
    """Return (S, K, 3 + F) blocks of centroid-relative coordinates and features.

    Short neighborhoods are padded with their first neighbor; an empty one is
    filled with the centroid itself and zero features.
    """
    points = np.asarray(points, dtype=np.float64)
    n_feat = 0 if features is None else features.shape[1]
    k = spec.max_neighbors
    out = np.zeros((len(centroids), k, 3 + n_feat))
    for s, ci in enumerate(centroids):
        c = points[ci]
        idx = ball_query(points, c, spec.radius, k)
        if idx.size == 0:
            continue  # centroid at relative (0, 0, 0) with zero features
        idx = np.concatenate([idx, np.full(k - idx.size, idx[0], dtype=np.int64)])
        out[s, :, :3] = points[idx] - c
        if n_feat:
            out[s, :, 3:] = features[idx]
    return out
