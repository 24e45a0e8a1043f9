"""Batched sampling/grouping on padded clouds.

Every cloud in a batch is padded to a common length. ``valid`` marks real,
distinct points; invalid slots are never chosen while a valid point remains
and are never returned as ball-query neighbors. Sampling more points than a
cloud holds repeats the start point, and those repeats are flagged invalid
for the next level, so duplicated inputs cannot crowd out real neighbors.
"""
from __future__ import annotations

from typing import Tuple

import numba
import numpy as np
import torch


def index_points(points: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    """points [B, N, C], idx [B, ...] -> [B, ..., C]"""
    B = points.shape[0]
    batch = torch.arange(B, device=points.device).view(B, *([1] * (idx.dim() - 1)))
    return points[batch, idx]


@numba.njit(cache=True)
def _fps_kernel(xyz, valid, k, start):
    B, N, _ = xyz.shape
    idx = np.empty((B, k), dtype=np.int64)
    picked = np.empty((B, k), dtype=np.bool_)
    mind = np.empty(N, dtype=np.float64)
    for b in range(B):
        for j in range(N):
            mind[j] = np.inf if valid[b, j] else -1.0
        far = start
        gain = np.inf
        for i in range(k):
            idx[b, i] = far
            picked[b, i] = gain > 0
            px, py, pz = xyz[b, far, 0], xyz[b, far, 1], xyz[b, far, 2]
            mind[far] = -1.0
            gain = -np.inf
            nxt = 0
            for j in range(N):
                if mind[j] > 0:
                    dx = xyz[b, j, 0] - px
                    dy = xyz[b, j, 1] - py
                    dz = xyz[b, j, 2] - pz
                    d = dx * dx + dy * dy + dz * dz
                    if d < mind[j]:
                        mind[j] = d
                if mind[j] > gain:
                    gain = mind[j]
                    nxt = j
            far = nxt
    return idx, picked


def farthest_point_sample(xyz: torch.Tensor, k: int, valid: torch.Tensor | None = None,
                          start: int = 0) -> Tuple[torch.Tensor, torch.Tensor]:
    """Return sampled indices [B, k] and their validity [B, k].

    A pick is valid when it is the first one or lies at a positive distance
    from every earlier pick. Ties go to the smallest index.
    """
    B, N, _ = xyz.shape
    pts = xyz.detach().to(torch.float64).numpy()
    mask = np.ones((B, N), dtype=bool) if valid is None else valid.numpy()
    idx, picked = _fps_kernel(pts, mask, k, start)
    return torch.from_numpy(idx), torch.from_numpy(picked)


@numba.njit(cache=True)
def _ball_query_kernel(xyz, centers, valid, r2, k):
    B, N, _ = xyz.shape
    S = centers.shape[1]
    idx = np.zeros((B, S, k), dtype=np.int64)
    empty = np.zeros((B, S), dtype=np.bool_)
    for b in range(B):
        for s in range(S):
            cx, cy, cz = centers[b, s, 0], centers[b, s, 1], centers[b, s, 2]
            n = 0
            for j in range(N):
                if not valid[b, j]:
                    continue
                dx = xyz[b, j, 0] - cx
                dy = xyz[b, j, 1] - cy
                dz = xyz[b, j, 2] - cz
                if dx * dx + dy * dy + dz * dz <= r2:
                    idx[b, s, n] = j
                    n += 1
                    if n == k:
                        break
            if n == 0:
                empty[b, s] = True
            for m in range(n, k):
                idx[b, s, m] = idx[b, s, 0]
    return idx, empty


def ball_query(xyz: torch.Tensor, centers: torch.Tensor, radius: float, k: int,
               valid: torch.Tensor | None = None) -> Tuple[torch.Tensor, torch.Tensor]:
    """Closed-ball neighbors in ascending index order, padded with the first one.

    Returns idx [B, S, k] and ``empty`` [B, S] for centers with no neighbor
    (their rows point at index 0 and must be replaced by the caller).
    """
    B, N, _ = xyz.shape
    mask = np.ones((B, N), dtype=bool) if valid is None else valid.numpy()
    idx, empty = _ball_query_kernel(xyz.detach().to(torch.float64).numpy(),
                                    centers.detach().to(torch.float64).numpy(),
                                    mask, float(radius) ** 2, k)
    return torch.from_numpy(idx), torch.from_numpy(empty)


def group(xyz: torch.Tensor, feats: torch.Tensor | None, center_idx: torch.Tensor,
          radius: float, k: int, valid: torch.Tensor | None = None) -> torch.Tensor:
    """[B, S, k, 3 + F] blocks of centroid-relative coords and neighbor features."""
    centers = index_points(xyz, center_idx)
    idx, empty = ball_query(xyz, centers, radius, k, valid)
    rel = index_points(xyz, idx) - centers.unsqueeze(2)
    parts = [rel]
    if feats is not None and feats.shape[-1]:
        parts.append(index_points(feats, idx))
    out = torch.cat(parts, dim=-1)
    if empty.any():
        out = out.masked_fill(empty[..., None, None], 0.0)
    return out
