"""Temporal rank pooling of binary voxel sequences into per-voxel motion values.

Two paths are provided:

* :func:`pool_exact` learns a linear ranker ``w`` over the running averages
  of the occupancy sequence with a pairwise hinge (RankSVM) objective and
  returns ``w`` reshaped onto the lattice.
* :func:`pool_approx` replaces the solve with a fixed linear combination of
  the raw occupancies using harmonic-number coefficients. It is the default
  in the pipeline.

Both return a :class:`MotionGrid` holding values only for voxels that are
occupied in at least one frame.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .voxel import GridSpec, VoxelGrid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MotionGrid:
    spec: GridSpec
    flat: np.ndarray  # sorted flat voxel indices
    motion: np.ndarray  # motion value per entry of ``flat``
    converged: bool = True
    iterations: int = 0

    def __len__(self) -> int:
        return self.flat.size

    def as_dict(self) -> Dict[Tuple[int, int, int], float]:
        ijk = self.spec.unravel(self.flat)
        return {tuple(int(c) for c in v): float(m) for v, m in zip(ijk, self.motion)}


@dataclass
class RankPoolConfig:
    lam: float = 1.0
    max_iters: int = 500
    step_size: float = 0.1
    tol: float = 1e-7
    decay: float = 0.95
    decay_every: int = 50

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class SplitPlan:
    ranges: List[Tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ranges)

    def __iter__(self):
        return iter(self.ranges)


def _check_specs(grids: Sequence[VoxelGrid]) -> GridSpec:
    if not grids:
        raise ValueError("need at least one voxel grid")
    spec = grids[0].spec
    for g in grids[1:]:
        if g.spec != spec:
            raise ValueError("voxel grids do not share a grid spec")
    return spec


def occupancy_matrix(grids: Sequence[VoxelGrid]) -> Tuple[np.ndarray, np.ndarray]:
    """Union of occupied voxels and the dense (T, M) binary occupancy over it."""
    _check_specs(grids)
    flat = np.concatenate([g.flat for g in grids])
    n_cells = grids[0].spec.n_cells
    if n_cells <= max(1 << 22, 8 * flat.size):
        # dense lookup table over the lattice; avoids sorting
        mark = np.zeros(n_cells, dtype=bool)
        mark[flat] = True
        union = np.flatnonzero(mark)
        lookup = np.cumsum(mark) - 1
        col = lookup[flat]
    else:
        union, col = np.unique(flat, return_inverse=True)
    row = np.repeat(np.arange(len(grids)), [g.flat.size for g in grids])
    occ = np.zeros((len(grids), union.size), dtype=np.float64)
    occ[row, col] = 1.0
    return union, occ


def running_averages(grids: Sequence[VoxelGrid]) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(flat, avg)`` where ``avg[t]`` is the mean occupancy of frames ``0..t``."""
    union, occ = occupancy_matrix(grids)
    counts = np.arange(1, len(grids) + 1, dtype=np.float64)[:, None]
    return union, np.cumsum(occ, axis=0) / counts


def approx_coeffs(T: int) -> np.ndarray:
    """alpha_t = 2(T - t + 1) - (T + 1)(H_T - H_{t-1}) for t = 1..T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, T + 1))])
    t = np.arange(1, T + 1)
    return 2.0 * (T - t + 1) - (T + 1) * (harmonic[T] - harmonic[t - 1])


def pool_approx(grids: Sequence[VoxelGrid]) -> MotionGrid:
    spec = _check_specs(grids)
    union, occ = occupancy_matrix(grids)
    # the coefficients sum to zero, so removing each voxel's first value is
    # exact algebra; it makes voxels that never change come out as exactly 0
    return MotionGrid(spec, union, approx_coeffs(len(grids)) @ (occ - occ[:1]))


# -- exact RankSVM pooling ----------------------------------------------------


def rank_objective(w: np.ndarray, X: np.ndarray, lam: float) -> float:
    """(lam/2)|w|^2 + mean over pairs q > t of hinge(1 - S_q + S_t)."""
    T = X.shape[0]
    reg = 0.5 * lam * float(w @ w)
    if T < 2:
        return reg
    s = X @ w
    early, late = np.triu_indices(T, k=1)
    hinge = np.maximum(0.0, 1.0 - s[late] + s[early])
    return reg + 2.0 / (T * (T - 1)) * float(hinge.sum())


def rank_subgradient(w: np.ndarray, X: np.ndarray, lam: float) -> np.ndarray:
    T = X.shape[0]
    grad = lam * w
    if T < 2:
        return grad
    s = X @ w
    # active[a, b] for a < b: pair (later=b, earlier=a) violates the margin
    active = np.triu(1.0 - s[None, :] + s[:, None] > 0, k=1).astype(np.float64)
    # d/dw of hinge = X_earlier - X_later for every active pair
    weight = active.sum(axis=1) - active.sum(axis=0)
    return grad + 2.0 / (T * (T - 1)) * (weight @ X)


def solve_ranksvm(X: np.ndarray, cfg: RankPoolConfig) -> Tuple[np.ndarray, bool, int, List[float]]:
    """Subgradient descent with step decay and monotone step acceptance.

    A step that would raise the objective is rejected and the step size is
    halved, so the accepted objective trace never increases.
    """
    w = np.zeros(X.shape[1])
    obj = rank_objective(w, X, cfg.lam)
    trace = [obj]
    base = cfg.step_size
    shrink = 1.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if it % cfg.decay_every == 0:
            base *= cfg.decay
        g = rank_subgradient(w, X, cfg.lam)
        if not np.any(g):
            converged = True
            break
        cand = w - base * shrink * g
        cand_obj = rank_objective(cand, X, cfg.lam)
        if cand_obj <= obj:
            improvement = obj - cand_obj
            w, obj = cand, cand_obj
            trace.append(obj)
            shrink = min(1.0, shrink * 2.0)
            if improvement < cfg.tol and shrink == 1.0:
                converged = True
                break
        else:
            shrink *= 0.5
            if base * shrink * np.linalg.norm(g) < cfg.tol:
                converged = True
                break
    return w, converged, it, trace


def pool_exact(grids: Sequence[VoxelGrid], cfg: RankPoolConfig | None = None) -> MotionGrid:
    cfg = cfg or RankPoolConfig()
    spec = _check_specs(grids)
    union, avg = running_averages(grids)
    w, converged, iters, _ = solve_ranksvm(avg, cfg)
    if not converged:
        log.warning("rank pooling stopped at max_iters=%d without converging", cfg.max_iters)
    return MotionGrid(spec, union, w, converged=converged, iterations=iters)


def pool(grids: Sequence[VoxelGrid], mode: str = "approx", cfg: RankPoolConfig | None = None) -> MotionGrid:
    if mode == "approx":
        return pool_approx(grids)
    if mode == "exact":
        return pool_exact(grids, cfg)
    raise ValueError(f"unknown pooling mode {mode!r}")


# -- temporal splits ----------------------------------------------------------


def plan_splits(T: int, n_splits: int) -> SplitPlan:
    """Overlapping (~50%) windows covering ``[0, T)``; the last one ends at T."""
    if T < 1 or n_splits < 1:
        raise ValueError("T and n_splits must be >= 1")
    if n_splits == 1:
        return SplitPlan([(0, T)])
    if T < n_splits:
        raise ValueError(f"too few frames: T={T} < n_splits={n_splits}")
    length = max(1, round(2 * T / (n_splits + 1)))
    stride = max(1, round(length / 2))
    ranges = [(i * stride, min(i * stride + length, T)) for i in range(n_splits)]
    ranges[-1] = (ranges[-1][0], T)
    return SplitPlan(ranges)
