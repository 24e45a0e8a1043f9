"""Shared generators for tests."""
import numpy as np

from dv3.voxel import GridSpec, VoxelGrid


def grids_from_occupancy(occ: np.ndarray):
    """(T, M) binary matrix -> T voxel grids on an (M, 1, 1) lattice."""
    T, M = occ.shape
    spec = GridSpec(np.zeros(3), np.array([M, 1, 1]), 35.0)
    return [VoxelGrid(spec, np.flatnonzero(occ[t])) for t in range(T)]


def interval_sequence(rng, T=16, M=200, flip=0.05):
    """Each voxel is on during one random interval, with a few random flips."""
    occ = np.zeros((T, M))
    for m in range(M):
        a, b = np.sort(rng.integers(0, T + 1, 2))
        if a == b:
            b = min(T, a + 1)
        occ[a:b, m] = 1
    occ = np.where(rng.random(occ.shape) < flip, 1 - occ, occ)
    occ[:, occ.sum(0) == 0] = 0
    return occ
