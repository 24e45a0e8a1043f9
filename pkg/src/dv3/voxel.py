"""Binary occupancy grids over a lattice shared by every frame of a video."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .depth_io import PointCloud

DEFAULT_VOXEL_SIZE = 35.0


@dataclass(frozen=True)
class GridSpec:
    origin: Tuple[float, float, float]
    dims: Tuple[int, int, int]
    voxel_size: float = DEFAULT_VOXEL_SIZE

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive counts, got {self.dims}")
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def n_cells(self) -> int:
        w, h, d = self.dims
        return w * h * d

    def ravel(self, ijk: np.ndarray) -> np.ndarray:
        ijk = np.asarray(ijk, dtype=np.int64).reshape(-1, 3)
        return np.ravel_multi_index((ijk[:, 0], ijk[:, 1], ijk[:, 2]), self.dims)

    def unravel(self, flat: np.ndarray) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat, dtype=np.int64), self.dims), axis=1)


@dataclass(frozen=True)
class VoxelGrid:
    """Occupied cells of ``spec`` stored as sorted unique flat indices."""

    spec: GridSpec
    flat: np.ndarray

    def __post_init__(self):
        flat = np.unique(np.asarray(self.flat, dtype=np.int64))
        if flat.size and (flat[0] < 0 or flat[-1] >= self.spec.n_cells):
            raise ValueError("voxel index outside grid")
        flat.setflags(write=False)
        object.__setattr__(self, "flat", flat)

    def __len__(self) -> int:
        return self.flat.size

    @property
    def occupied(self) -> np.ndarray:
        """(M, 3) integer voxel indices."""
        return self.spec.unravel(self.flat)

    def __eq__(self, other):
        return (isinstance(other, VoxelGrid) and self.spec == other.spec
                and np.array_equal(self.flat, other.flat))

    __hash__ = None


def fit_grid(clouds: Sequence[PointCloud], voxel_size: float = DEFAULT_VOXEL_SIZE) -> GridSpec:
    """Bounding lattice of the union of all clouds."""
    non_empty = [c.points for c in clouds if len(c)]
    if not non_empty:
        raise ValueError("cannot fit a grid: all clouds are empty")
    lo = np.min([p.min(axis=0) for p in non_empty], axis=0)
    hi = np.max([p.max(axis=0) for p in non_empty], axis=0)
    dims = np.maximum(np.ceil((hi - lo) / voxel_size), 1).astype(np.int64)
    return GridSpec(tuple(lo), tuple(dims), voxel_size)


def voxelize(cloud: PointCloud, spec: GridSpec) -> VoxelGrid:
    if not len(cloud):
        return VoxelGrid(spec, np.zeros(0, dtype=np.int64))
    ijk = np.floor((cloud.points - np.asarray(spec.origin)) / spec.voxel_size).astype(np.int64)
    np.clip(ijk, 0, np.asarray(spec.dims) - 1, out=ijk)
    return VoxelGrid(spec, spec.ravel(ijk))
