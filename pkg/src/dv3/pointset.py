"""3DV point sets: motion grids abstracted to points with multi-temporal features."""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .depth_io import CameraIntrinsics, PointCloud
from .proposal import EmptyRegionError, ProposalRegion, crop
from .rankpool import MotionGrid, plan_splits
from .voxel import GridSpec

DV3P_MAGIC = b"DV3P"
DV3P_VERSION = 1
_HEADER = struct.Struct("<4sIII")


class PointSetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DvPointSet:
    """Points (N, 3) plus motion channels (N, C) ordered global first."""

    xyz: np.ndarray
    motion: np.ndarray
    spec: Optional[GridSpec] = None
    n_splits: int = 0

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        motion = np.asarray(self.motion, dtype=np.float64)
        if motion.ndim != 2 or motion.shape[0] != xyz.shape[0]:
            raise ValueError("motion must be (N, C) with one row per point")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "motion", motion)

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def channels(self) -> int:
        return self.motion.shape[1]

    @property
    def features(self) -> np.ndarray:
        return np.concatenate([self.xyz, self.motion], axis=1)


@dataclass(frozen=True)
class AppearancePointSet:
    xyz: np.ndarray
    split_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "xyz", np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3))

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def motion(self) -> np.ndarray:
        return np.zeros((len(self), 0))


PointSet = Union[DvPointSet, AppearancePointSet]


def assemble(global_grid: MotionGrid, splits: Sequence[MotionGrid] = ()) -> DvPointSet:
    """One point per voxel seen in any grid, features ``(m_G, m_1, ..., m_T1)``.

    Coordinates are voxel indices. Points whose channels are all zero are dropped.
    """
    grids = [global_grid, *splits]
    spec = global_grid.spec
    for g in splits:
        if g.spec != spec:
            raise ValueError("motion grids do not share a grid spec")
    union = np.unique(np.concatenate([g.flat for g in grids]))
    motion = np.zeros((union.size, len(grids)))
    for c, g in enumerate(grids):
        motion[np.searchsorted(union, g.flat), c] = g.motion
    keep = np.any(motion != 0, axis=1)
    union, motion = union[keep], motion[keep]
    xyz = spec.unravel(union).astype(np.float64)
    return DvPointSet(xyz, motion, spec, len(splits))


def xyz_transform(xyz: np.ndarray):
    """Per-axis centers and the shared scale (the y span) of a coordinate set."""
    lo, hi = xyz.min(axis=0), xyz.max(axis=0)
    span = hi[1] - lo[1]
    return (lo + hi) / 2.0, (span if span > 0 else 1.0)


def normalize_xyz(xyz: np.ndarray) -> np.ndarray:
    """Map y to [-0.5, 0.5]; x and z keep their size ratio to y, each centered."""
    center, scale = xyz_transform(xyz)
    return (xyz - center) / scale


def normalize_motion(motion: np.ndarray) -> np.ndarray:
    if motion.size == 0:
        return motion.copy()
    lo, hi = motion.min(), motion.max()
    if hi - lo <= 0:
        return np.zeros_like(motion)
    return (motion - lo) / (hi - lo) - 0.5


def normalize(ps: PointSet) -> PointSet:
    if len(ps) == 0:
        raise ValueError("cannot normalize an empty point set")
    xyz = normalize_xyz(ps.xyz)
    if isinstance(ps, DvPointSet):
        return replace(ps, xyz=xyz, motion=normalize_motion(ps.motion))
    return replace(ps, xyz=xyz)


def normalize_jointly(sets: Sequence[AppearancePointSet]) -> List[AppearancePointSet]:
    """Normalize several sets with the one transform fitted to their union.

    Each set still lies within y in [-0.5, 0.5], and displacement between the
    sets is preserved.
    """
    if not sets or any(len(s) == 0 for s in sets):
        raise ValueError("cannot normalize an empty point set")
    center, scale = xyz_transform(np.concatenate([s.xyz for s in sets]))
    return [replace(s, xyz=(s.xyz - center) / scale) for s in sets]


def middle_frames(T: int, t2: int) -> List[int]:
    return [(start + end) // 2 for start, end in plan_splits(T, t2)]


def appearance_inputs(clouds: Sequence[PointCloud], t2: int,
                      regions: Union[None, ProposalRegion, Sequence[ProposalRegion]] = None,
                      k: Optional[CameraIntrinsics] = None) -> List[AppearancePointSet]:
    """Middle frame of each of ``t2`` temporal splits, cropped and normalized.

    The frames share one normalization so the action's displacement between
    them survives.
    """
    T = len(clouds)
    if T < t2:
        raise ValueError(f"too few frames: T={T} < t2={t2}")
    out = []
    for i, t in enumerate(middle_frames(T, t2)):
        cloud = clouds[t]
        if regions is not None:
            region = regions if isinstance(regions, ProposalRegion) else regions[t]
            if k is None:
                raise ValueError("cropping needs camera intrinsics")
            cloud = crop(cloud, region, k)
        if not len(cloud):
            raise EmptyRegionError(f"empty region in appearance frame {t}")
        out.append(AppearancePointSet(cloud.points, i))
    return normalize_jointly(out)


# -- serialization ------------------------------------------------------------


def to_bytes(ps: PointSet) -> bytes:
    n, c = len(ps), ps.motion.shape[1]
    records = np.concatenate([ps.xyz, ps.motion], axis=1).astype("<f4")
    return _HEADER.pack(DV3P_MAGIC, DV3P_VERSION, n, c) + records.tobytes()


def write_pointset(path, ps: PointSet) -> None:
    Path(path).write_bytes(to_bytes(ps))


def from_bytes(blob: bytes) -> DvPointSet:
    if len(blob) < _HEADER.size:
        raise PointSetFormatError("truncated header")
    magic, version, n, c = _HEADER.unpack_from(blob)
    if magic != DV3P_MAGIC:
        raise PointSetFormatError(f"bad magic {magic!r}")
    if version != DV3P_VERSION:
        raise PointSetFormatError(f"unsupported version {version}")
    need = _HEADER.size + 4 * n * (3 + c)
    if len(blob) < need:
        raise PointSetFormatError(f"truncated: expected {need} bytes, got {len(blob)}")
    rec = np.frombuffer(blob, dtype="<f4", count=n * (3 + c), offset=_HEADER.size)
    rec = rec.reshape(n, 3 + c).astype(np.float64)
    return DvPointSet(rec[:, :3], rec[:, 3:].reshape(n, c), n_splits=max(c - 1, 0))


def read_pointset(path) -> DvPointSet:
    return from_bytes(Path(path).read_bytes())


def write_ply(path, ps: PointSet) -> None:
    c = ps.motion.shape[1]
    names = ["m_global"] + [f"m_split{i}" for i in range(1, c)] if c else []
    header = ["ply", "format ascii 1.0", f"element vertex {len(ps)}",
              "property float x", "property float y", "property float z"]
    header += [f"property float {name}" for name in names]
    header.append("end_header")
    rows = np.concatenate([ps.xyz, ps.motion], axis=1).astype(np.float32)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
