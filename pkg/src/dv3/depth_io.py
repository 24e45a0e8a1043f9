"""Depth frame decoding and pinhole back-projection.

Depth values are millimeters stored as 16-bit integers; 0 marks an invalid
pixel. Camera coordinates are x right, y up, z forward.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np
from PIL import Image

D16_MAGIC = b"DV3D"
D16_VERSION = 1
_D16_HEADER = struct.Struct("<4sIIII")

FORMATS = ("png", "d16")


class DepthIOError(ValueError):
    pass


@dataclass(frozen=True)
class DepthFrame:
    data: np.ndarray  # (height, width) uint16, millimeters
    timestamp_index: int = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DepthIOError("depth data must be a 2D raster")
        if data.dtype != np.uint16:
            if np.any(data < 0):
                raise DepthIOError("negative depth value")
            data = data.astype(np.uint16)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DepthIOError("focal lengths must be positive")

    @classmethod
    def default_for(cls, width: int, height: int, focal: float = 280.0) -> "CameraIntrinsics":
        return cls(focal, focal, width / 2.0, height / 2.0)

    def project(self, points: np.ndarray) -> np.ndarray:
        """Forward-project camera points (N, 3) to continuous pixel coords (N, 2)."""
        points = np.asarray(points, dtype=np.float64)
        z = points[:, 2]
        u = points[:, 0] * self.fx / z + self.cx
        v = -points[:, 1] * self.fy / z + self.cy
        return np.stack([u, v], axis=1)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (N, 3) float64, millimeters

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.size and np.any(pts[:, 2] <= 0):
            raise DepthIOError("point cloud contains z <= 0")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)))


def back_project(frame: DepthFrame, k: CameraIntrinsics) -> PointCloud:
    """Lift every nonzero depth pixel to a 3D point in camera coordinates."""
    v, u = np.nonzero(frame.data)
    d = frame.data[v, u].astype(np.float64)
    x = (u - k.cx) * d / k.fx
    y = -(v - k.cy) * d / k.fy
    return PointCloud(np.stack([x, y, d], axis=1))


def load_intrinsics(path) -> CameraIntrinsics:
    from .config import read_kv_file

    path = Path(path)
    if not path.is_file():
        raise DepthIOError(f"intrinsics file not found: {path}")
    values = read_kv_file(path)
    try:
        return CameraIntrinsics(*(float(values[key]) for key in ("fx", "fy", "cx", "cy")))
    except KeyError as exc:
        raise DepthIOError(f"{path}: missing intrinsics key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise DepthIOError(f"{path}: {exc}") from None


# -- containers ---------------------------------------------------------------


def read_png(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            arr = np.array(img)
    except OSError as exc:
        raise DepthIOError(f"unreadable file {path}: {exc}") from None
    if arr.ndim != 2:
        raise DepthIOError(f"{path}: expected single-channel depth image")
    return arr.astype(np.uint16)


def write_png(path, data: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(data, dtype=np.uint16)).save(path)


def read_d16(path) -> List[np.ndarray]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DepthIOError(f"unreadable file {path}: {exc}") from None
    if len(blob) < _D16_HEADER.size:
        raise DepthIOError(f"{path}: truncated header")
    magic, version, width, height, count = _D16_HEADER.unpack_from(blob)
    if magic != D16_MAGIC:
        raise DepthIOError(f"{path}: bad magic {magic!r}")
    if version != D16_VERSION:
        raise DepthIOError(f"{path}: unsupported version {version}")
    n = width * height
    expected = _D16_HEADER.size + 2 * n * count
    if len(blob) < expected:
        raise DepthIOError(f"{path}: truncated frame data")
    body = np.frombuffer(blob, dtype="<u2", count=n * count, offset=_D16_HEADER.size)
    return [body[i * n:(i + 1) * n].reshape(height, width).astype(np.uint16) for i in range(count)]


def write_d16(path, frames: Sequence[DepthFrame]) -> None:
    if not frames:
        raise DepthIOError("zero frames")
    h, w = frames[0].height, frames[0].width
    with open(path, "wb") as fh:
        fh.write(_D16_HEADER.pack(D16_MAGIC, D16_VERSION, w, h, len(frames)))
        for f in frames:
            if (f.height, f.width) != (h, w):
                raise DepthIOError("inconsistent resolution")
            fh.write(f.data.astype("<u2").tobytes())


def guess_format(path) -> str:
    path = Path(path)
    if path.is_dir():
        return "png"
    if path.suffix.lower() == ".d16":
        return "d16"
    raise DepthIOError(f"cannot infer depth format for {path}")


def decode_depth_sequence(path, format: str | None = None) -> List[DepthFrame]:
    """Read all frames of one depth video, ordered by frame index."""
    path = Path(path)
    if not path.exists():
        raise DepthIOError(f"no such file or directory: {path}")
    format = format or guess_format(path)
    if format == "png":
        if not path.is_dir():
            raise DepthIOError(f"png format expects a directory: {path}")
        names = sorted(n for n in os.listdir(path) if n.lower().endswith(".png"))
        rasters = [read_png(path / n) for n in names]
    elif format == "d16":
        rasters = read_d16(path)
    else:
        raise DepthIOError(f"unsupported format {format!r}; expected one of {FORMATS}")
    if not rasters:
        raise DepthIOError(f"{path}: zero frames")
    shape = rasters[0].shape
    for r in rasters:
        if r.shape != shape:
            raise DepthIOError(f"{path}: inconsistent resolution {r.shape[::-1]} vs {shape[::-1]}")
    return [DepthFrame(r, i) for i, r in enumerate(rasters)]
