"""Procedural depth clips of a sphere moving in front of a flat wall.

Eight classes: translation along +-x, +-y, toward/away from the camera, a
lateral oscillation over one full period, and a static sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .depth_io import CameraIntrinsics, DepthFrame, write_d16
from .proposal import BBox, write_bbox_file

CLASS_NAMES = (
    "translate_+x", "translate_-x", "translate_+y", "translate_-y",
    "approach", "recede", "oscillate", "static",
)
N_CLASSES = len(CLASS_NAMES)
WALL_GAP = 1500.0


class OutOfViewError(ValueError):
    def __init__(self, msg: str = "out of view"):
        super().__init__(msg)


@dataclass(frozen=True)
class SynthSpec:
    class_id: int
    frames: int = 24
    width: int = 160
    height: int = 120
    radius: float = 150.0
    noise: float = 0.0
    seed: int = 0
    vary: bool = True  # per-seed jitter of start position, size and travel

    def __post_init__(self):
        if not 0 <= self.class_id < N_CLASSES:
            raise ValueError(f"class_id must be in [0, {N_CLASSES})")
        if self.frames < 8:
            raise ValueError("need at least 8 frames")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.default_for(self.width, self.height)


def trajectory(spec: SynthSpec) -> Tuple[np.ndarray, float]:
    """Sphere centers (T, 3) in camera millimeters and the sphere radius."""
    rng = np.random.default_rng([spec.seed, spec.class_id, 7])
    if spec.vary:
        x0, y0 = rng.uniform(-40, 40), rng.uniform(-25, 25)
        z0 = rng.uniform(1900, 2200)
        radius = spec.radius * rng.uniform(0.87, 1.13)
        travel_x, travel_y, travel_z = rng.uniform(250, 350), rng.uniform(200, 300), rng.uniform(400, 600)
    else:
        x0, y0, z0, radius = 0.0, 0.0, 2000.0, spec.radius
        travel_x, travel_y, travel_z = 300.0, 250.0, 500.0
    s = np.linspace(0.0, 1.0, spec.frames)
    centers = np.tile([x0, y0, z0], (spec.frames, 1)).astype(np.float64)
    ramp = s - 0.5
    name = CLASS_NAMES[spec.class_id]
    if name == "translate_+x":
        centers[:, 0] += travel_x * ramp
    elif name == "translate_-x":
        centers[:, 0] -= travel_x * ramp
    elif name == "translate_+y":
        centers[:, 1] += travel_y * ramp
    elif name == "translate_-y":
        centers[:, 1] -= travel_y * ramp
    elif name == "approach":
        centers[:, 2] -= travel_z * ramp
    elif name == "recede":
        centers[:, 2] += travel_z * ramp
    elif name == "oscillate":
        centers[:, 0] += 0.5 * travel_x * np.sin(2.0 * math.pi * s)
    return centers, radius


def _sphere_box(center, radius: float, k: CameraIntrinsics) -> Tuple[float, float, float, float]:
    x, y, z = center
    if z - radius <= 0:
        raise OutOfViewError()
    u, v = x * k.fx / z + k.cx, -y * k.fy / z + k.cy
    ru = radius * k.fx / (z - radius)
    rv = radius * k.fy / (z - radius)
    return u - ru, v - rv, u + ru, v + rv


def object_boxes(spec: SynthSpec, margin: int = 3) -> List[BBox]:
    """Per-frame 2D boxes around the sphere, standing in for a person detector."""
    centers, radius = trajectory(spec)
    k = spec.intrinsics
    boxes = []
    for c in centers:
        u0, v0, u1, v1 = _sphere_box(c, radius, k)
        x0 = max(0, int(math.floor(u0)) - margin)
        y0 = max(0, int(math.floor(v0)) - margin)
        x1 = min(spec.width, int(math.ceil(u1)) + margin + 1)
        y1 = min(spec.height, int(math.ceil(v1)) + margin + 1)
        boxes.append((x0, y0, x1 - x0, y1 - y0))
    return boxes


def generate(spec: SynthSpec) -> List[DepthFrame]:
    centers, radius = trajectory(spec)
    k = spec.intrinsics
    for c in centers:
        u0, v0, u1, v1 = _sphere_box(c, radius, k)
        if u0 < 0 or v0 < 0 or u1 > spec.width - 1 or v1 > spec.height - 1:
            raise OutOfViewError(f"out of view: sphere at {np.round(c, 1).tolist()}")
    wall = float(np.max(centers[:, 2]) + radius + WALL_GAP)
    u, v = np.meshgrid(np.arange(spec.width), np.arange(spec.height))
    # rays with unit z component, so the ray parameter is the depth
    d = np.stack([(u - k.cx) / k.fx, -(v - k.cy) / k.fy, np.ones_like(u, dtype=np.float64)], -1)
    dd = np.sum(d * d, axis=-1)
    noise_rng = np.random.default_rng([spec.seed, spec.class_id, 11])
    frames = []
    for t, c in enumerate(centers):
        dc = d @ c
        disc = dc * dc - dd * (c @ c - radius * radius)
        hit = disc >= 0
        depth = np.full(dd.shape, wall)
        depth[hit] = (dc[hit] - np.sqrt(disc[hit])) / dd[hit]
        if spec.noise > 0:
            depth = depth + noise_rng.normal(0.0, spec.noise, depth.shape)
        raster = np.clip(np.rint(depth), 1, 65535).astype(np.uint16)
        frames.append(DepthFrame(raster, t))
    return frames


@dataclass(frozen=True)
class DatasetItem:
    spec: SynthSpec
    split: str  # "train" or "test"

    @property
    def label(self) -> int:
        return self.spec.class_id


def make_dataset(n_per_class: int, n_test_per_class: Optional[int] = None, seed: int = 0,
                 **spec_kw) -> List[DatasetItem]:
    """Balanced items; train and test draw from disjoint seed ranges."""
    if n_per_class < 2:
        raise ValueError("n_per_class must be >= 2")
    n_test = max(1, n_per_class // 4) if n_test_per_class is None else n_test_per_class
    if not 1 <= n_test < n_per_class:
        raise ValueError("need at least one train and one test sample per class")
    n_train = n_per_class - n_test
    items = []
    for cls in range(N_CLASSES):
        for i in range(n_per_class):
            sample_seed = seed * 1_000_000 + i
            split = "train" if i < n_train else "test"
            items.append(DatasetItem(SynthSpec(cls, seed=sample_seed, **spec_kw), split))
    return items


def write_dataset(root, items: Sequence[DatasetItem]) -> Path:
    """Write one ``.d16`` clip plus ``.bbox`` per item and ``manifest.csv``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for n, item in enumerate(items):
        stem = f"{item.split}_{n:05d}_c{item.label}"
        write_d16(root / f"{stem}.d16", generate(item.spec))
        write_bbox_file(root / f"{stem}.bbox", object_boxes(item.spec))
        lines.append(f"{stem}.d16,{item.label},{item.split}")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
