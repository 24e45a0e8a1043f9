"""Action proposal: isolate the foreground by depth-histogram thresholding.

The threshold is the center of the most populated 100 mm depth bin plus a
200 mm margin; pixels at or beyond it are treated as background.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .depth_io import CameraIntrinsics, DepthFrame, PointCloud

BIN_WIDTH = 100.0
MARGIN = 200.0

BBox = Tuple[int, int, int, int]  # x, y, w, h in pixels


class EmptyRegionError(ValueError):
    def __init__(self, msg: str = "empty region"):
        super().__init__(msg)


@dataclass(frozen=True)
class DepthHistogram:
    counts: np.ndarray  # counts[b] covers [b * bin_width, (b + 1) * bin_width)
    bin_width: float = BIN_WIDTH

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ProposalRegion:
    depth_threshold: float
    bbox: Optional[BBox] = None

    def __post_init__(self):
        if not self.depth_threshold > 0:
            raise ValueError("depth_threshold must be positive")
        if self.bbox is not None:
            x, y, w, h = self.bbox
            if x < 0 or y < 0 or w <= 0 or h <= 0:
                raise ValueError(f"invalid bbox {self.bbox}")

    def check_bounds(self, frame: DepthFrame) -> None:
        if self.bbox is None:
            return
        x, y, w, h = self.bbox
        if x + w > frame.width or y + h > frame.height:
            raise ValueError(f"bbox {self.bbox} exceeds frame {frame.width}x{frame.height}")


def _bbox_view(frame: DepthFrame, bbox: Optional[BBox]) -> np.ndarray:
    if bbox is None:
        return frame.data
    x, y, w, h = bbox
    if x < 0 or y < 0 or x + w > frame.width or y + h > frame.height:
        raise ValueError(f"bbox {bbox} exceeds frame {frame.width}x{frame.height}")
    return frame.data[y:y + h, x:x + w]


def build_histogram(frame: DepthFrame, bbox: Optional[BBox] = None,
                    bin_width: float = BIN_WIDTH) -> DepthHistogram:
    depths = _bbox_view(frame, bbox)
    depths = depths[depths > 0]
    if depths.size == 0:
        raise EmptyRegionError()
    bins = np.floor(depths / bin_width).astype(np.int64)
    return DepthHistogram(np.bincount(bins), bin_width)


def compute_threshold(h: DepthHistogram, margin: float = MARGIN) -> float:
    if h.total == 0:
        raise EmptyRegionError()
    mode = int(np.argmax(h.counts))  # first max = nearest bin on ties
    return (mode + 0.5) * h.bin_width + margin


def propose(frame: DepthFrame, bbox: Optional[BBox] = None) -> ProposalRegion:
    return ProposalRegion(compute_threshold(build_histogram(frame, bbox)), bbox)


def propose_video(frames: Sequence[DepthFrame], boxes: Optional[Dict[int, BBox]] = None,
                  scope: str = "video") -> List[ProposalRegion]:
    """One region per frame. ``scope="video"`` reuses the first frame's threshold."""
    boxes = boxes or {}
    if scope == "frame":
        return [propose(f, boxes.get(f.timestamp_index)) for f in frames]
    if scope != "video":
        raise ValueError(f"unknown proposal scope {scope!r}")
    first = frames[0]
    threshold = compute_threshold(build_histogram(first, boxes.get(first.timestamp_index)))
    return [ProposalRegion(threshold, boxes.get(f.timestamp_index)) for f in frames]


def crop(cloud: PointCloud, region: ProposalRegion, k: CameraIntrinsics,
         frame: Optional[DepthFrame] = None) -> PointCloud:
    """Keep points nearer than the threshold whose source pixel is inside the bbox."""
    if frame is not None:
        region.check_bounds(frame)
    pts = cloud.points
    keep = pts[:, 2] < region.depth_threshold
    if region.bbox is not None and len(pts):
        x, y, w, h = region.bbox
        uv = np.rint(k.project(pts)).astype(np.int64)
        keep &= (uv[:, 0] >= x) & (uv[:, 0] < x + w) & (uv[:, 1] >= y) & (uv[:, 1] < y + h)
    return PointCloud(pts[keep])


def read_bbox_file(path) -> Dict[int, BBox]:
    """Parse ``frame_index x y w h`` lines."""
    boxes: Dict[int, BBox] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ValueError(f"{path}:{lineno}: expected 'frame_index x y w h'")
        idx, x, y, w, h = (int(p) for p in parts)
        boxes[idx] = (x, y, w, h)
    return boxes


def write_bbox_file(path, boxes: Sequence[Optional[BBox]]) -> None:
    lines = [f"{i} {b[0]} {b[1]} {b[2]} {b[3]}" for i, b in enumerate(boxes) if b is not None]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
