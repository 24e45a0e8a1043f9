"""Depth video -> 3DV point set + appearance point sets."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

from .config import PipelineConfig
from .depth_io import CameraIntrinsics, DepthFrame, back_project, decode_depth_sequence
from .pointset import AppearancePointSet, DvPointSet, appearance_inputs, assemble, normalize
from .proposal import BBox, crop, propose_video, read_bbox_file
from .rankpool import RankPoolConfig, plan_splits, pool
from .voxel import fit_grid, voxelize

STAGES = ("proposal", "voxelization", "rank pooling", "pointlization")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Extraction:
    motion: DvPointSet
    appearance: List[AppearancePointSet]
    timings: Dict[str, float] = field(default_factory=dict)  # milliseconds

    def timing_report(self) -> str:
        return "\n".join(f"{name:<14s} {self.timings.get(name, 0.0):9.1f} ms" for name in STAGES)


@contextmanager
def _stage(name: str, timings: Dict[str, float]):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + 1e3 * (time.perf_counter() - t0)


def extract(frames: Sequence[DepthFrame], k: CameraIntrinsics, cfg: PipelineConfig,
            boxes: Optional[Mapping[int, BBox]] = None) -> Extraction:
    timings: Dict[str, float] = {}
    with _stage("proposal", timings):
        regions = None
        if cfg.proposal:
            regions = propose_video(frames, boxes, cfg.proposal_scope)
    with _stage("voxelization", timings):
        clouds = [back_project(f, k) for f in frames]
        if regions is not None:
            clouds = [crop(c, r, k) for c, r in zip(clouds, regions)]
        spec = fit_grid(clouds, cfg.voxel_size)
        grids = [voxelize(c, spec) for c in clouds]
    with _stage("rank pooling", timings):
        rank_cfg = RankPoolConfig(lam=cfg.rank_lambda)
        whole = pool(grids, cfg.pooling, rank_cfg)
        splits = [pool(grids[a:b], cfg.pooling, rank_cfg) for a, b in plan_splits(len(grids), cfg.t1)]
    with _stage("pointlization", timings):
        motion = assemble(whole, splits)
        if len(motion):
            motion = normalize(motion)
        appearance = appearance_inputs(clouds, cfg.t2)
    return Extraction(motion, appearance, timings)


def sibling_bbox(path) -> Optional[Path]:
    path = Path(path)
    candidate = path.with_suffix(".bbox") if path.is_file() else path / "boxes.bbox"
    return candidate if candidate.is_file() else None


def load_intrinsics_for(cfg: PipelineConfig, frame: DepthFrame) -> CameraIntrinsics:
    if cfg.intrinsics:
        from .depth_io import load_intrinsics

        return load_intrinsics(cfg.intrinsics)
    return CameraIntrinsics.default_for(frame.width, frame.height)


def extract_path(path, cfg: PipelineConfig, bbox_file=None, auto_bbox: bool = False) -> Extraction:
    frames = decode_depth_sequence(path)
    k = load_intrinsics_for(cfg, frames[0])
    if bbox_file is None and auto_bbox:
        bbox_file = sibling_bbox(path)
    boxes = read_bbox_file(bbox_file) if bbox_file else None
    return extract(frames, k, cfg, boxes)
