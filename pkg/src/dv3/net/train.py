"""Training and evaluation of the multi-stream classifier."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..pointset import AppearancePointSet, DvPointSet
from . import ops
from .model import Batch, ModelConfig, MultiStreamModel, pad_clouds

log = logging.getLogger(__name__)


@dataclass
class AugmentRanges:
    rot_y_deg: float = 30.0
    rot_x_deg: float = 5.0
    jitter_sigma: float = 0.01
    jitter_clip: float = 0.05
    dropout_min: float = 0.0
    dropout_max: float = 0.2

    @classmethod
    def none(cls) -> "AugmentRanges":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 10
    epochs: int = 70
    seed: int = 0
    augment: Optional[AugmentRanges] = field(default_factory=AugmentRanges)

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.lr_decay_every) < 1 or self.lr <= 0:
            raise ValueError("batch_size, epochs, lr_decay_every and lr must be positive")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_every)


@dataclass
class Sample:
    motion: Optional[DvPointSet]
    appearance: List[AppearancePointSet]
    label: int


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    accuracy: float

    def line(self) -> str:
        return f"{self.epoch},{self.loss:.6f},{self.accuracy:.6f}"


# -- augmentation -------------------------------------------------------------


def rotation_yx(angle_y: float, angle_x: float) -> np.ndarray:
    """Rotation about Y followed by rotation about X (radians)."""
    cy, sy = math.cos(angle_y), math.sin(angle_y)
    cx, sx = math.cos(angle_x), math.sin(angle_x)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return rx @ ry


def augment(ps, ranges: AugmentRanges, seed) -> DvPointSet | AppearancePointSet:
    """Random Y/X rotation, clipped Gaussian jitter and point dropout.

    Motion channels ride along with their points and are never modified.
    """
    if len(ps) == 0:
        raise ValueError("cannot augment an empty point set")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ay = math.radians(rng.uniform(-ranges.rot_y_deg, ranges.rot_y_deg))
    ax = math.radians(rng.uniform(-ranges.rot_x_deg, ranges.rot_x_deg))
    xyz = ps.xyz @ rotation_yx(ay, ax).T
    if ranges.jitter_sigma > 0:
        noise = rng.normal(0.0, ranges.jitter_sigma, xyz.shape)
        xyz = xyz + np.clip(noise, -ranges.jitter_clip, ranges.jitter_clip)
    keep = np.arange(len(ps))
    frac = rng.uniform(ranges.dropout_min, ranges.dropout_max)
    n_drop = min(int(round(frac * len(ps))), len(ps) - 1)
    if n_drop > 0:
        keep = np.sort(rng.permutation(len(ps))[n_drop:])
    if isinstance(ps, DvPointSet):
        return replace(ps, xyz=xyz[keep], motion=ps.motion[keep])
    return replace(ps, xyz=xyz[keep])


# -- batching -----------------------------------------------------------------

def motion_arrays(ps: Optional[DvPointSet], channels: int):
    """Empty 3DV sets (e.g. a perfectly still clip) become one zero point."""
    if ps is None or len(ps) == 0:
        return np.zeros((1, 3)), np.zeros((1, channels))
    if ps.channels < channels:
        raise ValueError(f"point set has {ps.channels} motion channels, model needs {channels}")
    return ps.xyz, ps.motion[:, :channels]


def make_batch(samples: Sequence[Sample], cfg: ModelConfig, dtype=torch.float32) -> Batch:
    motion = appearance = None
    if cfg.use_motion:
        motion = pad_clouds([motion_arrays(s.motion, cfg.motion_channels) for s in samples], dtype)
    if cfg.n_appearance:
        clouds = []
        for s in samples:
            if len(s.appearance) != cfg.n_appearance:
                raise ValueError(f"sample has {len(s.appearance)} appearance sets, "
                                 f"model expects {cfg.n_appearance}")
            clouds += [(a.xyz, None) for a in s.appearance]
        appearance = pad_clouds(clouds, dtype)
    labels = torch.as_tensor([s.label for s in samples], dtype=torch.long)
    return Batch(len(samples), motion, appearance, labels)


def cap_points(ps, n: int):
    """Reduce a point set to its first ``n`` farthest-point samples (start 0)."""
    if len(ps) <= n:
        return ps
    idx, _ = ops.farthest_point_sample(torch.from_numpy(ps.xyz[None]), n)
    keep = np.sort(idx[0].numpy())
    if isinstance(ps, DvPointSet):
        return replace(ps, xyz=ps.xyz[keep], motion=ps.motion[keep])
    return replace(ps, xyz=ps.xyz[keep])


def prepare_sample(motion: Optional[DvPointSet], appearance: Sequence[AppearancePointSet],
                   label: int, n_points: Optional[int] = None) -> Sample:
    """Build a training sample, optionally pre-capping every set to ``n_points``."""
    if n_points:
        motion = cap_points(motion, n_points) if motion is not None else None
        appearance = [cap_points(a, n_points) for a in appearance]
    return Sample(motion, list(appearance), label)


def augment_sample(s: Sample, ranges: AugmentRanges, rng: np.random.Generator) -> Sample:
    motion = s.motion
    if motion is not None and len(motion):
        motion = augment(motion, ranges, rng)
    return Sample(motion, [augment(a, ranges, rng) for a in s.appearance], s.label)


# -- gradients ----------------------------------------------------------------


def loss_fn(model: MultiStreamModel, batch: Batch) -> torch.Tensor:
    return F.cross_entropy(model(batch), batch.labels)


def backward(model: MultiStreamModel, batch: Batch) -> Dict[str, torch.Tensor]:
    """Gradients of the mean cross-entropy for every named parameter."""
    model.zero_grad(set_to_none=True)
    loss = loss_fn(model, batch)
    loss.backward()
    return {name: p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
            for name, p in model.named_parameters()}


def _check_finite(model: MultiStreamModel, loss: torch.Tensor) -> None:
    if not torch.isfinite(loss):
        raise FloatingPointError("non-finite training loss")
    for name, p in model.named_parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise FloatingPointError(f"non-finite gradient in {name}")


# -- loops ----------------------------------------------------------------------


def train(samples: Sequence[Sample], model_cfg: ModelConfig, cfg: TrainConfig,
          max_steps: Optional[int] = None, on_epoch=None):
    """Train from scratch; returns ``(model, [EpochMetrics])``."""
    if not samples:
        raise ValueError("empty dataset")
    if len({s.label for s in samples}) < 2:
        raise ValueError("training needs at least two classes")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = MultiStreamModel(model_cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8)
    metrics: List[EpochMetrics] = []
    steps = 0
    for epoch in range(cfg.epochs):
        for group in opt.param_groups:
            group["lr"] = cfg.lr_at(epoch)
        model.train()
        order = rng.permutation(len(samples))
        total_loss = 0.0
        correct = 0
        seen = 0
        for start in range(0, len(order), cfg.batch_size):
            chunk = [samples[i] for i in order[start:start + cfg.batch_size]]
            if cfg.augment is not None:
                chunk = [augment_sample(s, cfg.augment, rng) for s in chunk]
            batch = make_batch(chunk, model_cfg)
            opt.zero_grad(set_to_none=True)
            logits = model(batch)
            loss = F.cross_entropy(logits, batch.labels)
            loss.backward()
            _check_finite(model, loss)
            opt.step()
            total_loss += float(loss.detach()) * batch.size
            correct += int((logits.argmax(1) == batch.labels).sum())
            seen += batch.size
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        m = EpochMetrics(epoch, total_loss / seen, correct / seen)
        metrics.append(m)
        log.info("epoch %d loss %.4f acc %.3f", m.epoch, m.loss, m.accuracy)
        if on_epoch is not None:
            on_epoch(m)
        if max_steps is not None and steps >= max_steps:
            break
    return model, metrics


@torch.no_grad()
def predict(model: MultiStreamModel, samples: Sequence[Sample], batch_size: int = 32) -> np.ndarray:
    model.eval()
    out = []
    for start in range(0, len(samples), batch_size):
        batch = make_batch(samples[start:start + batch_size], model.cfg)
        out.append(model(batch).argmax(1).numpy())
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate(model: MultiStreamModel, samples: Sequence[Sample], batch_size: int = 32):
    """Return ``(accuracy, confusion)``; confusion[true, predicted] counts."""
    pred = predict(model, samples, batch_size)
    labels = np.array([s.label for s in samples])
    n = model.cfg.n_classes
    if labels.size and labels.max() >= n:
        raise ValueError(f"label {labels.max()} outside the model's {n} classes")
    confusion = np.zeros((n, n), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    acc = float((pred == labels).mean()) if labels.size else float("nan")
    return acc, confusion
