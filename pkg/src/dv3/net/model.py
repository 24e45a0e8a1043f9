"""Multi-stream point-set classifier.

One motion stream encodes the 3DV point set; T2 appearance streams encode
raw depth points with a single shared encoder. Stream embeddings are
concatenated and classified by a fully-connected head.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import List, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from . import ops


@dataclass
class LevelConfig:
    n_centroids: int
    radius: float
    k: int
    widths: List[int]


@dataclass
class EncoderConfig:
    n_sample: int = 2048
    levels: List[LevelConfig] = field(default_factory=lambda: [
        LevelConfig(512, 0.1, 32, [64, 64, 128]),
        LevelConfig(128, 0.2, 64, [128, 128, 256]),
    ])
    global_widths: List[int] = field(default_factory=lambda: [256, 512, 1024])

    def scaled(self, factor: int) -> "EncoderConfig":
        """Divide every width and count by ``factor`` (radii unchanged)."""
        div = lambda v: max(1, v // factor)  # noqa: E731
        return EncoderConfig(
            div(self.n_sample),
            [LevelConfig(div(l.n_centroids), l.radius, div(l.k), [div(w) for w in l.widths])
             for l in self.levels],
            [div(w) for w in self.global_widths],
        )

    @property
    def out_width(self) -> int:
        return self.global_widths[-1]


@dataclass
class ModelConfig:
    n_classes: int
    motion_channels: int = 5  # motion features fed to the motion stream
    n_appearance: int = 3  # 0 disables appearance streams
    use_motion: bool = True
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    head_widths: List[int] = field(default_factory=lambda: [512, 256])
    dropout: float = 0.4

    @classmethod
    def desk(cls, n_classes: int, **kw) -> "ModelConfig":
        cfg = cls(n_classes, **kw)
        cfg.encoder = EncoderConfig().scaled(4)
        cfg.head_widths = [w // 4 for w in cfg.head_widths]
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        enc = dict(d.pop("encoder"))
        enc["levels"] = [LevelConfig(**l) for l in enc["levels"]]
        return cls(encoder=EncoderConfig(**enc), **d)


def relu_linear(in_width: int, out_width: int) -> nn.Linear:
    # He init: without normalization layers the default init shrinks deep ReLU stacks
    layer = nn.Linear(in_width, out_width)
    nn.init.kaiming_normal_(layer.weight, nonlinearity="relu")
    nn.init.zeros_(layer.bias)
    return layer


def mlp(widths: Sequence[int], in_width: int) -> nn.Sequential:
    layers: List[nn.Module] = []
    for w in widths:
        layers += [relu_linear(in_width, w), nn.ReLU()]
        in_width = w
    return nn.Sequential(*layers)


class SetAbstraction(nn.Module):
    def __init__(self, cfg: LevelConfig, in_feats: int):
        super().__init__()
        self.cfg = cfg
        self.mlp = mlp(cfg.widths, 3 + in_feats)

    def forward(self, xyz, feats, valid):
        c = self.cfg
        idx, new_valid = ops.farthest_point_sample(xyz, c.n_centroids, valid)
        grouped = ops.group(xyz, feats, idx, c.radius, c.k, valid)
        new_feats = self.mlp(grouped).max(dim=2).values
        return ops.index_points(xyz, idx), new_feats, new_valid


class StreamEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, in_feats: int):
        super().__init__()
        self.cfg = cfg
        self.in_feats = in_feats
        levels = []
        width = in_feats
        for lc in cfg.levels:
            levels.append(SetAbstraction(lc, width))
            width = lc.widths[-1]
        self.levels = nn.ModuleList(levels)
        self.global_mlp = mlp(cfg.global_widths, 3 + width)

    def forward(self, xyz: torch.Tensor, feats: torch.Tensor | None, valid: torch.Tensor) -> torch.Tensor:
        """xyz [B, N, 3], feats [B, N, F] or None, valid [B, N] -> [B, out_width]"""
        idx, valid = ops.farthest_point_sample(xyz, self.cfg.n_sample, valid)
        xyz = ops.index_points(xyz, idx)
        feats = ops.index_points(feats, idx) if feats is not None and feats.shape[-1] else None
        for level in self.levels:
            xyz, feats, valid = level(xyz, feats, valid)
        h = self.global_mlp(torch.cat([xyz, feats], dim=-1))
        return h.max(dim=1).values


class MultiStreamModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        width = 0
        self.motion_encoder = None
        self.appearance_encoder = None
        if cfg.use_motion:
            self.motion_encoder = StreamEncoder(cfg.encoder, cfg.motion_channels)
            width += cfg.encoder.out_width
        if cfg.n_appearance:
            self.appearance_encoder = StreamEncoder(cfg.encoder, 0)
            width += cfg.n_appearance * cfg.encoder.out_width
        if not width:
            raise ValueError("model needs at least one stream")
        layers: List[nn.Module] = []
        for w in cfg.head_widths:
            layers += [relu_linear(width, w), nn.ReLU(), nn.Dropout(cfg.dropout)]
            width = w
        layers.append(nn.Linear(width, cfg.n_classes))
        self.head = nn.Sequential(*layers)

    def embed(self, batch: "Batch") -> torch.Tensor:
        parts = []
        if self.motion_encoder is not None:
            m = batch.motion
            parts.append(self.motion_encoder(m.xyz, m.feats[..., :self.cfg.motion_channels], m.valid))
        if self.appearance_encoder is not None:
            a = batch.appearance
            if a is None or a.xyz.shape[0] != batch.size * self.cfg.n_appearance:
                raise ValueError(f"expected {self.cfg.n_appearance} appearance streams per sample")
            emb = self.appearance_encoder(a.xyz, None, a.valid)
            parts.append(emb.reshape(batch.size, -1))
        return torch.cat(parts, dim=1)

    def forward(self, batch: "Batch") -> torch.Tensor:
        return self.head(self.embed(batch))

    def predict_proba(self, batch: "Batch") -> torch.Tensor:
        return torch.softmax(self.forward(batch), dim=1)


@dataclass
class Padded:
    xyz: torch.Tensor  # [B, N, 3]
    feats: torch.Tensor  # [B, N, F]
    valid: torch.Tensor  # [B, N]


@dataclass
class Batch:
    size: int
    motion: Padded | None
    appearance: Padded | None  # [B * T2, ...], sample-major
    labels: torch.Tensor | None = None


def pad_clouds(clouds: Sequence[Tuple], dtype=torch.float32) -> Padded:
    """Pad ``(xyz, feats)`` arrays to a common length with copies of point 0."""
    n_max = max(len(x) for x, _ in clouds)
    n_feat = clouds[0][1].shape[1] if clouds[0][1] is not None else 0
    B = len(clouds)
    xyz = np.zeros((B, n_max, 3))
    feats = np.zeros((B, n_max, n_feat))
    valid = np.zeros((B, n_max), dtype=bool)
    for b, (x, f) in enumerate(clouds):
        n = len(x)
        xyz[b, :n] = x
        xyz[b, n:] = x[0]
        if n_feat:
            feats[b, :n] = f
            feats[b, n:] = f[0]
        valid[b, :n] = True
    return Padded(torch.as_tensor(xyz, dtype=dtype), torch.as_tensor(feats, dtype=dtype),
                  torch.as_tensor(valid))
