"""Tiny models and batches for network tests."""
import numpy as np
import torch

from dv3.net.model import EncoderConfig, LevelConfig, ModelConfig, MultiStreamModel
from dv3.net.train import Sample, make_batch
from dv3.pointset import AppearancePointSet, DvPointSet


def tiny_config(n_classes=2, n_points=16, motion_channels=2, n_appearance=1, **kw):
    enc = EncoderConfig(n_points, [LevelConfig(8, 0.4, 4, [8, 8]), LevelConfig(4, 0.8, 4, [8, 8])], [8, 8])
    return ModelConfig(n_classes, motion_channels, n_appearance, encoder=enc, head_widths=[8], **kw)


def random_sample(rng, label, n=16, channels=2, n_app=1):
    motion = DvPointSet(rng.uniform(-0.5, 0.5, (n, 3)), rng.uniform(-0.5, 0.5, (n, channels)))
    apps = [AppearancePointSet(rng.uniform(-0.5, 0.5, (n, 3)), i) for i in range(n_app)]
    return Sample(motion, apps, label)


def tiny_batch(rng, cfg, size=4, dtype=torch.float64):
    samples = [random_sample(rng, i % cfg.n_classes, cfg.encoder.n_sample, cfg.motion_channels,
                             cfg.n_appearance) for i in range(size)]
    return make_batch(samples, cfg, dtype), samples


def tiny_model(cfg, seed=0, dtype=torch.float64):
    torch.manual_seed(seed)
    return MultiStreamModel(cfg).to(dtype)
