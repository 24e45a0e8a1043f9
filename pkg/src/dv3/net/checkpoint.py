"""Checkpoint files: model config plus named little-endian f32 tensors.

Layout::

    "DV3M" | u32 version | u32 config_len | config (UTF-8 JSON)
    u32 n_tensors | n_tensors x (u32 name_len | name | u32 rank | rank x u32 dim | f32 data)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import torch

from .model import ModelConfig, MultiStreamModel

MAGIC = b"DV3M"
VERSION = 1
_U32 = struct.Struct("<I")


class CheckpointError(ValueError):
    pass


def save(path, model: MultiStreamModel, extra: dict | None = None) -> None:
    config = json.dumps({"model": model.cfg.to_dict(), **(extra or {})}, sort_keys=True).encode()
    state = model.state_dict()
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(config)), config, _U32.pack(len(state))]
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy().astype("<f4")
        raw = name.encode()
        parts += [_U32.pack(len(raw)), raw, _U32.pack(arr.ndim)]
        parts += [_U32.pack(d) for d in arr.shape]
        parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob, self.pos = blob, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError("truncated checkpoint")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def read(path) -> Tuple[dict, Dict[str, np.ndarray]]:
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a DV3M checkpoint")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    meta = json.loads(r.take(r.u32()).decode())
    tensors = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode()
        shape = tuple(r.u32() for _ in range(r.u32()))
        count = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
    return meta, tensors


def load(path) -> Tuple[MultiStreamModel, dict]:
    meta, tensors = read(path)
    model = MultiStreamModel(ModelConfig.from_dict(meta["model"]))
    model.load_state_dict({k: torch.from_numpy(v.astype(np.float32)) for k, v in tensors.items()})
    model.eval()
    return model, meta
