"""``key = value`` config files and the extraction pipeline settings."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional


def read_kv_file(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(value: str, kind):
    if kind is bool:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return kind(value)


@dataclass
class PipelineConfig:
    voxel_size: float = 35.0
    t1: int = 4
    t2: int = 3
    pooling: str = "approx"
    points: int = 2048
    intrinsics: Optional[str] = None
    proposal: bool = True
    proposal_scope: str = "video"  # "video": first-frame threshold; "frame": per frame
    rank_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.t1 < 1 or self.t2 < 1:
            raise ValueError("t1 and t2 must be >= 1")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if self.pooling not in ("approx", "exact"):
            raise ValueError(f"unknown pooling mode {self.pooling!r}")
        if self.proposal_scope not in ("video", "frame"):
            raise ValueError(f"unknown proposal scope {self.proposal_scope!r}")

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        values = read_kv_file(path) if path else {}
        kinds = {f.name: f.type for f in fields(cls)}
        typed = {}
        for key, raw in values.items():
            if key not in kinds:
                continue
            kind = {"float": float, "int": int, "bool": bool}.get(kinds[key], str)
            typed[key] = _coerce(raw, kind)
        typed.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**typed)
