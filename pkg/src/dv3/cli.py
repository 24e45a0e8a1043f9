"""Command line entry point: ``dv3 extract|synth|train|eval|export-ply``."""
from __future__ import annotations

import argparse
import logging
import multiprocessing
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import PipelineConfig
from .pipeline import Extraction, StageError, extract_path
from .pointset import read_pointset, write_ply, write_pointset

log = logging.getLogger("dv3")


class CliError(Exception):
    pass


def _pipeline_config(args) -> PipelineConfig:
    try:
        return PipelineConfig.from_file(
            getattr(args, "config", None),
            pooling=getattr(args, "pooling", None),
            t1=getattr(args, "splits", None),
            voxel_size=getattr(args, "voxel_size", None),
            points=getattr(args, "points", None),
            seed=getattr(args, "seed", None),
            rank_lambda=getattr(args, "lam", None),
        )
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {exc.filename}") from exc


def _extract_one(job: Tuple[str, dict, Optional[str], bool]) -> Extraction:
    path, cfg_dict, bbox_file, auto_bbox = job
    return extract_path(path, PipelineConfig(**cfg_dict), bbox_file=bbox_file, auto_bbox=auto_bbox)


def run_extractions(paths: Sequence[str], cfg: PipelineConfig, jobs: int = 1,
                    bbox_file: Optional[str] = None) -> List[Extraction]:
    """Extract every input, in input order, with ``jobs`` worker processes.

    An explicit bbox file applies to a single input; otherwise each input
    uses a sibling ``.bbox`` file when one exists.
    """
    if bbox_file and len(paths) > 1:
        raise CliError("--bbox-file applies to a single input")
    work = [(str(p), asdict(cfg), bbox_file, bbox_file is None) for p in paths]
    if jobs <= 1 or len(work) <= 1:
        return [_extract_one(w) for w in work]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        return list(pool.map(_extract_one, work))


# -- commands -------------------------------------------------------------------


def cmd_extract(args) -> int:
    cfg = _pipeline_config(args)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = run_extractions(args.inputs, cfg, args.jobs, args.bbox_file)
    for path, ex in zip(args.inputs, results):
        stem = Path(path).stem if Path(path).is_file() else Path(path).name
        write_pointset(out_dir / f"{stem}.dv3p", ex.motion)
        for i, app in enumerate(ex.appearance):
            write_pointset(out_dir / f"{stem}.app{i}.dv3p", app)
        print(f"{stem}: {len(ex.motion)} points, {ex.motion.channels} motion channels")
        print(ex.timing_report())
    return 0


def cmd_synth(args) -> int:
    from .synth import make_dataset, write_dataset

    items = make_dataset(args.per_class + args.test_per_class, args.test_per_class,
                         seed=args.seed, frames=args.frames, noise=args.noise,
                         width=args.width, height=args.height)
    manifest = write_dataset(args.output, items)
    print(f"wrote {len(items)} clips, manifest {manifest}")
    return 0


@dataclass
class ManifestEntry:
    path: Path
    label: int
    split: str


def read_manifest(path) -> List[ManifestEntry]:
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise CliError(f"{path}:{lineno}: expected 'path,class,split'")
        clip = Path(parts[0])
        entries.append(ManifestEntry(clip if clip.is_absolute() else path.parent / clip,
                                     int(parts[1]), parts[2]))
    if not entries:
        raise CliError(f"{path}: empty manifest")
    return entries


def load_samples(entries: Sequence[ManifestEntry], cfg: PipelineConfig, n_points: int, jobs: int):
    from .net.train import prepare_sample

    results = run_extractions([str(e.path) for e in entries], cfg, jobs)
    return [prepare_sample(ex.motion, ex.appearance, e.label, n_points)
            for e, ex in zip(entries, results)]


def _model_config(n_classes: int, cfg: PipelineConfig, args):
    from .net.model import ModelConfig

    kw = dict(motion_channels=cfg.t1 + 1, n_appearance=cfg.t2)
    if args.streams == "motion":
        kw["n_appearance"] = 0
    elif args.streams == "appearance":
        kw["use_motion"] = False
    if args.full_size:
        model_cfg = ModelConfig(n_classes, **kw)
    else:
        model_cfg = ModelConfig.desk(n_classes, **kw)
    model_cfg.encoder.n_sample = min(model_cfg.encoder.n_sample, cfg.points)
    return model_cfg


def cmd_train(args) -> int:
    from .net import checkpoint
    from .net.train import TrainConfig, train

    cfg = _pipeline_config(args)
    entries = [e for e in read_manifest(args.manifest) if e.split == args.split]
    if not entries:
        raise CliError(f"no '{args.split}' entries in {args.manifest}")
    n_classes = max(e.label for e in entries) + 1
    model_cfg = _model_config(n_classes, cfg, args)
    samples = load_samples(entries, cfg, model_cfg.encoder.n_sample, args.jobs)
    metrics_fh = open(args.metrics, "w", encoding="utf-8") if args.metrics else None

    def on_epoch(m):
        print(m.line(), flush=True)
        if metrics_fh:
            metrics_fh.write(m.line() + "\n")

    try:
        if metrics_fh:
            metrics_fh.write("epoch,loss,accuracy\n")
        model, _ = train(samples, model_cfg, TrainConfig(epochs=args.epochs, seed=cfg.seed),
                         on_epoch=on_epoch)
    finally:
        if metrics_fh:
            metrics_fh.close()
    checkpoint.save(args.output, model, {"pipeline": asdict(cfg)})
    print(f"saved {args.output}")
    return 0


def format_confusion(confusion: np.ndarray) -> str:
    n = confusion.shape[0]
    width = max(4, len(str(int(confusion.max(initial=0)))) + 1)
    lines = ["true\\pred" + "".join(f"{j:>{width}d}" for j in range(n))]
    for i in range(n):
        lines.append(f"{i:>9d}" + "".join(f"{int(v):>{width}d}" for v in confusion[i]))
    return "\n".join(lines)


def cmd_eval(args) -> int:
    from .net import checkpoint
    from .net.train import evaluate

    model, meta = checkpoint.load(args.checkpoint)
    cfg = PipelineConfig(**meta.get("pipeline", {}))
    entries = [e for e in read_manifest(args.manifest) if e.split == args.split]
    if not entries:
        raise CliError(f"no '{args.split}' entries in {args.manifest}")
    n_manifest = max(e.label for e in read_manifest(args.manifest)) + 1
    if n_manifest != model.cfg.n_classes:
        raise CliError(f"class count mismatch: manifest has {n_manifest}, "
                       f"checkpoint has {model.cfg.n_classes}")
    samples = load_samples(entries, cfg, model.cfg.encoder.n_sample, args.jobs)
    acc, confusion = evaluate(model, samples)
    print(f"accuracy {acc:.4f} ({int(np.trace(confusion))}/{len(samples)})")
    print(format_confusion(confusion))
    return 0


def cmd_export_ply(args) -> int:
    ps = read_pointset(args.input)
    write_ply(args.output, ps)
    print(f"wrote {len(ps)} points to {args.output}")
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dv3", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def pipeline_flags(sp):
        sp.add_argument("--config", help="key = value pipeline config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--pooling", choices=("approx", "exact"))
        sp.add_argument("--splits", type=int, help="temporal splits T1")
        sp.add_argument("--lambda", dest="lam", type=float, help="exact pooling regularizer")
        sp.add_argument("--voxel-size", type=float, help="voxel edge in millimeters")
        sp.add_argument("--points", type=int, help="points per set fed to the network")

    sp = sub.add_parser("extract", help="depth clip(s) -> DV3P point sets")
    sp.add_argument("inputs", nargs="+", help=".d16 file or directory of 16-bit PNGs")
    sp.add_argument("-o", "--output", default=".", help="output directory")
    sp.add_argument("--bbox-file", help="per-frame boxes 'frame x y w h'")
    pipeline_flags(sp)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("synth", help="write a synthetic dataset")
    sp.add_argument("output")
    sp.add_argument("--per-class", type=int, default=40, help="training clips per class")
    sp.add_argument("--test-per-class", type=int, default=16)
    sp.add_argument("--frames", type=int, default=24)
    sp.add_argument("--width", type=int, default=160)
    sp.add_argument("--height", type=int, default=120)
    sp.add_argument("--noise", type=float, default=3.0, help="depth noise sigma in mm")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train a classifier from a manifest")
    sp.add_argument("manifest")
    sp.add_argument("-o", "--output", default="model.dv3m")
    sp.add_argument("--metrics", help="write epoch,loss,accuracy lines here")
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--split", default="train")
    sp.add_argument("--streams", choices=("all", "motion", "appearance"), default="all")
    sp.add_argument("--full-size", action="store_true", help="full widths instead of desk scale")
    pipeline_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    sp.add_argument("checkpoint")
    sp.add_argument("manifest")
    sp.add_argument("--split", default="test")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("export-ply", help="DV3P -> ASCII PLY")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.set_defaults(func=cmd_export_ply)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: stage {exc}", file=sys.stderr)
    except (CliError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
