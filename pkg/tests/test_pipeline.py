import numpy as np
import pytest

from dv3 import synth
from dv3.config import PipelineConfig
from dv3.depth_io import DepthFrame, write_d16
from dv3.pipeline import STAGES, StageError, extract, extract_path


@pytest.fixture(scope="module")
def clip():
    spec = synth.SynthSpec(4, noise=2.0, seed=3)
    return spec, synth.generate(spec), dict(enumerate(synth.object_boxes(spec)))


def test_channels_follow_splits(clip):
    spec, frames, boxes = clip
    for t1 in (1, 4):
        ex = extract(frames, spec.intrinsics, PipelineConfig(t1=t1), boxes)
        assert ex.motion.channels == t1 + 1
        assert len(ex.appearance) == 3
        assert set(ex.timings) == set(STAGES)
        assert all(name in ex.timing_report() for name in STAGES)


def test_normalized_ranges(clip):
    spec, frames, boxes = clip
    ex = extract(frames, spec.intrinsics, PipelineConfig(), boxes)
    assert ex.motion.xyz[:, 1].min() == pytest.approx(-0.5)
    assert ex.motion.xyz[:, 1].max() == pytest.approx(0.5)
    assert ex.motion.motion.min() == pytest.approx(-0.5) and ex.motion.motion.max() == pytest.approx(0.5)
    assert np.all(np.any(ex.motion.motion != -1, axis=1))


def test_exact_pooling_path(clip):
    spec, frames, boxes = clip
    ex = extract(frames[:10], spec.intrinsics, PipelineConfig(pooling="exact", t1=2), boxes)
    assert ex.motion.channels == 3 and len(ex.motion) > 0


def test_stage_error_names_stage():
    frames = [DepthFrame(np.zeros((4, 4), np.uint16), t) for t in range(8)]
    with pytest.raises(StageError) as info:
        extract(frames, synth.SynthSpec(0).intrinsics, PipelineConfig())
    assert info.value.stage == "proposal" and "empty region" in str(info.value)


def test_extract_path_uses_sibling_bbox(tmp_path):
    items = synth.make_dataset(2, 1, frames=12, noise=1.0)[:1]
    manifest = synth.write_dataset(tmp_path, items)
    clip = tmp_path / manifest.read_text().split(",")[0]
    with_box = extract_path(clip, PipelineConfig(), auto_bbox=True)
    without = extract_path(clip, PipelineConfig())
    assert len(with_box.motion) > 0 and len(without.motion) > 0


def test_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("voxel_size = 50\nt1 = 2\npooling = exact\nproposal = off\n", encoding="utf-8")
    cfg = PipelineConfig.from_file(p, t1=3)
    assert (cfg.voxel_size, cfg.t1, cfg.pooling, cfg.proposal) == (50.0, 3, "exact", False)
    with pytest.raises(ValueError):
        PipelineConfig(t1=0)
