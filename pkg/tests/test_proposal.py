import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dv3.depth_io import CameraIntrinsics, DepthFrame, PointCloud, back_project
from dv3.proposal import (DepthHistogram, EmptyRegionError, ProposalRegion, build_histogram,
                          compute_threshold, crop, propose, propose_video, read_bbox_file,
                          write_bbox_file)


def frame(data, t=0):
    return DepthFrame(np.asarray(data, dtype=np.uint16), t)


def test_histogram_counts():
    h = build_histogram(frame([[1850, 1870], [1890, 2500]]))
    assert h.counts[18] == 3 and h.counts[25] == 1 and h.total == 4


def test_histogram_ignores_zero_and_bbox():
    data = np.array([[0, 1000, 5000], [0, 1000, 5000]])
    h = build_histogram(frame(data), bbox=(0, 0, 2, 2))
    assert h.total == 2 and h.counts[10] == 2


def test_empty_region():
    with pytest.raises(EmptyRegionError, match="empty region"):
        build_histogram(frame(np.zeros((2, 2))))


def test_bin_edge_is_half_open():
    assert build_histogram(frame([[2000]])).counts[20] == 1


def test_threshold_examples():
    counts = np.zeros(30, int)
    counts[18] = 5
    counts[25] = 1
    assert compute_threshold(DepthHistogram(counts, 100)) == 2050
    assert compute_threshold(build_histogram(frame([[500]]))) == 750
    tie = np.zeros(31, int)
    tie[10] = tie[30] = 4
    assert compute_threshold(DepthHistogram(tie, 100)) == 1250


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=40).filter(any), st.integers(1, 50))
def test_threshold_scale_invariant(counts, factor):
    counts = np.array(counts)
    assert compute_threshold(DepthHistogram(counts, 100)) == compute_threshold(DepthHistogram(counts * factor, 100))


def test_crop_strict_threshold():
    cloud = PointCloud(np.array([[0, 0, 1900.0], [0, 0, 2049], [0, 0, 2051]]))
    k = CameraIntrinsics(100, 100, 0, 0)
    out = crop(cloud, ProposalRegion(2050), k)
    np.testing.assert_array_equal(out.points[:, 2], [1900, 2049])
    assert len(crop(cloud, ProposalRegion(100), k)) == 0


def test_crop_bbox_by_source_pixel(rng):
    k = CameraIntrinsics.default_for(8, 6)
    data = rng.integers(500, 3000, (6, 8))
    f = frame(data)
    region = ProposalRegion(2500, (2, 1, 3, 4))
    out = crop(back_project(f, k), region, k, f)
    mask = np.zeros_like(data, bool)
    mask[1:5, 2:5] = True
    mask &= data < 2500
    assert len(out) == mask.sum()
    np.testing.assert_array_equal(np.sort(out.points[:, 2]), np.sort(data[mask]).astype(float))
    again = crop(out, region, k, f)
    np.testing.assert_array_equal(again.points, out.points)


def test_region_validation():
    with pytest.raises(ValueError):
        ProposalRegion(0)
    with pytest.raises(ValueError):
        ProposalRegion(100, (0, 0, 9, 2)).check_bounds(frame(np.ones((4, 4))))


def test_video_scope_reuses_first_threshold():
    f0 = frame(np.full((2, 2), 1000), 0)
    f1 = frame(np.full((2, 2), 3000), 1)
    video = propose_video([f0, f1])
    assert [r.depth_threshold for r in video] == [1250, 1250]
    per_frame = propose_video([f0, f1], scope="frame")
    assert [r.depth_threshold for r in per_frame] == [1250, 3250]
    assert propose(f1).depth_threshold == 3250


def test_bbox_file_round_trip(tmp_path):
    p = tmp_path / "b.bbox"
    write_bbox_file(p, [(1, 2, 3, 4), None, (5, 6, 7, 8)])
    assert read_bbox_file(p) == {0: (1, 2, 3, 4), 2: (5, 6, 7, 8)}
