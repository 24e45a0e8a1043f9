import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dv3.depth_io import PointCloud
from dv3.proposal import EmptyRegionError
from dv3.pointset import (AppearancePointSet, DvPointSet, PointSetFormatError, appearance_inputs,
                          assemble, from_bytes, middle_frames, normalize, read_pointset, to_bytes,
                          write_ply, write_pointset)
from dv3.rankpool import MotionGrid
from dv3.voxel import GridSpec

SPEC = GridSpec(np.zeros(3), np.array([4, 4, 4]), 35.0)


def mgrid(entries):
    flat = np.array(sorted(entries), dtype=np.int64)
    return MotionGrid(SPEC, flat, np.array([entries[f] for f in flat], dtype=float))


def test_assemble_placement():
    g = mgrid({5: 0.4})
    splits = [mgrid({}), mgrid({5: -0.1}), mgrid({}), mgrid({})]
    ps = assemble(g, splits)
    np.testing.assert_allclose(ps.motion, [[0.4, 0, -0.1, 0, 0]])
    np.testing.assert_array_equal(ps.xyz, [SPEC.unravel(np.array([5]))[0]])
    assert ps.channels == 5 and ps.n_splits == 4


def test_assemble_drops_all_zero_and_empty():
    ps = assemble(mgrid({1: 0.0, 2: 1.0}), [mgrid({1: 0.0})])
    assert len(ps) == 1
    assert len(assemble(mgrid({}), [mgrid({})])) == 0


def test_assemble_order_invariant():
    a = assemble(mgrid({3: 1.0, 9: -2.0}), [mgrid({9: 0.5, 20: 0.1})])
    b = assemble(mgrid({9: -2.0, 3: 1.0}), [mgrid({20: 0.1, 9: 0.5})])
    rows = lambda p: sorted(map(tuple, p.features))  # noqa: E731
    assert rows(a) == rows(b)


def test_assemble_spec_mismatch():
    other = MotionGrid(GridSpec(np.zeros(3), np.array([5, 4, 4])), np.array([0]), np.array([1.0]))
    with pytest.raises(ValueError):
        assemble(mgrid({0: 1.0}), [other])


def test_normalize_examples():
    one = normalize(DvPointSet(np.array([[3.0, 4, 5]]), np.array([[2.0]])))
    np.testing.assert_array_equal(one.xyz, [[0, 0, 0]])
    np.testing.assert_array_equal(one.motion, [[0]])
    ps = normalize(DvPointSet(np.array([[0.0, 0, 0], [20, 10, 0]]), np.zeros((2, 1))))
    np.testing.assert_allclose(ps.xyz[:, 1], [-0.5, 0.5])
    np.testing.assert_allclose(ps.xyz[:, 0], [-1.0, 1.0])
    m = normalize(DvPointSet(np.zeros((3, 3)) + np.arange(3)[:, None], np.array([[-2.0], [0], [2]])))
    np.testing.assert_allclose(m.motion[:, 0], [-0.5, 0, 0.5])
    with pytest.raises(ValueError):
        normalize(AppearancePointSet(np.zeros((0, 3))))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 40), st.just(3)), elements=st.floats(-50, 50)),
       arrays(np.float64, (40, 3), elements=st.floats(-3, 3)))
def test_normalize_properties(xyz, motion):
    motion = motion[: len(xyz)]
    ps = DvPointSet(xyz, motion)
    n = normalize(ps)
    assert n.xyz[:, 1].min() >= -0.5 - 1e-9 and n.xyz[:, 1].max() <= 0.5 + 1e-9
    twice = normalize(n)
    np.testing.assert_allclose(twice.xyz, n.xyz, atol=1e-6)
    np.testing.assert_allclose(twice.motion, n.motion, atol=1e-6)
    # uniform scale plus translation: differences scale by one common factor
    span = xyz[:, 1].max() - xyz[:, 1].min()
    scale = span if span > 0 else 1.0
    np.testing.assert_allclose(np.diff(n.xyz, axis=0) * scale, np.diff(xyz, axis=0), atol=1e-6 * max(1, scale))
    for c in range(motion.shape[1]):
        a, b = motion[:, c], n.motion[:, c]
        order = np.argsort(a, kind="stable")
        assert np.all(np.diff(b[order]) >= -1e-12)


def test_middle_frames():
    assert middle_frames(9, 3) == [2, 4, 6]
    assert middle_frames(9, 1) == [4]


def test_appearance_inputs():
    clouds = [PointCloud(np.array([[t, 0.0, 1000], [t + 1, 2.0, 1000]])) for t in range(9)]
    sets = appearance_inputs(clouds, 3)
    assert [s.split_index for s in sets] == [0, 1, 2]
    ys = np.concatenate([s.xyz[:, 1] for s in sets])
    assert ys.min() == -0.5 and ys.max() == 0.5
    # displacement across frames survives the shared normalization
    assert sets[0].xyz[0, 0] < sets[1].xyz[0, 0] < sets[2].xyz[0, 0]
    with pytest.raises(ValueError, match="too few frames"):
        appearance_inputs(clouds[:2], 3)
    clouds[4] = PointCloud.empty()
    with pytest.raises(EmptyRegionError, match="empty region"):
        appearance_inputs(clouds, 3)


def test_round_trip(tmp_path, rng):
    ps = DvPointSet(rng.normal(size=(17, 3)).astype(np.float32), rng.normal(size=(17, 5)).astype(np.float32))
    path = tmp_path / "a.dv3p"
    write_pointset(path, ps)
    back = read_pointset(path)
    np.testing.assert_array_equal(back.xyz, ps.xyz)
    np.testing.assert_array_equal(back.motion, ps.motion)
    assert to_bytes(back) == path.read_bytes()
    app = AppearancePointSet(np.ones((3, 3)))
    assert from_bytes(to_bytes(app)).channels == 0


def test_format_errors(rng):
    blob = to_bytes(DvPointSet(rng.normal(size=(4, 3)), rng.normal(size=(4, 2))))
    with pytest.raises(PointSetFormatError, match="bad magic"):
        from_bytes(b"NOPE" + blob[4:])
    with pytest.raises(PointSetFormatError, match="unsupported version"):
        from_bytes(blob[:4] + (99).to_bytes(4, "little") + blob[8:])
    with pytest.raises(PointSetFormatError, match="truncated"):
        from_bytes(blob[:-3])


def test_ply_header_count(tmp_path, rng):
    ps = DvPointSet(rng.normal(size=(11, 3)), rng.normal(size=(11, 3)))
    path = tmp_path / "a.ply"
    write_ply(path, ps)
    lines = path.read_text().splitlines()
    assert "element vertex 11" in lines
    assert lines.index("end_header") + 12 == len(lines)
    assert "property float m_split2" in lines
