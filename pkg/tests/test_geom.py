import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from dv3 import geom
from dv3.net import ops

from oracles import brute_ball, brute_coverage, brute_fps


def random_cloud(rng, n, grid=False):
    if grid:  # small integer lattice: many exact ties and duplicates
        return rng.integers(0, 4, (n, 3)).astype(np.float64) / 4
    return rng.uniform(-0.5, 0.5, (n, 3))


def test_fps_examples():
    sq = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], float)
    assert geom.farthest_point_sample(sq, 1, start=2).tolist() == [2]
    assert geom.farthest_point_sample(sq, 2).tolist() == [0, 3]
    order = geom.farthest_point_sample(sq, 4)
    assert sorted(order.tolist()) == [0, 1, 2, 3] and order.tolist() == brute_fps(sq.tolist(), 4)
    with pytest.raises(ValueError):
        geom.farthest_point_sample(sq, 5)


def test_ball_query_examples():
    pts = np.array([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0], [0, 0, 0.1], [0.05, 0, 0], [1, 1, 1]])
    assert geom.ball_query(pts, [5, 5, 5], 0.2, 3).size == 0
    assert geom.ball_query(pts, [0, 0, 0], 0.2, 3).tolist() == [0, 1, 2]
    assert geom.ball_query(np.array([[0.25, 0, 0]]), [0, 0, 0], 0.25, 4).tolist() == [0]


def test_group_examples():
    pts = np.array([[0, 0, 0], [0.05, 0, 0], [5, 5, 5]])
    feats = np.array([[1.0], [2.0], [3.0]])
    spec = geom.GroupSpec(1, 0.1, 4)
    block = geom.group(pts, feats, [2], spec)
    np.testing.assert_array_equal(block[0], np.tile([0, 0, 0, 3.0], (4, 1)))
    block = geom.group(pts, feats, [0], spec)
    np.testing.assert_allclose(block[0, :2], [[0, 0, 0, 1], [0.05, 0, 0, 2]])
    np.testing.assert_allclose(block[0, 2:], [[0, 0, 0, 1]] * 2)
    k1 = geom.group(pts, feats, [1], geom.GroupSpec(1, 0.1, 1))
    np.testing.assert_allclose(k1[0], [[-0.05, 0, 0, 1]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 40), st.booleans())
def test_fps_matches_oracle(seed, n, grid):
    rng = np.random.default_rng(seed)
    pts = random_cloud(rng, n, grid)
    k = int(rng.integers(1, n + 1))
    start = int(rng.integers(0, n))
    expected = brute_fps(pts.tolist(), k, start)
    assert geom.farthest_point_sample(pts, k, start).tolist() == expected
    idx, _ = ops.farthest_point_sample(torch.from_numpy(pts[None]), k, start=start)
    assert idx[0].tolist() == expected


def test_fps_coverage_non_increasing(rng):
    pts = random_cloud(rng, 60)
    order = geom.farthest_point_sample(pts, 60)
    cov = [brute_coverage(pts.tolist(), order[:k].tolist()) for k in range(1, 61)]
    assert all(b <= a for a, b in zip(cov, cov[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 60), st.booleans())
def test_ball_query_matches_oracle(seed, n, grid):
    rng = np.random.default_rng(seed)
    pts = random_cloud(rng, n, grid)
    r = float(rng.choice([0.1, 0.25, 0.5]))
    k = int(rng.integers(1, 16))
    centers = pts[rng.integers(0, n, 5)]
    got, empty = ops.ball_query(torch.from_numpy(pts[None]), torch.from_numpy(centers[None]), r, k)
    for s, c in enumerate(centers):
        expected = brute_ball(pts.tolist(), c.tolist(), r, k)
        assert geom.ball_query(pts, c, r, k).tolist() == expected
        row = got[0, s].tolist()
        assert row[:len(expected)] == expected and not empty[0, s]
        assert all(i == expected[0] for i in row[len(expected):])


def test_group_translation_equivariant(rng):
    pts = random_cloud(rng, 50)
    spec = geom.GroupSpec(5, 0.3, 8)
    cents = geom.farthest_point_sample(pts, 5)
    a = geom.group(pts, None, cents, spec)
    b = geom.group(pts + np.array([3.0, -2.0, 7.0]), None, cents, spec)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_batched_group_matches_reference(rng):
    pts = random_cloud(rng, 40)
    feats = rng.normal(size=(40, 2))
    cents = geom.farthest_point_sample(pts, 6)
    ref = geom.group(pts, feats, cents, geom.GroupSpec(6, 0.2, 5))
    got = ops.group(torch.from_numpy(pts[None]), torch.from_numpy(feats[None]),
                    torch.from_numpy(cents[None]), 0.2, 5)
    np.testing.assert_allclose(got[0].numpy(), ref, atol=1e-12)


def test_validity_mask_excludes_padding():
    pts = torch.tensor([[[0.0, 0, 0], [0.05, 0, 0], [0.0, 0, 0], [0.0, 0, 0]]], dtype=torch.float64)
    valid = torch.tensor([[True, True, False, False]])
    idx, picked = ops.farthest_point_sample(pts, 4, valid)
    assert idx[0, :2].tolist() == [0, 1] and picked[0].tolist() == [True, True, False, False]
    nb, _ = ops.ball_query(pts, pts[:, :1], 0.1, 4, valid)
    assert nb[0, 0].tolist() == [0, 1, 0, 0]
