import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pcgrid.grid_core import DomainError
from pcgrid.losses import chamfer_l2
from pcgrid.metrics import (
    bbox_diagonal,
    consistency,
    f_score,
    farthest_point_sampling,
    fidelity,
    mmd,
    precision_recall,
    u_clutter,
    u_imbalance,
    uniformity,
)
from pcgrid.neighbors import ball_query, nearest, nearest_brute


def fibonacci_sphere(n, radius=0.5):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    return radius * np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], 1)


class TestFScore:
    def test_identical(self, rng):
        c = rng.uniform(-1, 1, (30, 3))
        assert f_score(c, c, 1e-6) == 1.0

    def test_far_apart(self, rng):
        c = rng.uniform(-0.1, 0.1, (30, 3))
        assert f_score(c, c + 0.5, 0.01) == 0.0

    def test_half_and_half(self):
        shared = np.array([[0.0, 0, 0], [0.1, 0, 0]])
        R = np.vstack([shared, [[0.9, 0.9, 0.9], [0.8, 0.9, 0.9]]])
        T = np.vstack([shared, [[-0.9, -0.9, -0.9], [-0.8, -0.9, -0.9]]])
        assert precision_recall(R, T, 0.01) == (0.5, 0.5)
        assert f_score(R, T, 0.01) == 0.5

    def test_threshold_is_strict(self):
        assert f_score([[0, 0, 0]], [[0.5, 0, 0]], 0.5) == 0.0

    def test_errors(self):
        with pytest.raises(DomainError):
            f_score([[0, 0, 0]], [[0, 0, 0]], 0)
        with pytest.raises(DomainError):
            f_score(np.zeros((0, 3)), [[0, 0, 0]])

    @pytest.mark.parametrize("n", [50, 600])
    def test_matches_oracle(self, rng, n):
        R, T = rng.uniform(-1, 1, (2, n, 3))
        assert f_score(R, T, 0.1) == pytest.approx(oracles.f_score(R, T, 0.1), abs=1e-12)


class TestConsistency:
    def test_identical_frames(self, rng):
        c = rng.uniform(-1, 1, (20, 3))
        for k in (2, 3, 5):
            assert consistency([c] * k) == 0.0

    def test_two_and_three_frames(self, rng):
        a, b, c = rng.uniform(-1, 1, (3, 15, 3))
        assert consistency([a, b]) == chamfer_l2(a, b).value
        expected = (chamfer_l2(a, b).value + chamfer_l2(b, c).value) / 2
        assert consistency([a, b, c]) == pytest.approx(expected, rel=1e-15)

    def test_needs_two(self, rng):
        with pytest.raises(DomainError):
            consistency([rng.uniform(-1, 1, (5, 3))])


class TestFidelityMMD:
    def test_subset(self, rng):
        out = rng.uniform(-1, 1, (40, 3))
        assert fidelity(out[:10], out) == 0.0

    def test_hand_value(self):
        assert fidelity([[0, 0, 0]], [[0, 0, 1]]) == 1.0

    @pytest.mark.parametrize("n", [20, 700])
    def test_oracle(self, rng, n):
        a, b = rng.uniform(-1, 1, (2, n, 3))
        assert abs(fidelity(a, b) - oracles.fidelity(a, b)) <= 1e-12

    def test_mmd(self, rng):
        out = rng.uniform(-1, 1, (30, 3))
        refs = list(rng.uniform(-1, 1, (3, 25, 3)))
        assert mmd(out, refs) == min(chamfer_l2(out, r).value for r in refs)
        assert mmd(out, [refs[0]]) == chamfer_l2(out, refs[0]).value
        assert mmd(out, refs + [out]) == 0.0
        with pytest.raises(DomainError):
            mmd(out, [])


class TestFPS:
    def test_all(self, rng):
        c = rng.uniform(-1, 1, (12, 3))
        assert sorted(farthest_point_sampling(c, 12, seed=0).tolist()) == list(range(12))

    def test_single(self, rng):
        c = rng.uniform(-1, 1, (12, 3))
        assert farthest_point_sampling(c, 1, seed=5)[0] == np.random.default_rng(5).integers(12)

    def test_segment_from_midpoint(self):
        seg = np.array([[-0.5, 0, 0], [0.0, 0, 0], [0.5, 0, 0]])
        picks = farthest_point_sampling(seg, 2, start=1)
        assert picks[0] == 1 and picks[1] in (0, 2)

    def test_too_many(self):
        with pytest.raises(DomainError):
            farthest_point_sampling(np.zeros((3, 3)), 4)

    def test_deterministic(self, rng):
        c = rng.uniform(-1, 1, (100, 3))
        assert np.array_equal(farthest_point_sampling(c, 10, 3), farthest_point_sampling(c, 10, 3))


class TestUniformity:
    def test_components(self):
        assert u_imbalance(5, 5.0) == 0.0
        assert u_imbalance(3, 1.0) == 4.0
        assert u_clutter(np.zeros((1, 3)), 0.01) == 0.0
        p = 0.01
        d_hat = np.sqrt(2 * np.pi * p / (2 * np.sqrt(3)))
        assert u_clutter(np.array([[0, 0, 0], [d_hat, 0, 0]]), p) == pytest.approx(0.0, abs=1e-15)

    def test_clutter_large_patch_path(self, rng):
        patch = rng.uniform(-1, 1, (1500, 3))
        d2 = ((patch[:, None] - patch[None]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        dist = np.sqrt(d2.min(1))
        d_hat = np.sqrt(2 * np.pi * 0.01 / (1500 * np.sqrt(3)))
        assert u_clutter(patch, 0.01) == pytest.approx(np.mean((dist - d_hat) ** 2 / d_hat), rel=1e-10)

    def test_uniform_beats_clustered(self):
        pts = fibonacci_sphere(2000)
        centers = np.array([[0.5, 0, 0], [-0.5, 0, 0], [0, 0.5, 0], [0, -0.5, 0]])
        clustered = centers[np.arange(2000) % 4] + 0.01 * (pts / 0.5)
        u = [uniformity(pts, 0.01, 10, seed=s) for s in range(5)]
        c = [uniformity(clustered, 0.01, 10, seed=s) for s in range(5)]
        assert np.median(u) < np.median(c)

    def test_rotation_invariant(self):
        pts = fibonacci_sphere(800)
        a = 0.7
        rot = np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]])
        assert uniformity(pts @ rot.T, seed=2) == pytest.approx(uniformity(pts, seed=2), rel=1e-9)

    def test_errors(self, rng):
        c = rng.uniform(-1, 1, (100, 3))
        with pytest.raises(DomainError):
            uniformity(c, p=0.01)  # expected patch size 1
        with pytest.raises(DomainError):
            uniformity(c, p=1.5)
        with pytest.raises(DomainError):
            uniformity(c, M=0)


class TestNeighbors:
    @pytest.mark.parametrize("m", [10, 255, 256, 2000])
    def test_fast_equals_brute(self, rng, m):
        q, r = rng.uniform(-1, 1, (300, 3)), rng.uniform(-1, 1, (m, 3))
        a, b = nearest(q, r), nearest_brute(q, r)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_ties_go_to_lowest_index(self):
        ref = np.vstack([np.zeros((300, 3)), [[1.0, 0, 0]]])
        idx, _ = nearest(np.array([[0.1, 0, 0]]), ref)
        assert idx[0] == 0

    @pytest.mark.parametrize("copies", [2, 8, 31, 32, 33, 60])
    def test_duplicated_references_match_brute(self, rng, copies):
        # tiled clouds hold exact duplicates, some beyond the candidate count
        r = rng.permutation(np.repeat(rng.uniform(-1, 1, (300, 3)), copies, axis=0))
        q = np.vstack([rng.uniform(-1, 1, (200, 3)), r[:50]])
        a, b = nearest(q, r), nearest_brute(q, r)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_ball_query_inclusive(self):
        pts = np.array([[0, 0, 0], [0.5, 0, 0], [0.6, 0, 0]])
        assert ball_query(pts, pts[0], 0.5).tolist() == [0, 1]

    def test_bbox_diagonal(self):
        assert bbox_diagonal([[0, 0, 0], [0.3, 0.4, 0]]) == pytest.approx(0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 60))
def test_metrics_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    R, T = rng.uniform(-1, 1, (2, n, 3))
    perm = rng.permutation(n)
    assert f_score(R, T, 0.3) == f_score(R[perm], T, 0.3)
    assert f_score(R, T, 0.3) == f_score(T, R, 0.3)
    assert fidelity(R, T) == pytest.approx(fidelity(R[perm], T), rel=1e-14)
