import math

import numpy as np
import pytest

from rgbdcrf.core import DimensionMismatchError
from rgbdcrf.lattice import (
    FeatureMatrix,
    build_lattice,
    gaussian_filter_bruteforce,
    gaussian_filter_lattice,
)


def scene_features(h, w, rng, regions=2):
    """Image-like 6-dim features: dense positions, piecewise color/depth
    with mild noise, already bandwidth-normalized."""
    ys, xs = np.mgrid[0:h, 0:w]
    pos = np.stack([xs.ravel() / 4.0, ys.ravel() / 4.0], axis=1)
    edges = np.sort(rng.integers(1, w, size=regions - 1)) if regions > 1 else []
    region = np.zeros((h, w), dtype=int)
    for e in edges:
        region[:, e:] += 1
    colors = rng.uniform(0, 255, size=(regions, 3))
    depths = rng.uniform(0, 255, size=regions)
    col = colors[region].reshape(-1, 3) + rng.normal(0, 4.0, size=(h * w, 3))
    dep = depths[region].reshape(-1, 1) + rng.normal(0, 4.0, size=(h * w, 1))
    return FeatureMatrix(rows=np.concatenate([pos, col / 60.0, dep / 60.0], axis=1))


def random_features(n, dim, rng, spread=0.75):
    return FeatureMatrix(rows=rng.normal(0, spread, size=(n, dim)))


class TestBruteForce:
    def test_single_pixel_no_neighbors(self):
        out = gaussian_filter_bruteforce(FeatureMatrix(rows=np.zeros((1, 3))), np.array([5.0]))
        assert out[0] == 0.0

    def test_identical_features_swap(self):
        feats = FeatureMatrix(rows=np.zeros((2, 4)))
        out = gaussian_filter_bruteforce(feats, np.array([[1.0, 3.0], [2.0, 7.0]]))
        assert np.allclose(out, [[2.0, 7.0], [1.0, 3.0]])

    def test_unit_distance_kernel(self):
        feats = FeatureMatrix(rows=np.array([[0.0, 0.0], [1.0, 0.0]]))
        out = gaussian_filter_bruteforce(feats, np.array([1.0, 0.0]))
        assert out[0] == pytest.approx(0.0, abs=1e-12)
        assert out[1] == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_operator_symmetry(self, rng):
        feats = random_features(40, 5, rng)
        for _ in range(5):
            v = rng.normal(size=40)
            w = rng.normal(size=40)
            lhs = np.dot(gaussian_filter_bruteforce(feats, v), w)
            rhs = np.dot(v, gaussian_filter_bruteforce(feats, w))
            assert lhs == pytest.approx(rhs, abs=1e-9 * max(1.0, abs(lhs)))

    def test_value_shape_mismatch(self, rng):
        feats = random_features(8, 2, rng)
        with pytest.raises(DimensionMismatchError):
            gaussian_filter_bruteforce(feats, np.zeros(9))


class TestLatticeBuild:
    def test_build_is_reusable(self, rng):
        feats = scene_features(32, 32, rng)
        lattice = build_lattice(feats)
        values = rng.uniform(size=(1024, 3))
        first = gaussian_filter_lattice(lattice, values)
        second = gaussian_filter_lattice(lattice, values)
        assert (first == second).all()
        # different channel count on the same structure
        more = gaussian_filter_lattice(lattice, rng.uniform(size=(1024, 7)))
        assert more.shape == (1024, 7)

    def test_all_ones_positive(self, rng):
        feats = scene_features(32, 32, rng)
        lattice = build_lattice(feats)
        out = gaussian_filter_lattice(lattice, np.ones(1024))
        assert (out > 0).all()

    def test_matches_bruteforce_on_scenes(self, rng):
        worst = 0.0
        for _ in range(5):
            feats = scene_features(16, 16, rng, regions=int(rng.integers(1, 4)))
            values = rng.uniform(size=(256, 4))
            ref = gaussian_filter_bruteforce(feats, values)
            approx = gaussian_filter_lattice(build_lattice(feats), values)
            rel = np.linalg.norm(approx - ref) / np.linalg.norm(ref)
            worst = max(worst, rel)
        assert worst <= 0.05

    def test_matches_bruteforce_on_clusters(self, rng):
        for dim in (2, 3, 5, 6):
            feats = random_features(200, dim, rng)
            values = rng.uniform(size=(200, 2))
            ref = gaussian_filter_bruteforce(feats, values)
            approx = gaussian_filter_lattice(build_lattice(feats), values)
            rel = np.linalg.norm(approx - ref) / np.linalg.norm(ref)
            assert rel <= 0.05, f"dim {dim}: {rel}"


class TestLatticeFilter:
    def test_linearity(self, rng):
        feats = scene_features(12, 12, rng)
        lattice = build_lattice(feats)
        v = rng.normal(size=(144, 2))
        w = rng.normal(size=(144, 2))
        a, b = 1.7, -0.4
        combined = gaussian_filter_lattice(lattice, a * v + b * w)
        separate = a * gaussian_filter_lattice(lattice, v) + b * gaussian_filter_lattice(
            lattice, w
        )
        assert np.allclose(combined, separate, rtol=1e-9, atol=1e-9)

    def test_permutation_equivariance(self, rng):
        feats = scene_features(10, 10, rng)
        values = rng.uniform(size=(100, 3))
        out = gaussian_filter_lattice(build_lattice(feats), values)
        perm = rng.permutation(100)
        feats_p = FeatureMatrix(rows=feats.rows[perm])
        out_p = gaussian_filter_lattice(build_lattice(feats_p), values[perm])
        assert np.allclose(out_p, out[perm], rtol=1e-9, atol=1e-9)

    def test_mirrored_scene(self, rng):
        # mirroring the raster reflects position features; the structure is
        # rebuilt so agreement is within the approximation budget
        feats = scene_features(12, 12, rng)
        rows = feats.rows.reshape(12, 12, 6)
        mirrored = rows[:, ::-1].copy()
        mirrored[..., 0] = rows[..., 0].max() - mirrored[..., 0]
        values = rng.uniform(size=(144, 2))
        out = gaussian_filter_lattice(build_lattice(feats), values)
        out_m = gaussian_filter_lattice(
            build_lattice(FeatureMatrix(rows=mirrored.reshape(-1, 6))),
            values.reshape(12, 12, 2)[:, ::-1].reshape(-1, 2),
        )
        out_m_back = out_m.reshape(12, 12, 2)[:, ::-1].reshape(-1, 2)
        rel = np.linalg.norm(out_m_back - out) / np.linalg.norm(out)
        assert rel <= 0.02

    def test_mirrored_scene_exact_for_bruteforce(self, rng):
        feats = scene_features(8, 8, rng)
        rows = feats.rows.reshape(8, 8, 6)
        mirrored = rows[:, ::-1].copy()
        mirrored[..., 0] = rows[..., 0].max() - mirrored[..., 0]
        values = rng.uniform(size=(64, 2))
        out = gaussian_filter_bruteforce(feats, values)
        out_m = gaussian_filter_bruteforce(
            FeatureMatrix(rows=mirrored.reshape(-1, 6)),
            values.reshape(8, 8, 2)[:, ::-1].reshape(-1, 2),
        )
        assert np.allclose(out_m.reshape(8, 8, 2)[:, ::-1].reshape(-1, 2), out, atol=1e-9)

    def test_pixel_count_mismatch(self, rng):
        lattice = build_lattice(random_features(10, 3, rng))
        with pytest.raises(DimensionMismatchError):
            gaussian_filter_lattice(lattice, np.zeros(11))

    def test_single_pixel_filters_to_zero(self):
        lattice = build_lattice(FeatureMatrix(rows=np.array([[0.3, 0.7, 0.1]])))
        out = gaussian_filter_lattice(lattice, np.array([4.0]))
        assert out[0] == pytest.approx(0.0, abs=1e-9)


class TestFeatureMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            FeatureMatrix(rows=np.array([[np.inf, 0.0]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(DimensionMismatchError):
            FeatureMatrix(rows=np.zeros(4))
