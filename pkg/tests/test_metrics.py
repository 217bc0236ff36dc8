import math

import numpy as np
import pytest

from mrcodec import metrics
from mrcodec.synthetic import make_patch_set


class TestPsnr:
    def test_identical_is_inf_capped_for_csv(self):
        img = np.full((4, 4, 3), 7, np.uint8)
        val = metrics.psnr(img, img)
        assert math.isinf(val)
        assert metrics.psnr_for_csv(val) == 99.0

    def test_max_difference_zero_db(self):
        a = np.zeros((4, 4, 3), np.uint8)
        b = np.full((4, 4, 3), 255, np.uint8)
        assert metrics.psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_mse_100(self):
        a = np.zeros((10, 10, 3), np.float64)
        b = np.full((10, 10, 3), 10.0)
        assert metrics.psnr(a, b) == pytest.approx(28.130803608679106, rel=1e-12)

    def test_symmetric_and_permutation_invariant(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)
        b = rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)
        assert metrics.psnr(a, b) == metrics.psnr(b, a)
        perm = rng.permutation(64)
        ap = a.reshape(64, 3)[perm].reshape(8, 8, 3)
        bp = b.reshape(64, 3)[perm].reshape(8, 8, 3)
        assert metrics.psnr(ap, bp) == pytest.approx(metrics.psnr(a, b), rel=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(metrics.MetricsError):
            metrics.psnr(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))


class TestExtractPatches:
    def test_exact_size_single_patch(self):
        img = np.zeros((256, 256, 3), np.uint8)
        assert len(metrics.extract_patches(img, 256)) == 1

    def test_512_gives_nine(self):
        img = np.zeros((512, 512, 3), np.uint8)
        patches = metrics.extract_patches(img, 256)
        assert len(patches) == 9

    def test_coverage(self):
        h, w, size = 300, 437, 128
        count = np.zeros(h * w, np.int32)
        marker = np.arange(h * w).reshape(h, w)
        for p in metrics.extract_patches(marker, size):
            count[p.reshape(-1)] += 1
        assert (count > 0).all()

    def test_too_small_raises(self):
        with pytest.raises(metrics.MetricsError):
            metrics.extract_patches(np.zeros((100, 300, 3)), 256)


class TestFrechet:
    def test_identical_zero(self):
        rng = np.random.default_rng(0)
        s = metrics.FeatureStats.from_features(rng.normal(size=(500, 8)))
        assert metrics.frechet_distance(s, s) == pytest.approx(0.0, abs=1e-9)

    def test_identity_cov_mean_shift(self):
        dim = 5
        delta = np.arange(1.0, 6.0)
        a = metrics.FeatureStats(np.zeros(dim), np.eye(dim), 1000)
        b = metrics.FeatureStats(delta, np.eye(dim), 1000)
        assert metrics.frechet_distance(a, b) == pytest.approx(float(delta @ delta), rel=1e-9)

    def test_diagonal_case(self):
        a = metrics.FeatureStats(np.zeros(2), 4.0 * np.eye(2), 1000)
        b = metrics.FeatureStats(np.zeros(2), np.eye(2), 1000)
        # Tr(4I + I - 2*sqrt(4I * I)) = Tr(5I - 4I) = 2
        assert metrics.frechet_distance(a, b) == pytest.approx(2.0, rel=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(400, 6))
        y = rng.normal(size=(400, 6)) * 1.5 + 0.3
        a = metrics.FeatureStats.from_features(x)
        b = metrics.FeatureStats.from_features(y)
        assert metrics.frechet_distance(a, b) == pytest.approx(
            metrics.frechet_distance(b, a), rel=1e-9)

    def test_dim_mismatch(self):
        a = metrics.FeatureStats(np.zeros(2), np.eye(2), 10)
        b = metrics.FeatureStats(np.zeros(3), np.eye(3), 10)
        with pytest.raises(metrics.MetricsError):
            metrics.frechet_distance(a, b)


class TestFeatureStats:
    def test_merge_matches_pooled(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(300, 5))
        merged = metrics.FeatureStats.from_features(x[:120]).merge(
            metrics.FeatureStats.from_features(x[120:]))
        pooled = metrics.FeatureStats.from_features(x)
        np.testing.assert_allclose(merged.mean, pooled.mean, rtol=1e-10)
        np.testing.assert_allclose(merged.cov, pooled.cov, rtol=1e-10)
        assert merged.n == pooled.n

    def test_needs_two_samples(self):
        with pytest.raises(metrics.MetricsError):
            metrics.FeatureStats.from_features(np.zeros((1, 4)))


class TestPatchedFid:
    def test_self_distance_tiny(self):
        patches = make_patch_set(400, 64, seed=0)
        ext = metrics.PatchFeatureExtractor()
        val = metrics.patched_fid(list(patches), list(patches), ext, patch_size=None)
        assert val < 1e-6

    def test_corruption_ladder_monotone(self):
        rng = np.random.default_rng(4)
        patches = make_patch_set(400, 64, seed=1)
        ext = metrics.PatchFeatureExtractor()
        scores = []
        for sigma in (0.0, 12.0, 40.0):
            noisy = np.clip(patches.astype(np.float64)
                            + rng.normal(0, sigma, patches.shape), 0, 255).astype(np.uint8)
            scores.append(metrics.patched_fid(
                list(patches), list(noisy), ext, patch_size=None))
        assert scores[0] < scores[1] < scores[2]

    def test_too_few_patches_refused(self):
        patches = make_patch_set(30, 64, seed=2)
        ext = metrics.PatchFeatureExtractor()
        with pytest.raises(metrics.MetricsError, match="patches"):
            metrics.patched_fid(list(patches), list(patches), ext, patch_size=None)

    def test_one_patch_per_256_image(self):
        imgs = make_patch_set(4, 256, seed=3)
        ext = metrics.PatchFeatureExtractor()
        feats = metrics.features_of_set(list(imgs), ext, patch_size=256)
        assert feats.shape == (4, ext.feature_dim)


class TestRdCurves:
    def _points(self):
        return [
            metrics.RDPoint("multi", "r0", 0.25, 0.0, 30.0, 0.5),
            metrics.RDPoint("multi", "r0", 0.25, 2.56, 28.9, 0.2),
            metrics.RDPoint("multi", "r1", 0.5, 0.0, 33.0, 0.4),
            metrics.RDPoint("multi", "r1", 0.5, 2.56, 31.7, 0.15),
        ]

    def test_csv_roundtrip(self, tmp_path):
        pts = self._points()
        path = tmp_path / "pts.csv"
        metrics.write_rd_csv(pts, path)
        back = metrics.read_rd_csv(path)
        assert back == pts

    def test_header_only_when_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        metrics.write_rd_csv([], path)
        lines = path.read_text().strip().splitlines()
        assert lines == ["model,rate_label,bpp,beta,psnr_db,fid"]

    def test_emit_artifacts(self, tmp_path):
        csv_path, tradeoff, rates = metrics.emit_rd_curves(self._points(), tmp_path)
        assert csv_path.exists() and tradeoff.exists() and rates.exists()
        assert tradeoff.suffix == ".svg"
        # a multi-realism model contributes a chain of >= 2 points per rate
        by_rate = {}
        for p in metrics.read_rd_csv(csv_path):
            by_rate.setdefault(p.rate_label, []).append(p)
        assert all(len(v) >= 2 for v in by_rate.values())

    def test_inf_psnr_capped_in_csv(self, tmp_path):
        pts = [metrics.RDPoint("m", "r", 0.1, 0.0, math.inf, 0.0)]
        path = tmp_path / "cap.csv"
        metrics.write_rd_csv(pts, path)
        assert metrics.read_rd_csv(path)[0].psnr_db == 99.0
