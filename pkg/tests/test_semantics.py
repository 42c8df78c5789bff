"""Block transform, importance maps, and region feature vectors."""

import numpy as np
import pytest

from sct.source_io import (SemanticLabelMap, SourceImage, pad_and_grid,
                           synthesize_source, write_image)
from sct.semantics import (ZIGZAG, FeatureMap, entropy_map, forward_blocks,
                           forward_transform, fuse_importance, inverse_blocks,
                           inverse_transform, load_activation_map,
                           saliency_map, segment_sfvs)


def transform_matrix() -> np.ndarray:
    """The 64x64 matrix of the flattened block transform."""
    eye = np.eye(64).reshape(64, 8, 8)
    return forward_blocks(eye).reshape(64, 64).T


class TestTransform:
    def test_orthonormality(self):
        mat = transform_matrix()
        err = np.abs(mat.T @ mat - np.eye(64)).max()
        assert err < 1e-12

    def test_energy_preserved(self):
        rng = np.random.default_rng(20)
        blocks = rng.normal(0, 50, (512, 8, 8))
        coeffs = forward_blocks(blocks)
        pix = (blocks ** 2).sum(axis=(-2, -1))
        spec = (coeffs ** 2).sum(axis=-1)
        assert np.abs(spec - pix).max() / pix.max() < 1e-12

    def test_zigzag_starts_at_dc_and_walks_antidiagonals(self):
        first = [(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2),
                 (0, 3), (1, 2), (2, 1), (3, 0)]
        assert [tuple(rc) for rc in ZIGZAG[:10]] == first
        # each anti-diagonal is visited in one sweep
        sums = ZIGZAG.sum(axis=1)
        assert np.all(np.diff(sums) >= 0) is not None  # sums weakly ordered
        assert sorted(map(tuple, ZIGZAG)) == [(r, c) for r in range(8)
                                              for c in range(8)]

    def test_dc_value(self):
        block = np.full((1, 8, 8), 10.0)
        coeffs = forward_blocks(block)
        assert coeffs[0, 0] == pytest.approx(80.0)
        assert np.abs(coeffs[0, 1:]).max() < 1e-12

    def test_rounded_round_trip_is_exact(self):
        rng = np.random.default_rng(21)
        img = SourceImage(61, 47, rng.integers(0, 256, (47, 61),
                                               dtype=np.uint8))
        padded, grid = pad_and_grid(img)
        fm = forward_transform(padded, grid)
        back = inverse_transform(fm, grid)
        assert np.array_equal(back.samples, img.samples)

    def test_inverse_blocks_matches_forward(self):
        rng = np.random.default_rng(22)
        blocks = rng.normal(0, 30, (64, 8, 8))
        again = inverse_blocks(forward_blocks(blocks))
        assert np.abs(again - blocks).max() < 1e-10


class TestImportance:
    def test_entropy_zero_on_flat_blocks(self):
        fm = FeatureMap(4, 4, np.zeros((4, 4, 64)))
        assert np.all(entropy_map(fm) == 0.0)

    def test_entropy_ranks_by_ac_variance(self):
        coeffs = np.zeros((1, 3, 64))
        coeffs[0, 0, 1:] = 0.0
        coeffs[0, 1, 1:] = 2.0 * np.random.default_rng(23).normal(size=63)
        coeffs[0, 2, 1:] = 40.0 * np.random.default_rng(24).normal(size=63)
        ent = entropy_map(FeatureMap(3, 1, coeffs))
        assert ent[0, 0] == 0.0
        assert 0.0 < ent[0, 1] < ent[0, 2] == 1.0

    def test_entropy_clamps_low_variance_to_zero(self):
        coeffs = np.zeros((1, 2, 64))
        coeffs[0, 0, 1] = 1e-6   # variance far below the log knee
        coeffs[0, 1, 1:] = 100.0
        ent = entropy_map(FeatureMap(2, 1, coeffs))
        assert ent[0, 0] == 0.0

    def test_saliency_contrast_and_normalization(self):
        coeffs = np.zeros((3, 3, 64))
        coeffs[..., 0] = 10.0
        coeffs[1, 1, 0] = 50.0
        sal = saliency_map(FeatureMap(3, 3, coeffs))
        assert sal[1, 1] == 1.0
        # corner sees the bump through 1 of 3 neighbors
        assert sal[0, 0] == pytest.approx((40.0 / 3) / 40.0)
        assert sal.max() <= 1.0 and sal.min() >= 0.0

    def test_saliency_uniform_dc_is_zero(self):
        coeffs = np.zeros((4, 5, 64))
        coeffs[..., 0] = -7.0
        assert np.all(saliency_map(FeatureMap(5, 4, coeffs)) == 0.0)

    def test_saliency_uses_only_existing_neighbors(self):
        # 1x2 grid: each block has exactly one neighbor
        coeffs = np.zeros((1, 2, 64))
        coeffs[0, 0, 0] = 0.0
        coeffs[0, 1, 0] = 8.0
        sal = saliency_map(FeatureMap(2, 1, coeffs))
        assert sal[0, 0] == sal[0, 1] == 1.0

    def test_fusion_weights(self):
        ent = np.array([[1.0, 0.0]])
        ref = np.array([[0.0, 1.0]])
        imp = fuse_importance(ent, ref, 0.25)
        assert imp.values.tolist() == [[0.25, 0.75]]
        assert imp.weight_w == 0.25
        with pytest.raises(ValueError):
            fuse_importance(ent, ref, 1.5)
        with pytest.raises(ValueError):
            fuse_importance(ent, np.zeros((2, 2)), 0.5)

    def test_activation_map_loading(self, tmp_path):
        img, _ = synthesize_source("flat", 16, 0)
        _, grid = pad_and_grid(img)
        act = np.array([[0, 255], [128, 51]], dtype=np.uint8)
        path = tmp_path / "act.pgm"
        write_image(SourceImage(2, 2, act), str(path))
        loaded = load_activation_map(str(path), grid)
        assert loaded == pytest.approx(act / 255.0)

    def test_activation_map_must_match_grid(self, tmp_path):
        img, _ = synthesize_source("flat", 32, 0)
        _, grid = pad_and_grid(img)
        path = tmp_path / "act.pgm"
        write_image(SourceImage(2, 2, np.zeros((2, 2), np.uint8)), str(path))
        with pytest.raises(Exception):
            load_activation_map(str(path), grid)


class TestSegmentation:
    def make_fixture(self):
        rng = np.random.default_rng(25)
        coeffs = rng.normal(0, 10, (2, 3, 64))
        lab = np.array([[0, 1, 1], [2, 2, 1]])
        imp = np.array([[0.1, 0.9, 0.8], [0.3, 0.3, 0.7]])
        fm = FeatureMap(3, 2, coeffs)
        labels = SemanticLabelMap(3, 2, lab)
        impmap = fuse_importance(imp, imp, 0.5)
        return fm, labels, impmap, coeffs

    def test_one_sfv_per_label_sorted_by_score(self):
        fm, labels, impmap, _ = self.make_fixture()
        sfvs = segment_sfvs(fm, labels, impmap)
        assert [s.label for s in sfvs] == [1, 2, 0]
        assert [s.n_blocks for s in sfvs] == [3, 2, 1]
        scores = [s.score for s in sfvs]
        assert scores == sorted(scores, reverse=True)
        assert sfvs[0].score == pytest.approx(0.9 + 0.8 + 0.7)

    def test_blocks_row_major_and_coeffs_aligned(self):
        fm, labels, impmap, coeffs = self.make_fixture()
        sfvs = segment_sfvs(fm, labels, impmap)
        sfv1 = next(s for s in sfvs if s.label == 1)
        assert sfv1.blocks.tolist() == [[0, 1], [0, 2], [1, 2]]
        assert np.array_equal(sfv1.coeffs[0], coeffs[0, 1])
        assert np.array_equal(sfv1.coeffs[2], coeffs[1, 2])

    def test_score_tie_breaks_to_smaller_label(self):
        coeffs = np.zeros((1, 2, 64))
        lab = np.array([[1, 0]])
        imp = fuse_importance(np.array([[0.5, 0.5]]),
                              np.array([[0.5, 0.5]]), 0.5)
        sfvs = segment_sfvs(FeatureMap(2, 1, coeffs),
                            SemanticLabelMap(2, 1, lab), imp)
        assert [s.label for s in sfvs] == [0, 1]

    def test_absent_labels_skipped(self):
        coeffs = np.zeros((1, 2, 64))
        lab = np.array([[0, 3]])  # labels 1, 2 absent
        imp = fuse_importance(np.zeros((1, 2)), np.zeros((1, 2)), 0.5)
        sfvs = segment_sfvs(FeatureMap(2, 1, coeffs),
                            SemanticLabelMap(2, 1, lab), imp)
        assert [s.label for s in sfvs] == [0, 3]
