"""End-to-end trial execution across the three chains."""

from dataclasses import replace

import numpy as np
import pytest

from sct.config import TrialConfig
from sct.pipeline import load_scene, run_trial


def base_cfg(**overrides) -> TrialConfig:
    cfg = TrialConfig(source_pattern="two-region", source_size=64,
                      rate_r=0.125, snr_db=1.0, seed=3)
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


class TestScene:
    def test_fills_are_label_means(self):
        scene = load_scene(base_cfg())
        assert scene.fills[0] == 104  # flat region's exact value
        assert abs(int(scene.fills[1]) - 104) <= 2  # texture mean near base

    def test_importance_concentrates_on_texture(self):
        scene = load_scene(base_cfg())
        top = max(scene.sfvs, key=lambda s: s.score)
        assert top.label == 1
        assert scene.importance.values.shape == (8, 8)

    def test_external_image_with_label_map(self, tmp_path):
        from sct.source_io import SourceImage, write_image
        rng = np.random.default_rng(100)
        img = SourceImage(24, 16, rng.integers(0, 256, (16, 24),
                                               dtype=np.uint8))
        labels = np.zeros((16, 24), dtype=np.uint8)
        labels[:, 12:] = 9
        write_image(img, str(tmp_path / "src.pgm"))
        write_image(SourceImage(24, 16, labels), str(tmp_path / "lab.pgm"))
        cfg = base_cfg(source_path=str(tmp_path / "src.pgm"),
                       labels_path=str(tmp_path / "lab.pgm"))
        scene = load_scene(cfg)
        assert scene.labels.labels.shape == (2, 3)
        assert sorted({s.label for s in scene.sfvs}) == [0, 1]


class TestDeterminism:
    @pytest.mark.parametrize("chain", ["digital", "analog", "baseline"])
    def test_same_seed_same_bytes(self, chain):
        cfg = base_cfg(chain=chain, fading="rayleigh-block")
        a = run_trial(cfg)
        b = run_trial(base_cfg(chain=chain, fading="rayleigh-block"))
        assert np.array_equal(a.image, b.image)
        assert a.report.psnr == b.report.psnr
        assert a.report.flags == b.report.flags
        assert np.array_equal(a.mask, b.mask)

    def test_different_seed_different_noise(self):
        outcomes = {run_trial(base_cfg(seed=s)).report.psnr
                    for s in range(6)}
        assert len(outcomes) > 1


class TestNoiselessOperation:
    def test_digital_matches_quantized_reference_exactly(self):
        cfg = base_cfg(snr_db=120.0)
        result = run_trial(cfg)
        assert result.report.mask_fraction == 0.0
        assert np.array_equal(result.image, result.clean_image)
        assert "side-info-lost" not in result.report.flags

    def test_analog_matches_clean_rendering_exactly(self):
        cfg = base_cfg(chain="analog", snr_db=200.0)
        result = run_trial(cfg)
        assert np.array_equal(result.image, result.clean_image)
        assert result.report.psnr > 25.0

    def test_baseline_noiseless_recovers_covered_blocks(self):
        cfg = base_cfg(chain="baseline", snr_db=120.0)
        result = run_trial(cfg)
        assert np.array_equal(result.image, result.clean_image)
        assert result.report.psnr > 25.0


class TestBudgets:
    @pytest.mark.parametrize("chain", ["digital", "analog", "baseline"])
    @pytest.mark.parametrize("rate", [0.05, 0.125, 0.4])
    def test_symbols_never_exceed_budget(self, chain, rate):
        cfg = base_cfg(chain=chain, rate_r=rate, seed=11)
        result = run_trial(cfg)
        assert result.budget == int(np.floor(rate * 64 * 64))
        assert result.symbols_used + result.side_info_symbols <= result.budget
        assert result.report.side_info_fraction == pytest.approx(
            result.side_info_symbols / result.budget)

    def test_digital_selective_side_info_cost(self):
        result = run_trial(base_cfg(seed=1))
        assert result.mode == "selective"
        assert result.side_info_symbols == 110  # 13-byte label stream

    def test_analog_side_info_drops_to_scalar_tier(self):
        result = run_trial(base_cfg(chain="analog", seed=1))
        # full 64-sigma records would cost 638 symbols; the scalar tier
        # fits a 16-byte stream
        assert result.side_info_symbols == 134

    def test_guardrail_falls_back_to_overall(self):
        result = run_trial(base_cfg(rate_r=0.05, seed=1))
        assert result.mode == "overall"
        assert "side-info-guardrail" in result.report.flags
        assert result.side_info_symbols == 0

    def test_high_rate_keeps_selective_mode(self):
        result = run_trial(base_cfg(rate_r=0.4, seed=1))
        assert result.mode == "selective"
        assert "side-info-guardrail" not in result.report.flags


class TestBaselineShape:
    def test_baseline_has_no_semantic_machinery(self):
        result = run_trial(base_cfg(chain="baseline", seed=5))
        assert result.mode is None
        assert result.plan is None
        assert result.side_info_symbols == 0
        assert result.report.flags == ()

    def test_desync_masks_a_suffix(self):
        # find a seed with a mid-stream failure and check the suffix shape
        for seed in range(40):
            result = run_trial(base_cfg(chain="baseline", seed=seed))
            flat = result.mask.ravel()
            if flat.any() and not flat.all():
                first_bad = int(np.argmax(flat))
                assert flat[first_bad:].all()
                return
        pytest.skip("no partial baseline failure in the seed range")


class TestCorrectionToggle:
    def test_disabling_correction_changes_only_masked_blocks(self):
        for seed in range(40):
            on = run_trial(base_cfg(seed=seed, correction_enabled=True))
            if not on.mask.any():
                continue
            off = run_trial(base_cfg(seed=seed, correction_enabled=False))
            assert np.array_equal(on.mask, off.mask)
            diff_blocks = set()
            h, w = on.original.shape
            delta = on.image.astype(int) != off.image.astype(int)
            for rr in range(on.grid.rows):
                for cc in range(on.grid.cols):
                    patch = delta[rr * 8:(rr + 1) * 8, cc * 8:(cc + 1) * 8]
                    if patch.any():
                        diff_blocks.add((rr, cc))
            masked = {(int(r), int(c)) for r, c in zip(*np.nonzero(on.mask))}
            assert diff_blocks <= masked
            return
        pytest.skip("no masked trial in the seed range")


class TestResultShapes:
    @pytest.mark.parametrize("chain", ["digital", "analog", "baseline"])
    def test_field_shapes(self, chain):
        result = run_trial(base_cfg(chain=chain))
        assert result.image.shape == (64, 64)
        assert result.image.dtype == np.uint8
        assert result.original.shape == (64, 64)
        assert result.clean_image.shape == (64, 64)
        assert result.coeffs.shape == (8, 8, 64)
        assert result.mask.shape == (8, 8)
        assert result.block_labels.shape == (8, 8)
        assert result.pixel_labels.shape == (64, 64)
        assert result.report.mask_fraction == pytest.approx(
            result.mask.mean())

    def test_explicit_rb_pool(self):
        cfg = base_cfg(n_rb=60, fading="rayleigh-block", chain="analog")
        result = run_trial(cfg)
        assert result.report.psnr > 5.0
