import numpy as np
import pytest
import torch

from photorevive.model import RepairModel, tiny_model_config
from photorevive.pipeline import (MAX_LONG_SIDE, PipelineError, RepairPipeline,
                                  RepairRequest)
from photorevive.refselect import CorpusIndex, ReferenceSelector


@pytest.fixture(scope="module")
def pipeline():
    torch.manual_seed(0)
    return RepairPipeline(RepairModel(tiny_model_config()))


@pytest.fixture(scope="module")
def corpus_pipeline(tmp_path_factory):
    from PIL import Image

    torch.manual_seed(0)
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(0)
    for i in range(3):
        arr = (rng.uniform(0, 1, (64, 64, 3)) * 255).astype(np.uint8)
        Image.fromarray(arr).save(root / f"ref{i}.png")
    selector = ReferenceSelector(pretrained=False)
    index = CorpusIndex(selector, root)
    index.build()
    return RepairPipeline(RepairModel(tiny_model_config()),
                          corpus_index=index, selector=selector)


@pytest.fixture
def gray(rng):
    return rng.uniform(0, 1, (64, 64))


@pytest.fixture
def reference(rng):
    return rng.uniform(0, 1, (64, 64, 3))


class TestRequestValidation:
    def test_exclusive_mode_flags_rejected(self, gray):
        with pytest.raises(PipelineError):
            RepairRequest(gray, restore_only=True, colorize_only=True)

    def test_grayscale_reference_rejected(self, gray):
        with pytest.raises(PipelineError):
            RepairRequest(gray, reference=gray)

    def test_missing_reference_without_corpus_rejected(self, pipeline, gray):
        with pytest.raises(PipelineError):
            pipeline.repair(RepairRequest(gray))

    def test_bad_input_rank_rejected(self, pipeline, gray):
        with pytest.raises(PipelineError):
            pipeline.repair(RepairRequest(gray[..., None]))


class TestRepair:
    def test_full_repair_returns_rgb(self, pipeline, gray, reference):
        result = pipeline.repair(RepairRequest(gray, reference=reference))
        assert result.rgb.shape == (64, 64, 3)
        assert result.rgb.min() >= 0.0 and result.rgb.max() <= 1.0
        assert result.gray.shape == (64, 64)
        assert result.reference_id == "explicit"
        assert set(result.timings) == {"restore", "colorize"}

    def test_restore_only_skips_colorization(self, pipeline, gray):
        result = pipeline.repair(RepairRequest(gray, restore_only=True))
        assert result.rgb is None
        assert result.gray.shape == (64, 64)
        assert "colorize" not in result.timings

    def test_colorize_only_passes_luminance_through_exactly(
            self, pipeline, gray, reference):
        result = pipeline.repair(
            RepairRequest(gray, reference=reference, colorize_only=True))
        assert np.array_equal(result.gray, gray)

    def test_colorized_luminance_matches_restored_luminance(
            self, pipeline, gray, reference):
        restored = pipeline.repair(RepairRequest(gray, restore_only=True))
        full = pipeline.repair(RepairRequest(gray, reference=reference))
        assert np.allclose(full.gray, restored.gray, atol=1e-6)

    def test_deterministic(self, pipeline, gray, reference):
        a = pipeline.repair(RepairRequest(gray, reference=reference))
        b = pipeline.repair(RepairRequest(gray, reference=reference))
        assert np.array_equal(a.rgb, b.rgb)

    def test_rgb_input_accepted(self, pipeline, reference, rng):
        rgb_in = rng.uniform(0, 1, (64, 64, 3))
        result = pipeline.repair(RepairRequest(rgb_in, reference=reference))
        assert result.rgb.shape == (64, 64, 3)

    def test_non_multiple_of_32_sizes_preserved(self, pipeline, reference,
                                                rng):
        gray = rng.uniform(0, 1, (70, 50))
        ref = rng.uniform(0, 1, (70, 50, 3))
        result = pipeline.repair(RepairRequest(gray, reference=ref))
        assert result.rgb.shape == (70, 50, 3)
        assert result.gray.shape == (70, 50)

    def test_oversized_input_downscaled_then_restored_to_size(self, pipeline,
                                                              rng):
        gray = rng.uniform(0, 1, (MAX_LONG_SIDE + 256, 64))
        result = pipeline.repair(RepairRequest(gray, restore_only=True))
        assert result.gray.shape == gray.shape


class TestAutoReference:
    def test_auto_selection_reports_corpus_id(self, corpus_pipeline, gray):
        result = corpus_pipeline.repair(RepairRequest(gray))
        assert result.reference_id in {"ref0.png", "ref1.png", "ref2.png"}

    def test_rank_k_picks_kth_candidate(self, corpus_pipeline, gray):
        ranked = corpus_pipeline.corpus_index.rank(gray, k=3)
        for k in (1, 2, 3):
            result = corpus_pipeline.repair(RepairRequest(gray, auto_rank=k))
            assert result.reference_id == ranked[k - 1].corpus_id
