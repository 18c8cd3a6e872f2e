"""Fusion and normalized concatenation."""

import math

import numpy as np
import pytest

from featattack import (
    FeatureVector,
    FusionSpec,
    ImageTensor,
    Paradigm,
    ParadigmTag,
    aggregate,
    aggregate_adversarial,
    clamp_image,
    fuse_cross_modal,
)
from featattack.aggregation import reference_feature
from featattack.errors import DegenerateFeatureError, ValidationError
from featattack.objective import cosine_sim

from conftest import interior_image

CM = ParadigmTag.CROSS_MODAL_IMAGE
TX = ParadigmTag.CROSS_MODAL_TEXT
MM = ParadigmTag.MULTIMODAL
SS = ParadigmTag.SELF_SUPERVISED

ALL = frozenset(Paradigm)


def fv(values, tag):
    return FeatureVector(np.asarray(values, dtype=float), tag)


class TestFuseCrossModal:
    def test_lambda_one_returns_image_bitwise(self):
        img, text = fv([1.0, 2.0], CM), fv([5.0, -3.0], TX)
        out = fuse_cross_modal(img, text, FusionSpec(1.0))
        assert out is img

    def test_lambda_zero_returns_text(self):
        img, text = fv([1.0, 2.0], CM), fv([5.0, -3.0], TX)
        out = fuse_cross_modal(img, text, FusionSpec(0.0))
        assert np.array_equal(out.data, text.data)
        assert out.paradigm_tag is ParadigmTag.CROSS_MODAL_FUSED

    def test_default_weighting(self):
        out = fuse_cross_modal(fv([1, 0], CM), fv([0, 1], TX), FusionSpec(0.6))
        np.testing.assert_allclose(out.data, [0.6, 0.4], rtol=1e-15)

    def test_disabled_returns_image(self):
        img = fv([1.0, 2.0], CM)
        out = fuse_cross_modal(img, fv([9.0, 9.0], TX), FusionSpec(0.6, text_enabled=False))
        assert out is img

    def test_absent_text_returns_image(self):
        img = fv([1.0, 2.0], CM)
        assert fuse_cross_modal(img, None, FusionSpec(0.6)) is img

    def test_dim_mismatch(self):
        with pytest.raises(ValidationError, match="fuse"):
            fuse_cross_modal(fv([1, 2], CM), fv([1, 2, 3], TX), FusionSpec(0.6))

    def test_lambda_out_of_range(self):
        with pytest.raises(ValidationError):
            FusionSpec(1.2)


class TestAggregate:
    def test_three_four_five(self):
        out = aggregate([fv([3.0, 4.0], CM)])
        np.testing.assert_allclose(out.vector, [0.6, 0.8], rtol=1e-15)

    def test_unit_blocks_unchanged(self):
        blocks = [fv([1, 0], CM), fv([0, 1], MM), fv([1, 0], SS)]
        out = aggregate(blocks)
        np.testing.assert_allclose(out.vector, [1, 0, 0, 1, 1, 0], atol=1e-15)
        assert float(np.linalg.norm(out.vector)) == pytest.approx(math.sqrt(3), abs=1e-5)

    def test_per_block_normalization(self):
        out = aggregate([fv([1, 0], CM), fv([2, 0], MM), fv([0, 3], SS)])
        np.testing.assert_allclose(out.vector, [1, 0, 1, 0, 0, 1], rtol=1e-15)

    def test_canonical_order_imposed(self):
        out = aggregate([fv([0, 3], SS), fv([1, 0], CM), fv([2, 0], MM)])
        assert [b.paradigm_tag for b in out.blocks] == [CM, MM, SS]
        np.testing.assert_allclose(out.vector, [1, 0, 1, 0, 0, 1], rtol=1e-15)

    def test_zero_norm_block_names_paradigm(self):
        with pytest.raises(DegenerateFeatureError, match="multimodal"):
            aggregate([fv([1, 0], CM), fv([0, 0], MM)])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            aggregate([])

    def test_scale_invariance(self, rng):
        for _ in range(20):
            blocks = [
                fv(rng.standard_normal(5), CM),
                fv(rng.standard_normal(7), MM),
                fv(rng.standard_normal(3), SS),
            ]
            base = aggregate(blocks).vector
            k = int(rng.integers(0, 3))
            scale = float(rng.uniform(0.1, 50.0))
            scaled = [
                fv(b.data * scale, b.paradigm_tag) if i == k else b
                for i, b in enumerate(blocks)
            ]
            np.testing.assert_allclose(aggregate(scaled).vector, base, atol=1e-12, rtol=0)

    def test_cosine_decomposes_into_block_mean(self, rng):
        # for unit blocks: cos(A, B) == mean over blocks of per-block cosines
        dims = (4, 6, 5)
        tags = (CM, MM, SS)
        for _ in range(10):
            a_blocks = [fv(rng.standard_normal(d), t) for d, t in zip(dims, tags)]
            b_blocks = [fv(rng.standard_normal(d), t) for d, t in zip(dims, tags)]
            za, zb = aggregate(a_blocks), aggregate(b_blocks)
            per_block = [
                float(x.data @ y.data) for x, y in zip(za.blocks, zb.blocks)
            ]
            assert cosine_sim(za, zb) == pytest.approx(np.mean(per_block), abs=1e-6)


class TestSuiteAggregation:
    def test_block_norms_are_unit(self, toy_suite, rng):
        z = aggregate_adversarial(interior_image(rng), toy_suite, ALL)
        for b in z.blocks:
            assert b.norm == pytest.approx(1.0, abs=1e-6)
        assert float(np.linalg.norm(z.vector)) == pytest.approx(math.sqrt(3), abs=1e-5)

    def test_zero_delta_image_only_fusion_matches_source(self, toy_suite, rng):
        x_s = interior_image(rng)
        x_adv = clamp_image(x_s.data + np.zeros(x_s.shape))
        z_adv = aggregate_adversarial(x_adv, toy_suite, ALL)
        z_src = reference_feature(x_s, toy_suite, FusionSpec(1.0), ALL)
        np.testing.assert_array_equal(z_adv.vector, z_src.vector)

    def test_disabling_paradigm_removes_exactly_its_block(self, toy_suite, rng):
        img = interior_image(rng)
        full = aggregate_adversarial(img, toy_suite, ALL)
        without_mm = aggregate_adversarial(
            img, toy_suite, frozenset({Paradigm.CROSS_MODAL, Paradigm.SELF_SUPERVISED})
        )
        assert [b.paradigm_tag for b in without_mm.blocks] == [CM, SS]
        assert np.array_equal(without_mm.blocks[0].data, full.blocks[0].data)
        assert np.array_equal(without_mm.blocks[1].data, full.blocks[2].data)

    def test_full_vector_matches_hand_composition_seed11(self, rng):
        """Independent recomputation: raw forwards, manual caption/fusion,
        manual per-block normalization and concatenation."""
        from featattack import build_suite, default_toy_suite_config
        from featattack.encoders import encode_text as etext
        from featattack.encoders import generate_caption as gcap

        suite = build_suite(default_toy_suite_config(seed=11, input_size=(8, 8), output_dim=8))
        img = interior_image(rng)
        lam = 0.6

        caption = gcap(suite.caption_generator, img)
        pair = suite.cross_modal[0]
        v_img = pair.image_encoder.forward(img.data)
        v_text = etext(pair.text_encoder, caption).data
        v_c = lam * v_img + (1 - lam) * v_text
        v_m = suite.multimodal[0].forward(img.data)
        v_v = suite.self_supervised[0].forward(img.data)
        expected = np.concatenate(
            [v / np.linalg.norm(v) for v in (v_c, v_m, v_v)]
        )

        z = reference_feature(img, suite, FusionSpec(lam), ALL)
        np.testing.assert_allclose(z.vector, expected, atol=1e-12, rtol=0)
