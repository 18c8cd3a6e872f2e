"""Feature fusion and multi-paradigm aggregation.

The cross-modal image feature can be fused with a caption-derived text
feature via a convex weight; all enabled per-paradigm features are then
L2-normalized per block and concatenated in canonical paradigm order.
The adversarial image contributes its cross-modal image feature only
(captions are generated once for source/target, never re-generated for
the moving adversarial image).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    PARADIGM_ORDER,
    AggregatedFeature,
    FeatureVector,
    ImageTensor,
    Paradigm,
    ParadigmTag,
)
from .encoders import encode, encode_text, generate_caption
from .errors import DegenerateFeatureError, ValidationError

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class FusionSpec:
    """Weight between cross-modal image and text features."""

    lambda_fusion: float
    text_enabled: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_fusion <= 1.0:
            raise ValidationError(
                f"lambda_fusion must lie in [0, 1], got {self.lambda_fusion}"
            )


def fuse_cross_modal(
    img_feat: FeatureVector,
    text_feat: FeatureVector | None,
    spec: FusionSpec,
) -> FeatureVector:
    """Blend image and text features: lambda * image + (1 - lambda) * text.

    With text disabled or absent, or lambda exactly 1, the image feature is
    returned unchanged (bit-identical), so an image-only run and a run with
    a fully down-weighted text branch coincide exactly.
    """
    if not spec.text_enabled or text_feat is None or spec.lambda_fusion == 1.0:
        return img_feat
    if text_feat.dim != img_feat.dim:
        raise ValidationError(
            f"cannot fuse features of dims {img_feat.dim} and {text_feat.dim}"
        )
    lam = spec.lambda_fusion
    if lam == 0.0:
        return FeatureVector(text_feat.data, ParadigmTag.CROSS_MODAL_FUSED)
    data = lam * img_feat.data + (1.0 - lam) * text_feat.data
    return FeatureVector(data, ParadigmTag.CROSS_MODAL_FUSED)


def aggregate(blocks: Sequence[FeatureVector]) -> AggregatedFeature:
    """Normalize each block to unit L2 norm and concatenate in canonical order."""
    if not blocks:
        raise ValidationError("aggregate needs at least one block")
    normalized = []
    for b in blocks:
        n = b.norm
        if n < DEGENERATE_NORM:
            raise DegenerateFeatureError(
                f"zero-norm feature block from paradigm {b.paradigm_tag.value}"
            )
        normalized.append(FeatureVector(b.data / n, b.paradigm_tag))
    normalized.sort(key=lambda b: PARADIGM_ORDER.index(b.paradigm_tag.paradigm))
    return AggregatedFeature(tuple(normalized))


def reference_feature(
    img: ImageTensor,
    suite,
    fusion: FusionSpec,
    enabled: frozenset[Paradigm] | set[Paradigm],
    caption: str | None = None,
) -> AggregatedFeature:
    """Aggregated feature of a source or target image, with text fusion.

    The caption, when needed, is generated once here (or passed in) and
    encoded by each cross-modal pair's own text encoder.
    """
    blocks: list[FeatureVector] = []
    if Paradigm.CROSS_MODAL in enabled:
        want_text = fusion.text_enabled and fusion.lambda_fusion < 1.0
        if want_text and caption is None and suite.caption_generator is not None:
            caption = generate_caption(suite.caption_generator, img)
        for pair in suite.cross_modal:
            img_feat = encode(pair.image_encoder, img)
            text_feat = None
            if want_text and caption is not None and pair.text_encoder is not None:
                text_feat = encode_text(pair.text_encoder, caption)
            blocks.append(fuse_cross_modal(img_feat, text_feat, fusion))
    if Paradigm.MULTIMODAL in enabled:
        blocks.extend(encode(e, img) for e in suite.multimodal)
    if Paradigm.SELF_SUPERVISED in enabled:
        blocks.extend(encode(e, img) for e in suite.self_supervised)
    return aggregate(blocks)


def aggregate_adversarial(
    x_adv: ImageTensor,
    suite,
    enabled: frozenset[Paradigm] | set[Paradigm],
) -> AggregatedFeature:
    """Aggregated feature of the adversarial image (image-only cross-modal)."""
    blocks = [encode(e, x_adv) for e in suite.adversarial_encoders(enabled)]
    return aggregate(blocks)
