"""Adapter registry and encoder-suite construction.

A suite groups the per-paradigm encoders one attack run uses: cross-modal
image/text pairs, multimodal encoders (plus the caption generator), and
self-supervised encoders. Suites are described declaratively:

    {
      "input_size": [16, 16],
      "cross_modal": [
        {"adapter": "toy-linear", "output_dim": 16, "seed": 1,
         "text": {"adapter": "mock-text"}}
      ],
      "multimodal": [{"adapter": "toy-conv", "output_dim": 16, "seed": 2}],
      "self_supervised": [{"adapter": "toy-linear", "output_dim": 16, "seed": 3}],
      "caption": {"adapter": "mock-caption", "seed": 0}
    }

Adapters are registered by name; the toy and mock adapters ship built in,
and adapters wrapping pretrained checkpoints can be registered by
downstream integration code (they must resize internally and include that
resize in their VJP). Everything here is optional at runtime: all
mathematical behavior is exercised with the toy adapters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .core import Paradigm, ParadigmTag
from .encoders import (
    CaptionGenerator,
    MockCaptionGenerator,
    MockTextEncoder,
    ParadigmEncoder,
    TextEncoder,
    ToyConvEncoder,
    ToyLinearEncoder,
)
from .errors import ConfigurationError, RegistryError

_PARADIGM_TAGS = {
    Paradigm.CROSS_MODAL: ParadigmTag.CROSS_MODAL_IMAGE,
    Paradigm.MULTIMODAL: ParadigmTag.MULTIMODAL,
    Paradigm.SELF_SUPERVISED: ParadigmTag.SELF_SUPERVISED,
}

ImageAdapterFactory = Callable[[dict, tuple[int, int], ParadigmTag], ParadigmEncoder]
TextAdapterFactory = Callable[[dict, int], TextEncoder]
CaptionAdapterFactory = Callable[[dict], CaptionGenerator]

IMAGE_ADAPTERS: dict[str, ImageAdapterFactory] = {}
TEXT_ADAPTERS: dict[str, TextAdapterFactory] = {}
CAPTION_ADAPTERS: dict[str, CaptionAdapterFactory] = {}


def register_image_adapter(name: str):
    def deco(factory: ImageAdapterFactory):
        IMAGE_ADAPTERS[name] = factory
        return factory

    return deco


def register_text_adapter(name: str):
    def deco(factory: TextAdapterFactory):
        TEXT_ADAPTERS[name] = factory
        return factory

    return deco


def register_caption_adapter(name: str):
    def deco(factory: CaptionAdapterFactory):
        CAPTION_ADAPTERS[name] = factory
        return factory

    return deco


@register_image_adapter("toy-linear")
def _toy_linear(spec: dict, input_size: tuple[int, int], tag: ParadigmTag) -> ParadigmEncoder:
    return ToyLinearEncoder(
        input_size,
        output_dim=int(spec.get("output_dim", 16)),
        paradigm_tag=tag,
        seed=int(spec["seed"]),
        centered=bool(spec.get("centered", True)),
    )


@register_image_adapter("toy-conv")
def _toy_conv(spec: dict, input_size: tuple[int, int], tag: ParadigmTag) -> ParadigmEncoder:
    return ToyConvEncoder(
        input_size,
        output_dim=int(spec.get("output_dim", 16)),
        paradigm_tag=tag,
        seed=int(spec["seed"]),
        n_filters=int(spec.get("n_filters", 4)),
    )


@register_image_adapter("toy-linear-family")
def _toy_linear_family(
    spec: dict, input_size: tuple[int, int], tag: ParadigmTag
) -> ParadigmEncoder:
    """Family member: shared base weights plus member-specific variation.

    Members of one family (same family_seed) produce correlated features,
    so attacks crafted on one member transfer to held-out siblings; members
    of different families are nearly independent. mix controls the relative
    weight of the member-specific part.
    """
    import numpy as np

    h, w = input_size
    n_in = h * w * 3
    output_dim = int(spec.get("output_dim", 16))
    family_seed = int(spec["family_seed"])
    member_seed = int(spec["member_seed"])
    mix = float(spec.get("mix", 0.5))
    base = np.random.default_rng(family_seed).standard_normal((output_dim, n_in))
    indiv = np.random.default_rng(
        np.random.SeedSequence([family_seed, member_seed])
    ).standard_normal((output_dim, n_in))
    weight = (base + mix * indiv) / np.sqrt(1.0 + mix * mix) / np.sqrt(n_in)
    bias = -0.5 * weight.sum(axis=1) if spec.get("centered", True) else None
    return ToyLinearEncoder(
        input_size, output_dim, paradigm_tag=tag, weight=weight, bias=bias
    )


@register_text_adapter("mock-text")
def _mock_text(spec: dict, image_dim: int) -> TextEncoder:
    return MockTextEncoder(int(spec.get("output_dim", image_dim)))


@register_caption_adapter("mock-caption")
def _mock_caption(spec: dict) -> CaptionGenerator:
    return MockCaptionGenerator(seed=int(spec.get("seed", 0)))


@dataclass(frozen=True)
class CrossModalPair:
    """Image encoder with its (optional) matching text encoder."""

    image_encoder: ParadigmEncoder
    text_encoder: TextEncoder | None = None

    def __post_init__(self) -> None:
        if (
            self.text_encoder is not None
            and self.text_encoder.output_dim != self.image_encoder.output_dim
        ):
            raise ConfigurationError(
                f"text encoder dim {self.text_encoder.output_dim} must equal "
                f"image encoder dim {self.image_encoder.output_dim}"
            )


@dataclass(frozen=True)
class EncoderSuite:
    """All encoders one attack run draws on, grouped by paradigm."""

    input_size: tuple[int, int]
    cross_modal: tuple[CrossModalPair, ...] = ()
    multimodal: tuple[ParadigmEncoder, ...] = ()
    self_supervised: tuple[ParadigmEncoder, ...] = ()
    caption_generator: CaptionGenerator | None = None
    config: dict = field(default_factory=dict, compare=False)

    def encoders_for(self, paradigm: Paradigm) -> tuple[ParadigmEncoder, ...]:
        if paradigm is Paradigm.CROSS_MODAL:
            return tuple(p.image_encoder for p in self.cross_modal)
        if paradigm is Paradigm.MULTIMODAL:
            return self.multimodal
        return self.self_supervised

    def adversarial_encoders(
        self, enabled: frozenset[Paradigm] | set[Paradigm]
    ) -> tuple[ParadigmEncoder, ...]:
        """Image encoders on the adversarial path, in canonical paradigm order."""
        out: list[ParadigmEncoder] = []
        for paradigm in (Paradigm.CROSS_MODAL, Paradigm.MULTIMODAL, Paradigm.SELF_SUPERVISED):
            if paradigm not in enabled:
                continue
            members = self.encoders_for(paradigm)
            if not members:
                raise ConfigurationError(
                    f"paradigm {paradigm.value} is enabled but the suite has no encoder for it"
                )
            out.extend(members)
        return tuple(out)

    @property
    def thread_safe(self) -> bool:
        return all(
            e.thread_safe
            for e in (
                *(p.image_encoder for p in self.cross_modal),
                *self.multimodal,
                *self.self_supervised,
            )
        )

    @property
    def paradigms(self) -> frozenset[Paradigm]:
        present = set()
        if self.cross_modal:
            present.add(Paradigm.CROSS_MODAL)
        if self.multimodal:
            present.add(Paradigm.MULTIMODAL)
        if self.self_supervised:
            present.add(Paradigm.SELF_SUPERVISED)
        return frozenset(present)


def _build_image(spec: dict, input_size: tuple[int, int], paradigm: Paradigm) -> ParadigmEncoder:
    name = spec.get("adapter")
    if name not in IMAGE_ADAPTERS:
        raise RegistryError(
            f"unknown image adapter {name!r}; registered: {sorted(IMAGE_ADAPTERS)}"
        )
    return IMAGE_ADAPTERS[name](spec, input_size, _PARADIGM_TAGS[paradigm])


def build_suite(config: dict) -> EncoderSuite:
    """Instantiate an EncoderSuite from its declarative description."""
    if "input_size" not in config:
        raise ConfigurationError("suite config needs an input_size")
    input_size = tuple(int(v) for v in config["input_size"])
    if len(input_size) != 2:
        raise ConfigurationError(f"input_size must be [height, width], got {config['input_size']}")

    pairs = []
    for spec in config.get("cross_modal", []):
        image_enc = _build_image(spec, input_size, Paradigm.CROSS_MODAL)
        text_enc = None
        if "text" in spec and spec["text"] is not None:
            tspec = spec["text"]
            tname = tspec.get("adapter")
            if tname not in TEXT_ADAPTERS:
                raise RegistryError(
                    f"unknown text adapter {tname!r}; registered: {sorted(TEXT_ADAPTERS)}"
                )
            text_enc = TEXT_ADAPTERS[tname](tspec, image_enc.output_dim)
        pairs.append(CrossModalPair(image_enc, text_enc))

    multimodal = tuple(
        _build_image(spec, input_size, Paradigm.MULTIMODAL)
        for spec in config.get("multimodal", [])
    )
    self_supervised = tuple(
        _build_image(spec, input_size, Paradigm.SELF_SUPERVISED)
        for spec in config.get("self_supervised", [])
    )

    caption = None
    if config.get("caption") is not None:
        cspec = config["caption"]
        cname = cspec.get("adapter")
        if cname not in CAPTION_ADAPTERS:
            raise RegistryError(
                f"unknown caption adapter {cname!r}; registered: {sorted(CAPTION_ADAPTERS)}"
            )
        caption = CAPTION_ADAPTERS[cname](cspec)

    suite = EncoderSuite(
        input_size=input_size,
        cross_modal=tuple(pairs),
        multimodal=multimodal,
        self_supervised=self_supervised,
        caption_generator=caption,
        config=dict(config),
    )
    if not (suite.cross_modal or suite.multimodal or suite.self_supervised):
        raise ConfigurationError("suite config declares no image encoders")
    return suite


def load_suite_config(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


DEFAULT_FAMILY_SEEDS = {
    Paradigm.CROSS_MODAL.value: 11,
    Paradigm.MULTIMODAL.value: 22,
    Paradigm.SELF_SUPERVISED.value: 33,
}


def family_suite_config(
    member_seeds: tuple[int, ...],
    input_size: tuple[int, int] = (16, 16),
    output_dim: int = 8,
    family_seeds: dict | None = None,
    mix: float = 0.5,
) -> dict:
    """Suite of family-structured linear encoders, one family per paradigm.

    Two configs built with the same family_seeds but disjoint member_seeds
    give a surrogate suite and a held-out suite whose members correlate
    within each family: the setting for transfer ablations.
    """
    family_seeds = dict(DEFAULT_FAMILY_SEEDS if family_seeds is None else family_seeds)

    def members(paradigm: str) -> list[dict]:
        return [
            {
                "adapter": "toy-linear-family",
                "output_dim": output_dim,
                "family_seed": family_seeds[paradigm],
                "member_seed": ms,
                "mix": mix,
            }
            for ms in member_seeds
        ]

    return {
        "input_size": list(input_size),
        "cross_modal": members(Paradigm.CROSS_MODAL.value),
        "multimodal": members(Paradigm.MULTIMODAL.value),
        "self_supervised": members(Paradigm.SELF_SUPERVISED.value),
        "caption": None,
    }


def default_toy_suite_config(
    seed: int = 0,
    input_size: tuple[int, int] = (16, 16),
    output_dim: int = 16,
) -> dict:
    """One toy encoder per paradigm plus mock caption/text backends."""
    return {
        "input_size": list(input_size),
        "cross_modal": [
            {
                "adapter": "toy-linear",
                "output_dim": output_dim,
                "seed": seed * 101 + 1,
                "centered": True,
                "text": {"adapter": "mock-text"},
            }
        ],
        "multimodal": [
            {"adapter": "toy-conv", "output_dim": output_dim, "seed": seed * 101 + 2}
        ],
        "self_supervised": [
            {
                "adapter": "toy-linear",
                "output_dim": output_dim,
                "seed": seed * 101 + 3,
                "centered": True,
            }
        ],
        "caption": {"adapter": "mock-caption", "seed": seed},
    }
