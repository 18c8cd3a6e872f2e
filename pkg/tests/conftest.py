"""Shared fixtures: toy suites, random images, finite-difference helpers."""

from __future__ import annotations

import numpy as np
import pytest

from featattack import (
    AttackConfig,
    ImageTensor,
    Paradigm,
    ParadigmTag,
    ToyConvEncoder,
    ToyLinearEncoder,
    build_suite,
    default_toy_suite_config,
)
from featattack.aggregation import aggregate
from featattack.encoders import encode
from featattack.objective import LossParams, loss_from_sims
from featattack.registry import CrossModalPair, EncoderSuite

SIZE = (8, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_suite():
    """Linear + conv + linear suite at 8x8 with mock caption/text backends."""
    return build_suite(default_toy_suite_config(seed=0, input_size=SIZE, output_dim=8))


@pytest.fixture
def fixture_suite():
    """The committed 16x16 suite used by the attack-efficacy regression run."""
    return build_suite(default_toy_suite_config(seed=1, input_size=(16, 16), output_dim=8))


def interior_image(rng: np.random.Generator, size=SIZE, lo=0.25, hi=0.75) -> ImageTensor:
    """Image whose perturbed versions stay strictly inside [0, 1]."""
    return ImageTensor(rng.uniform(lo, hi, (*size, 3)))


def single_encoder_suite(encoder, paradigm: Paradigm) -> EncoderSuite:
    if paradigm is Paradigm.CROSS_MODAL:
        return EncoderSuite(encoder.input_size, cross_modal=(CrossModalPair(encoder),))
    if paradigm is Paradigm.MULTIMODAL:
        return EncoderSuite(encoder.input_size, multimodal=(encoder,))
    return EncoderSuite(encoder.input_size, self_supervised=(encoder,))


def make_linear(seed: int, size=SIZE, dim=8, tag=ParadigmTag.CROSS_MODAL_IMAGE, **kw):
    return ToyLinearEncoder(size, dim, tag, seed=seed, **kw)


def make_conv(seed: int, size=SIZE, dim=8, tag=ParadigmTag.MULTIMODAL, **kw):
    return ToyConvEncoder(size, dim, tag, seed=seed, **kw)


def forward_loss(x: np.ndarray, encoders, z_t, z_s, params: LossParams, window=None) -> float:
    """Independent loss evaluation for finite-difference oracles.

    Composes plain encoder forwards, per-block normalization via the
    aggregation module, and the scalar loss formula; shares no code with
    the analytic gradient path in objective.block_gradients.
    """
    xc = window.forward(x) if window is not None else x
    blocks = [encode(e, ImageTensor(np.clip(xc, 0.0, 1.0))) for e in encoders]
    # encoders expect validated images; xc from a crop of a valid image
    # stays in [0, 1], the clip only guards float dust
    z_adv = aggregate(blocks)
    t, s = z_t.vector, z_s.vector
    a = z_adv.vector
    sim_t = float(a @ t / (np.linalg.norm(a) * np.linalg.norm(t)))
    sim_s = float(a @ s / (np.linalg.norm(a) * np.linalg.norm(s)))
    return loss_from_sims(sim_t, sim_s, params)


def fd_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function, elementwise."""
    g = np.zeros_like(x)
    flat = g.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + h
        up = f(x)
        xf[i] = orig - h
        down = f(x)
        xf[i] = orig
        flat[i] = (up - down) / (2.0 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / denom


def default_cfg(**kw) -> AttackConfig:
    return AttackConfig(**kw)
