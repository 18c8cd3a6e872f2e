"""Momentum sign-gradient attack loop with per-iteration random crops.

One run: draw the initial perturbation uniformly from [-eps, +eps],
then for N iterations crop-and-resize the current adversarial image,
take the loss gradient through the crop, accumulate it into a momentum
buffer (normalized per step), move the perturbation by alpha times the
sign of the momentum, and clip back into the L-inf ball. The loss is
minimized, so the buffer accumulates the gradient of -loss and the
written update delta + alpha * sign(g) descends.

Each run owns an RNG stream derived from (seed, pair_id), so batches
are reproducible independent of scheduling and worker count.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .aggregation import FusionSpec, reference_feature
from .core import (
    AttackConfig,
    ImageTensor,
    Paradigm,
    Perturbation,
    clamp_array,
    project_linf,
)
from .encoders import generate_caption
from .errors import ConfigurationError, ValidationError
from .interp import resize_image, resize_vjp
from .objective import AggregatedFeature, LossParams, loss_and_gradient

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CropWindow:
    """A concrete crop-and-resize map: select a window, resize back to full size.

    Both stages are linear, so the VJP scatters the resize adjoint back
    into the window region and zeros elsewhere.
    """

    row0: int
    col0: int
    crop_h: int
    crop_w: int
    full_h: int
    full_w: int

    def __post_init__(self) -> None:
        if not (
            0 <= self.row0
            and 0 <= self.col0
            and self.crop_h >= 1
            and self.crop_w >= 1
            and self.row0 + self.crop_h <= self.full_h
            and self.col0 + self.crop_w <= self.full_w
        ):
            raise ValidationError(f"crop window out of bounds: {self}")

    @cached_property
    def is_identity(self) -> bool:
        return (self.crop_h, self.crop_w) == (self.full_h, self.full_w)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return x
        patch = x[self.row0 : self.row0 + self.crop_h, self.col0 : self.col0 + self.crop_w]
        return resize_image(patch, (self.full_h, self.full_w))

    def vjp(self, grad_out: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return grad_out
        grad_patch = resize_vjp(grad_out, (self.crop_h, self.crop_w))
        grad = np.zeros((self.full_h, self.full_w, grad_out.shape[2]))
        grad[self.row0 : self.row0 + self.crop_h, self.col0 : self.col0 + self.crop_w] = grad_patch
        return grad


@dataclass(frozen=True)
class CropTransform:
    """Samples crop windows with a side ratio uniform in [min_ratio, max_ratio]."""

    min_ratio: float = 0.5
    max_ratio: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.min_ratio <= self.max_ratio <= 1.0):
            raise ValidationError(
                f"need 0 < min_ratio <= max_ratio <= 1, got "
                f"[{self.min_ratio}, {self.max_ratio}]"
            )

    def sample(self, rng: np.random.Generator, height: int, width: int) -> CropWindow:
        ratio = rng.uniform(self.min_ratio, self.max_ratio)
        crop_h = max(1, int(round(ratio * height)))
        crop_w = max(1, int(round(ratio * width)))
        row0 = int(rng.integers(0, height - crop_h + 1))
        col0 = int(rng.integers(0, width - crop_w + 1))
        return CropWindow(row0, col0, crop_h, crop_w, height, width)

    def identity(self, height: int, width: int) -> CropWindow:
        return CropWindow(0, 0, height, width, height, width)


@dataclass(frozen=True)
class AttackState:
    """Perturbation, momentum buffer, and loss history at an iteration boundary."""

    delta: Perturbation
    momentum: np.ndarray
    iteration: int
    loss_trajectory: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.momentum)):
            raise ValidationError("momentum contains non-finite entries")


def pair_rng(seed: int, pair_id: str = "") -> np.random.Generator:
    """Deterministic RNG stream for one (seed, pair) combination."""
    digest = hashlib.sha256(pair_id.encode("utf-8")).digest()
    entropy = [seed & 0xFFFFFFFFFFFFFFFF] + [
        int.from_bytes(digest[i : i + 8], "big") for i in (0, 8, 16, 24)
    ]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def init_state(
    x_s: ImageTensor,
    cfg: AttackConfig,
    rng: np.random.Generator | None = None,
) -> AttackState:
    """Uniform random perturbation in [-eps, +eps], zero momentum, iteration 0."""
    if rng is None:
        rng = pair_rng(cfg.seed)
    delta0 = rng.uniform(-cfg.epsilon, cfg.epsilon, size=x_s.shape)
    return AttackState(
        delta=Perturbation(delta0, cfg.epsilon),
        momentum=np.zeros(x_s.shape),
        iteration=0,
    )


def _normalize_grad(d: np.ndarray, norm: str) -> np.ndarray:
    n = float(np.abs(d).sum()) if norm == "l1" else float(np.linalg.norm(d))
    if n == 0.0:
        logger.warning("gradient stagnated (zero norm); treating normalized gradient as zero")
        return np.zeros_like(d)
    return d / n


def attack_step(
    state: AttackState,
    x_s: ImageTensor,
    z_t: AggregatedFeature,
    z_s: AggregatedFeature,
    encoders,
    cfg: AttackConfig,
    rng: np.random.Generator,
    crop: CropTransform | None = None,
) -> AttackState:
    """One iteration: crop, gradient, momentum update, sign step, projection."""
    if state.iteration >= cfg.iterations:
        raise ValidationError(
            f"state already at iteration {state.iteration} of {cfg.iterations}"
        )
    if crop is None:
        crop = CropTransform(cfg.crop_min_ratio, cfg.crop_max_ratio)
    params = LossParams(cfg.tau, cfg.omega, cfg.loss_variant)

    x_adv = clamp_array(x_s.data + state.delta.data)
    grad = np.zeros(x_s.shape)
    loss_value = 0.0
    for _ in range(cfg.crops_per_iter):
        window = crop.sample(rng, x_s.height, x_s.width)
        breakdown, g = loss_and_gradient(x_adv, encoders, z_t, z_s, params, window)
        grad += g
        loss_value += breakdown.loss
    grad /= cfg.crops_per_iter
    loss_value /= cfg.crops_per_iter

    descent = _normalize_grad(-grad, cfg.grad_norm)
    momentum = cfg.momentum_mu * state.momentum + descent
    delta = project_linf(state.delta.data + cfg.alpha * np.sign(momentum), cfg.epsilon)
    return AttackState(
        delta=delta,
        momentum=momentum,
        iteration=state.iteration + 1,
        loss_trajectory=state.loss_trajectory + (loss_value,),
    )


def reference_features(
    x_s: ImageTensor,
    x_t: ImageTensor,
    suite,
    cfg: AttackConfig,
) -> tuple[AggregatedFeature, AggregatedFeature]:
    """Source and target aggregated features, captions generated once."""
    fusion = FusionSpec(cfg.lambda_fusion, cfg.text_fusion_enabled)
    caption_s = caption_t = None
    want_text = (
        cfg.text_fusion_enabled
        and cfg.lambda_fusion < 1.0
        and Paradigm.CROSS_MODAL in cfg.enabled_paradigms
        and any(p.text_encoder is not None for p in suite.cross_modal)
    )
    if want_text:
        if suite.caption_generator is None:
            logger.warning(
                "text fusion requested but the suite has no caption generator; "
                "falling back to image-only cross-modal features"
            )
        else:
            caption_s = generate_caption(suite.caption_generator, x_s)
            caption_t = generate_caption(suite.caption_generator, x_t)
    z_s = reference_feature(x_s, suite, fusion, cfg.enabled_paradigms, caption_s)
    z_t = reference_feature(x_t, suite, fusion, cfg.enabled_paradigms, caption_t)
    return z_s, z_t


def run_attack(
    x_s: ImageTensor,
    x_t: ImageTensor,
    suite,
    cfg: AttackConfig,
    pair_id: str = "",
) -> tuple[Perturbation, AttackState]:
    """Full attack on one source/target pair; returns the final perturbation.

    Reference features are computed once up front; the loop then runs
    cfg.iterations steps. The adversarial image is clamp(x_s + delta).
    """
    if x_s.shape != x_t.shape:
        raise ValidationError(
            f"source and target shapes differ: {x_s.shape} vs {x_t.shape}"
        )
    encoders = suite.adversarial_encoders(cfg.enabled_paradigms)
    if not encoders:
        raise ConfigurationError(
            "no encoders available for enabled paradigms "
            + ", ".join(sorted(p.value for p in cfg.enabled_paradigms))
        )
    z_s, z_t = reference_features(x_s, x_t, suite, cfg)

    rng = pair_rng(cfg.seed, pair_id)
    state = init_state(x_s, cfg, rng)
    crop = CropTransform(cfg.crop_min_ratio, cfg.crop_max_ratio)
    for _ in range(cfg.iterations):
        state = attack_step(state, x_s, z_t, z_s, encoders, cfg, rng, crop)
    return state.delta, state
