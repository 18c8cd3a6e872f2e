"""Shared numeric domain types, attack configuration, and result records.

Images live in [0, 1] as H x W x C float arrays (RGB, C = 3); 8-bit inputs
are divided by 255 on load. Perturbations are additive image-shaped arrays
bounded in L-infinity by a budget epsilon. All types here are immutable
value objects and safe to share between workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError

# L-inf budget comparisons tolerate this much accumulated rounding; the
# projection itself is exact clamping.
EPS_SLACK = 1e-9

MIN_IMAGE_SIDE = 8  # smallest size the crop transform supports


class Paradigm(enum.Enum):
    """Pretraining families an encoder can belong to."""

    CROSS_MODAL = "cross_modal"
    MULTIMODAL = "multimodal"
    SELF_SUPERVISED = "self_supervised"


class ParadigmTag(enum.Enum):
    """Fine-grained provenance of a single feature vector."""

    CROSS_MODAL_IMAGE = "cross_modal_image"
    CROSS_MODAL_TEXT = "cross_modal_text"
    CROSS_MODAL_FUSED = "cross_modal_fused"
    MULTIMODAL = "multimodal"
    SELF_SUPERVISED = "self_supervised"

    @property
    def paradigm(self) -> Paradigm:
        if self in (
            ParadigmTag.CROSS_MODAL_IMAGE,
            ParadigmTag.CROSS_MODAL_TEXT,
            ParadigmTag.CROSS_MODAL_FUSED,
        ):
            return Paradigm.CROSS_MODAL
        if self is ParadigmTag.MULTIMODAL:
            return Paradigm.MULTIMODAL
        return Paradigm.SELF_SUPERVISED


# Canonical block order inside an aggregated feature.
PARADIGM_ORDER = (Paradigm.CROSS_MODAL, Paradigm.MULTIMODAL, Paradigm.SELF_SUPERVISED)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ImageTensor:
    """An H x W x 3 image with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(f"image must be H x W x 3, got shape {arr.shape}")
        if arr.shape[0] < MIN_IMAGE_SIDE or arr.shape[1] < MIN_IMAGE_SIDE:
            raise ValidationError(
                f"image sides must be >= {MIN_IMAGE_SIDE}, got {arr.shape[:2]}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("image contains non-finite entries")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError(
                f"image values must lie in [0, 1], got range "
                f"[{arr.min():.6g}, {arr.max():.6g}]"
            )
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class Perturbation:
    """Additive image-shaped noise with max |entry| <= epsilon."""

    data: np.ndarray
    epsilon: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("perturbation contains non-finite entries")
        linf = float(np.abs(arr).max()) if arr.size else 0.0
        if linf > self.epsilon + EPS_SLACK:
            raise ValidationError(
                f"perturbation exceeds budget: max |delta| = {linf:.9g} "
                f"> epsilon = {self.epsilon:.9g}"
            )
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def linf_norm(self) -> float:
        return float(np.abs(self.data).max())


@dataclass(frozen=True)
class FeatureVector:
    """A 1-D feature with its paradigm provenance."""

    data: np.ndarray
    paradigm_tag: ParadigmTag

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError(f"feature must be a nonempty 1-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("feature contains non-finite entries")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def dim(self) -> int:
        return self.data.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True)
class AggregatedFeature:
    """Ordered concatenation of unit-norm per-paradigm blocks."""

    blocks: tuple[FeatureVector, ...]

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ValidationError("aggregated feature needs at least one block")
        for b in self.blocks:
            if abs(b.norm - 1.0) > 1e-6:
                raise ValidationError(
                    f"block ({b.paradigm_tag.value}) is not unit norm: {b.norm:.9g}"
                )
        families = [b.paradigm_tag.paradigm for b in self.blocks]
        ranks = [PARADIGM_ORDER.index(f) for f in families]
        if ranks != sorted(ranks):
            raise ValidationError(
                "blocks out of canonical order "
                "(cross_modal, multimodal, self_supervised): "
                + ", ".join(f.value for f in families)
            )
        total = float(np.linalg.norm(self.vector))
        expected = math.sqrt(len(self.blocks))
        if abs(total - expected) > 1e-5:
            raise ValidationError(
                f"total norm {total:.9g} differs from sqrt(#blocks) = {expected:.9g}"
            )
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([b.data for b in self.blocks])

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(b.dim for b in self.blocks)

    @property
    def dim(self) -> int:
        return sum(self.block_dims)


GRAD_NORMS = ("l1", "l2")
LOSS_VARIANTS = ("omega_scales_positive", "literal")

ALL_PARADIGMS = frozenset(Paradigm)


@dataclass(frozen=True)
class AttackConfig:
    """Optimizer and loss hyperparameters for one attack run.

    Defaults follow the standard recipe: budget 16/255, step 1/255,
    300 iterations, momentum 1.0, fusion weight 0.6, temperature 0.2,
    positive-pair balance 2, crop ratio in [0.5, 1].
    """

    epsilon: float = 16 / 255
    alpha: float = 1 / 255
    iterations: int = 300
    momentum_mu: float = 1.0
    lambda_fusion: float = 0.6
    tau: float = 0.2
    omega: float = 2.0
    crop_min_ratio: float = 0.5
    crop_max_ratio: float = 1.0
    seed: int = 0
    enabled_paradigms: frozenset[Paradigm] = ALL_PARADIGMS
    text_fusion_enabled: bool = True
    grad_norm: str = "l1"
    crops_per_iter: int = 1
    loss_variant: str = "omega_scales_positive"

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be > 0, got {self.epsilon}")
        # alpha == 0 is permitted as a diagnostic degenerate case: the
        # perturbation never moves but momentum still accumulates.
        if not 0 <= self.alpha <= self.epsilon:
            raise ConfigurationError(
                f"need 0 <= alpha <= epsilon, got alpha={self.alpha}, epsilon={self.epsilon}"
            )
        if self.iterations < 0:
            raise ConfigurationError(f"iterations must be >= 0, got {self.iterations}")
        if self.momentum_mu < 0:
            raise ConfigurationError(f"momentum_mu must be >= 0, got {self.momentum_mu}")
        if not 0.0 <= self.lambda_fusion <= 1.0:
            raise ConfigurationError(
                f"lambda_fusion must lie in [0, 1], got {self.lambda_fusion}"
            )
        if self.tau <= 0 or self.omega <= 0:
            raise ConfigurationError(
                f"tau and omega must be > 0, got tau={self.tau}, omega={self.omega}"
            )
        if not (0 < self.crop_min_ratio <= self.crop_max_ratio <= 1.0):
            raise ConfigurationError(
                f"need 0 < crop_min_ratio <= crop_max_ratio <= 1, got "
                f"[{self.crop_min_ratio}, {self.crop_max_ratio}]"
            )
        paradigms = frozenset(self.enabled_paradigms)
        if not paradigms:
            raise ConfigurationError("enabled_paradigms must be nonempty")
        object.__setattr__(self, "enabled_paradigms", paradigms)
        if self.grad_norm not in GRAD_NORMS:
            raise ConfigurationError(
                f"grad_norm must be one of {GRAD_NORMS}, got {self.grad_norm!r}"
            )
        if self.crops_per_iter < 1:
            raise ConfigurationError(f"crops_per_iter must be >= 1, got {self.crops_per_iter}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigurationError(
                f"loss_variant must be one of {LOSS_VARIANTS}, got {self.loss_variant!r}"
            )


SUCCESS_THRESHOLD = 0.5


@dataclass(frozen=True)
class EvalRecord:
    """Judged outcome of one source/target attack pair.

    Success flags are biconditional with the 0.5 threshold: targeted
    requires sim_adv_target strictly above it, untargeted requires
    sim_adv_source strictly below it.
    """

    pair_id: str
    sim_adv_target: float
    sim_adv_source: float
    targeted_success: bool
    untargeted_success: bool
    final_loss: float = math.nan
    loss_trajectory: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for name, value in (
            ("sim_adv_target", self.sim_adv_target),
            ("sim_adv_source", self.sim_adv_source),
        ):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {value}")
        if self.targeted_success != (self.sim_adv_target > SUCCESS_THRESHOLD):
            raise ValidationError(
                f"targeted_success={self.targeted_success} inconsistent with "
                f"sim_adv_target={self.sim_adv_target} and threshold {SUCCESS_THRESHOLD}"
            )
        if self.untargeted_success != (self.sim_adv_source < SUCCESS_THRESHOLD):
            raise ValidationError(
                f"untargeted_success={self.untargeted_success} inconsistent with "
                f"sim_adv_source={self.sim_adv_source} and threshold {SUCCESS_THRESHOLD}"
            )
        object.__setattr__(self, "loss_trajectory", tuple(self.loss_trajectory))

    @classmethod
    def from_similarities(
        cls,
        pair_id: str,
        sim_adv_target: float,
        sim_adv_source: float,
        final_loss: float = math.nan,
        loss_trajectory: tuple[float, ...] = (),
    ) -> "EvalRecord":
        return cls(
            pair_id=pair_id,
            sim_adv_target=sim_adv_target,
            sim_adv_source=sim_adv_source,
            targeted_success=sim_adv_target > SUCCESS_THRESHOLD,
            untargeted_success=sim_adv_source < SUCCESS_THRESHOLD,
            final_loss=final_loss,
            loss_trajectory=tuple(loss_trajectory),
        )


def clamp_image(img: ImageTensor | np.ndarray) -> ImageTensor:
    """Clamp every entry into [0, 1]; shape is preserved.

    Accepts a raw array so that x_s + delta can be clamped directly.
    """
    arr = img.data if isinstance(img, ImageTensor) else np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("cannot clamp an image with non-finite entries")
    return ImageTensor(np.clip(arr, 0.0, 1.0))


def clamp_array(arr: np.ndarray) -> np.ndarray:
    """Array-level clamp into [0, 1] for hot loops; no validation."""
    return np.clip(arr, 0.0, 1.0)


def project_linf(pert: Perturbation | np.ndarray, epsilon: float) -> Perturbation:
    """Project a perturbation onto the L-inf ball of radius epsilon.

    Entries already inside [-epsilon, +epsilon] are unchanged; the
    projection is exact elementwise clamping and idempotent.
    """
    if epsilon <= 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    arr = pert.data if isinstance(pert, Perturbation) else np.asarray(pert, dtype=np.float64)
    return Perturbation(np.clip(arr, -epsilon, epsilon), epsilon)
