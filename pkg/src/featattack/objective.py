"""Contrastive matching loss and its gradient down to the perturbation.

The loss pulls the adversarial aggregated feature toward the target and
pushes it away from the source:

    L = -log( exp(eta(sim_t)) / (exp(sim_t / tau) + exp(sim_s / tau)) )

where sim_* are cosine similarities of aggregated features. The positive
pair's exponent eta is omega * sim_t / tau by default ("omega amplifies
the positive pair"); the alternative left-to-right reading
(sim_t / omega) * tau is available as the "literal" variant. Everything
is stabilized with max-subtraction before exponentiation.

The gradient is assembled analytically: cosine gradient w.r.t. the
aggregated vector, chained through each block's L2 normalization, each
encoder's VJP, and the crop transform's VJP. Finite differences are used
only as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AggregatedFeature, ImageTensor, Perturbation, clamp_array
from .encoders import ParadigmEncoder
from .errors import ConfigurationError, DegenerateFeatureError, ValidationError

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class LossParams:
    """Temperature and positive-pair balance of the contrastive loss."""

    tau: float = 0.2
    omega: float = 2.0
    variant: str = "omega_scales_positive"

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ConfigurationError(f"tau must be > 0, got {self.tau}")
        if self.omega <= 0:
            raise ConfigurationError(f"omega must be > 0, got {self.omega}")
        if self.variant not in ("omega_scales_positive", "literal"):
            raise ConfigurationError(f"unknown loss variant {self.variant!r}")


@dataclass(frozen=True)
class LossBreakdown:
    loss: float
    sim_adv_target: float
    sim_adv_source: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.loss):
            raise ValidationError(f"loss is not finite: {self.loss}")
        for name, v in (
            ("sim_adv_target", self.sim_adv_target),
            ("sim_adv_source", self.sim_adv_source),
        ):
            if not -1.0 - 1e-9 <= v <= 1.0 + 1e-9:
                raise ValidationError(f"{name} outside [-1, 1]: {v}")


def _as_vector(a: AggregatedFeature | np.ndarray) -> np.ndarray:
    return a.vector if isinstance(a, AggregatedFeature) else np.asarray(a, dtype=np.float64)


def cosine_sim(a: AggregatedFeature | np.ndarray, b: AggregatedFeature | np.ndarray) -> float:
    """Cosine similarity of two feature vectors, clipped into [-1, 1]."""
    va, vb = _as_vector(a), _as_vector(b)
    if va.shape != vb.shape:
        raise ValidationError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        raise DegenerateFeatureError("cosine similarity of a zero-norm vector")
    return float(np.clip(va @ vb / (na * nb), -1.0, 1.0))


def _positive_exponent_slope(p: LossParams) -> float:
    # d(eta)/d(sim_t) for the configured numerator reading
    if p.variant == "omega_scales_positive":
        return p.omega / p.tau
    return p.tau / p.omega


def loss_from_sims(sim_t: float, sim_s: float, p: LossParams) -> float:
    """Scalar loss from the two similarities, stabilized via max-subtraction."""
    et, es = sim_t / p.tau, sim_s / p.tau
    m = max(et, es)
    lse = m + math.log(math.exp(et - m) + math.exp(es - m))
    return lse - _positive_exponent_slope(p) * sim_t


def dloss_dsims(sim_t: float, sim_s: float, p: LossParams) -> tuple[float, float]:
    """Partial derivatives of the loss w.r.t. (sim_t, sim_s)."""
    et, es = sim_t / p.tau, sim_s / p.tau
    m = max(et, es)
    lse = m + math.log(math.exp(et - m) + math.exp(es - m))
    p_t = math.exp(et - lse)
    p_s = math.exp(es - lse)
    return p_t / p.tau - _positive_exponent_slope(p), p_s / p.tau


def contrastive_loss(
    z_adv: AggregatedFeature,
    z_t: AggregatedFeature,
    z_s: AggregatedFeature,
    p: LossParams,
) -> LossBreakdown:
    sim_t = cosine_sim(z_adv, z_t)
    sim_s = cosine_sim(z_adv, z_s)
    return LossBreakdown(loss_from_sims(sim_t, sim_s, p), sim_t, sim_s)


def block_gradients(
    x: np.ndarray,
    encoders: Sequence[ParadigmEncoder],
    z_t: AggregatedFeature,
    z_s: AggregatedFeature,
    p: LossParams,
    window=None,
) -> tuple[LossBreakdown, list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Forward pass plus loss gradients w.r.t. each raw feature block.

    Returns (breakdown, per-block gradients, raw blocks, encoder input).
    Each per-block gradient has passed through the normalization Jacobian
    (I - u u^T)/|v| and is therefore orthogonal to its raw block.
    """
    if not encoders:
        raise ValidationError("no encoders on the adversarial path")
    xc = window.forward(x) if window is not None else x

    raw = [e.forward(xc) for e in encoders]
    norms = [float(np.linalg.norm(v)) for v in raw]
    for e, n in zip(encoders, norms):
        if n < DEGENERATE_NORM:
            raise DegenerateFeatureError(
                f"zero-norm feature from paradigm {e.paradigm_tag.value}"
            )
    units = [v / n for v, n in zip(raw, norms)]
    a_vec = np.concatenate(units)

    t_vec, s_vec = z_t.vector, z_s.vector
    if t_vec.shape != a_vec.shape or s_vec.shape != a_vec.shape:
        raise ValidationError(
            f"aggregated dims disagree: adv {a_vec.shape}, target {t_vec.shape}, "
            f"source {s_vec.shape}"
        )
    na = float(np.linalg.norm(a_vec))
    nt = float(np.linalg.norm(t_vec))
    ns = float(np.linalg.norm(s_vec))
    sim_t = float(np.clip(a_vec @ t_vec / (na * nt), -1.0, 1.0))
    sim_s = float(np.clip(a_vec @ s_vec / (na * ns), -1.0, 1.0))
    breakdown = LossBreakdown(loss_from_sims(sim_t, sim_s, p), sim_t, sim_s)

    c_t, c_s = dloss_dsims(sim_t, sim_s, p)
    # d(cos)/d(a) = ref/(|a||ref|) - cos * a/|a|^2
    d_a = c_t * (t_vec / (na * nt) - sim_t * a_vec / (na * na))
    d_a += c_s * (s_vec / (na * ns) - sim_s * a_vec / (na * na))

    dvs = []
    offset = 0
    for e, n, u in zip(encoders, norms, units):
        du = d_a[offset : offset + e.output_dim]
        offset += e.output_dim
        dvs.append((du - (du @ u) * u) / n)
    return breakdown, dvs, raw, xc


def loss_and_gradient(
    x: np.ndarray,
    encoders: Sequence[ParadigmEncoder],
    z_t: AggregatedFeature,
    z_s: AggregatedFeature,
    p: LossParams,
    window=None,
) -> tuple[LossBreakdown, np.ndarray]:
    """Loss at image point x and its gradient w.r.t. x.

    x is the (already clamped) adversarial image as a raw array; window, if
    given, is a sampled crop (a fixed linear map with forward and vjp). The
    gradient chains d(loss)/d(aggregated feature) through each block's
    normalization Jacobian, each encoder's VJP, and finally the crop's VJP.
    """
    breakdown, dvs, _, xc = block_gradients(x, encoders, z_t, z_s, p, window)
    grad = np.zeros_like(xc)
    for e, dv in zip(encoders, dvs):
        grad += e.vjp(xc, dv)
    if window is not None:
        grad = window.vjp(grad)
    return breakdown, grad


def loss_gradient_wrt_perturbation(
    x_s: ImageTensor,
    delta: Perturbation,
    z_t: AggregatedFeature,
    z_s: AggregatedFeature,
    encoders: Sequence[ParadigmEncoder],
    p: LossParams,
    window=None,
) -> np.ndarray:
    """Gradient of the loss w.r.t. the perturbation, taken at the clamped point."""
    x = clamp_array(x_s.data + delta.data)
    _, grad = loss_and_gradient(x, encoders, z_t, z_s, p, window)
    return grad
