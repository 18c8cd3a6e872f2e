"""Paradigm encoders: forward features plus gradient propagation.

Every image encoder exposes two maps over raw (H, W, 3) arrays:

* ``forward(x) -> feature`` of length ``output_dim``
* ``vjp(x, u) -> image-shaped array`` computing u^T J(x)

Both must be deterministic. The toy encoders here are desk-scale
stand-ins for pretrained backbones: the linear one admits analytic
oracles, the conv+tanh one exercises nonlinear gradient checks.
Caption generators and text encoders follow the same determinism
contract; the mocks are hash-based so identical inputs always give
identical outputs across processes.
"""

from __future__ import annotations

import abc
import hashlib
from typing import Protocol, runtime_checkable

import numpy as np

from .core import FeatureVector, ImageTensor, ParadigmTag
from .errors import ValidationError


class ParadigmEncoder(abc.ABC):
    """Deterministic image encoder with an exact vector-Jacobian product."""

    output_dim: int
    input_size: tuple[int, int]
    paradigm_tag: ParadigmTag
    # Encoders safe for concurrent forward/vjp calls on one instance keep
    # this True; adapters wrapping stateful backends may flip it to request
    # pool-per-worker treatment from the batch driver.
    thread_safe: bool = True

    @abc.abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray:
        """Feature of an (H, W, 3) array; length output_dim."""

    @abc.abstractmethod
    def vjp(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        """u^T J(x) reshaped to the image shape."""


@runtime_checkable
class CaptionGenerator(Protocol):
    def caption(self, img: ImageTensor) -> str: ...


@runtime_checkable
class TextEncoder(Protocol):
    output_dim: int

    def encode(self, text: str) -> np.ndarray: ...


def _check_input(encoder: ParadigmEncoder, x: np.ndarray) -> None:
    expected = (*encoder.input_size, 3)
    if x.shape != expected:
        raise ValidationError(
            f"encoder expects input of shape {expected}, got {x.shape}"
        )


def encode(encoder: ParadigmEncoder, img: ImageTensor) -> FeatureVector:
    """Run an encoder forward and wrap the result with its paradigm tag."""
    _check_input(encoder, img.data)
    feat = encoder.forward(img.data)
    feat = np.asarray(feat, dtype=np.float64)
    if feat.shape != (encoder.output_dim,):
        raise ValidationError(
            f"encoder returned shape {feat.shape}, expected ({encoder.output_dim},)"
        )
    return FeatureVector(feat, encoder.paradigm_tag)


def vjp(encoder: ParadigmEncoder, img: ImageTensor, cotangent: FeatureVector | np.ndarray) -> np.ndarray:
    """Propagate a feature-space cotangent back to an image-shaped gradient."""
    _check_input(encoder, img.data)
    u = cotangent.data if isinstance(cotangent, FeatureVector) else np.asarray(cotangent, dtype=np.float64)
    if u.shape != (encoder.output_dim,):
        raise ValidationError(
            f"cotangent length {u.shape} does not match output_dim {encoder.output_dim}"
        )
    return encoder.vjp(img.data, u)


def generate_caption(gen: CaptionGenerator, img: ImageTensor) -> str:
    text = gen.caption(img)
    if not text:
        raise ValidationError("caption generator returned an empty string")
    return text


def encode_text(enc: TextEncoder, text: str) -> FeatureVector:
    if not text:
        raise ValidationError("cannot encode empty text")
    feat = np.asarray(enc.encode(text), dtype=np.float64)
    if feat.shape != (enc.output_dim,):
        raise ValidationError(
            f"text encoder returned shape {feat.shape}, expected ({enc.output_dim},)"
        )
    return FeatureVector(feat, ParadigmTag.CROSS_MODAL_TEXT)


class ToyLinearEncoder(ParadigmEncoder):
    """f(x) = W flatten(x) + b. The Jacobian is constant, so the VJP is W^T u.

    With centered=True the bias is set to -W * (0.5 * ones), i.e. features
    are computed on x - 0.5; this removes the shared brightness direction
    that otherwise dominates feature cosines between random images.
    """

    def __init__(
        self,
        input_size: tuple[int, int],
        output_dim: int,
        paradigm_tag: ParadigmTag,
        seed: int | None = None,
        weight: np.ndarray | None = None,
        bias: np.ndarray | None = None,
        centered: bool = False,
    ) -> None:
        h, w = input_size
        n_in = h * w * 3
        if weight is None:
            if seed is None:
                raise ValidationError("ToyLinearEncoder needs either a weight or a seed")
            rng = np.random.default_rng(seed)
            weight = rng.standard_normal((output_dim, n_in)) / np.sqrt(n_in)
        weight = np.asarray(weight, dtype=np.float64)
        if weight.shape != (output_dim, n_in):
            raise ValidationError(
                f"weight must be ({output_dim}, {n_in}), got {weight.shape}"
            )
        if bias is None:
            bias = -0.5 * weight.sum(axis=1) if centered else np.zeros(output_dim)
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (output_dim,):
            raise ValidationError(f"bias must be ({output_dim},), got {bias.shape}")
        self.input_size = (h, w)
        self.output_dim = output_dim
        self.paradigm_tag = paradigm_tag
        self.weight = weight
        self.bias = bias
        self.weight.flags.writeable = False
        self.bias.flags.writeable = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.weight @ x.reshape(-1) + self.bias

    def vjp(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        return (self.weight.T @ cotangent).reshape(*self.input_size, 3)

    def rescaled(self, factor: float) -> "ToyLinearEncoder":
        """Copy with outputs multiplied by a positive factor (weight and bias)."""
        if factor <= 0:
            raise ValidationError(f"rescale factor must be positive, got {factor}")
        return ToyLinearEncoder(
            self.input_size,
            self.output_dim,
            self.paradigm_tag,
            weight=self.weight * factor,
            bias=self.bias * factor,
        )


class ToyConvEncoder(ParadigmEncoder):
    """3x3 convolution (zero padding, stride 1) -> tanh -> linear readout."""

    def __init__(
        self,
        input_size: tuple[int, int],
        output_dim: int,
        paradigm_tag: ParadigmTag,
        seed: int,
        n_filters: int = 4,
    ) -> None:
        h, w = input_size
        rng = np.random.default_rng(seed)
        self.kernel = rng.standard_normal((3, 3, 3, n_filters)) / 3.0
        n_hidden = h * w * n_filters
        self.readout = rng.standard_normal((output_dim, n_hidden)) / np.sqrt(n_hidden)
        self.readout_bias = rng.standard_normal(output_dim) * 0.01
        self.input_size = (h, w)
        self.output_dim = output_dim
        self.paradigm_tag = paradigm_tag
        self.n_filters = n_filters
        for a in (self.kernel, self.readout, self.readout_bias):
            a.flags.writeable = False

    def _conv(self, x: np.ndarray) -> np.ndarray:
        h, w = self.input_size
        xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
        out = np.zeros((h, w, self.n_filters))
        for di in range(3):
            for dj in range(3):
                out += np.einsum(
                    "ijc,cf->ijf", xp[di : di + h, dj : dj + w, :], self.kernel[di, dj]
                )
        return out

    def _conv_vjp(self, grad_h: np.ndarray) -> np.ndarray:
        h, w = self.input_size
        gp = np.zeros((h + 2, w + 2, 3))
        for di in range(3):
            for dj in range(3):
                gp[di : di + h, dj : dj + w, :] += np.einsum(
                    "ijf,cf->ijc", grad_h, self.kernel[di, dj]
                )
        return gp[1 : h + 1, 1 : w + 1, :]

    def forward(self, x: np.ndarray) -> np.ndarray:
        a = np.tanh(self._conv(x))
        return self.readout @ a.reshape(-1) + self.readout_bias

    def vjp(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        h, w = self.input_size
        pre = self._conv(x)
        a = np.tanh(pre)
        da = (self.readout.T @ cotangent).reshape(h, w, self.n_filters)
        dpre = da * (1.0 - a * a)
        return self._conv_vjp(dpre)


def image_digest(img: ImageTensor, seed: int = 0) -> str:
    """Stable short hash of the image bytes, namespaced by a seed."""
    h = hashlib.sha256()
    h.update(seed.to_bytes(8, "big", signed=True))
    h.update(img.data.tobytes())
    return h.hexdigest()[:16]


class MockCaptionGenerator:
    """Deterministic stand-in for a multimodal caption backend."""

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def caption(self, img: ImageTensor) -> str:
        return f"image:{image_digest(img, self.seed)}"


class MockTextEncoder:
    """Maps text to a hash-seeded pseudo-random unit vector."""

    def __init__(self, output_dim: int) -> None:
        if output_dim < 1:
            raise ValidationError(f"output_dim must be >= 1, got {output_dim}")
        self.output_dim = output_dim

    def encode(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        v = rng.standard_normal(self.output_dim)
        return v / np.linalg.norm(v)
