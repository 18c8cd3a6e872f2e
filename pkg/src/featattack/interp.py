"""Bilinear resizing as an explicit linear map with an exact adjoint.

Resizing is expressed per axis as a dense interpolation matrix, so the
vector-Jacobian product is just the transposed matrices. Half-pixel
centers are used (source = (dst + 0.5) * in/out - 0.5), which makes the
map the exact identity when input and output sizes match.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=256)
def resize_weights(n_in: int, n_out: int) -> np.ndarray:
    """Return the (n_out x n_in) bilinear interpolation matrix for one axis."""
    if n_in < 1 or n_out < 1:
        raise ValueError(f"axis sizes must be positive, got {n_in} -> {n_out}")
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, n_in - 1)
        frac = src - lo
        w[i, lo] += 1.0 - frac
        w[i, hi] += frac
    w.flags.writeable = False
    return w


def resize_image(img: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Bilinearly resize an (H, W, C) array to (out_h, out_w, C)."""
    h, w = img.shape[:2]
    ah = resize_weights(h, out_hw[0])
    aw = resize_weights(w, out_hw[1])
    # rows then columns; einsum keeps the channel axis untouched
    tmp = np.einsum("oh,hwc->owc", ah, img, optimize=True)
    return np.einsum("pw,owc->opc", aw, tmp, optimize=True)


def resize_vjp(grad_out: np.ndarray, in_hw: tuple[int, int]) -> np.ndarray:
    """Adjoint of resize_image: map an output-shaped cotangent back to input shape."""
    oh, ow = grad_out.shape[:2]
    ah = resize_weights(in_hw[0], oh)
    aw = resize_weights(in_hw[1], ow)
    tmp = np.einsum("pw,opc->owc", aw, grad_out, optimize=True)
    return np.einsum("oh,owc->hwc", ah, tmp, optimize=True)
