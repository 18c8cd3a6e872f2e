"""Image file I/O: loading to [0,1] arrays, lossless 8-bit persistence.

Quantization rounds half away from zero (byte = floor(255 x + 0.5)), so a
round trip moves any intensity by at most 1/510. Adversarial images get a
budget sidecar recording the max quantized deviation from the quantized
source, which must stay within the attack budget plus one quantization
step.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..core import ImageTensor
from ..errors import ValidationError

BUDGET_SIDECAR_SUFFIX = ".budget.json"


def load_image(path: str | Path, size: tuple[int, int] | None = None) -> ImageTensor:
    """Load a PNG/JPEG as an RGB [0,1] image, optionally bilinearly resized."""
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            if size is not None and im.size != (size[1], size[0]):
                im = im.resize((size[1], size[0]), Image.BILINEAR)
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except OSError as exc:
        raise ValidationError(f"cannot load image {path}: {exc}") from exc
    return ImageTensor(arr)


def quantize(img: ImageTensor | np.ndarray) -> np.ndarray:
    """[0,1] floats to uint8, rounding half away from zero."""
    arr = img.data if isinstance(img, ImageTensor) else np.asarray(img)
    return np.clip(np.floor(arr * 255.0 + 0.5), 0, 255).astype(np.uint8)


def budget_sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + BUDGET_SIDECAR_SUFFIX)


def write_adversarial_image(
    x_adv: ImageTensor,
    path: str | Path,
    source: ImageTensor | None = None,
    epsilon: float | None = None,
) -> Path:
    """Persist x_adv as a lossless PNG; with a source, also write the sidecar.

    The sidecar stores max |quantized(x_adv) - quantized(source)| in 1/255
    units; the allowed bound is the quantized budget plus one step.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    q_adv = quantize(x_adv)
    Image.fromarray(q_adv, "RGB").save(path, format="PNG")
    if source is None:
        return path
    if source.shape != x_adv.shape:
        raise ValidationError(
            f"source shape {source.shape} differs from adversarial {x_adv.shape}"
        )
    q_src = quantize(source)
    max_diff = int(np.abs(q_adv.astype(np.int16) - q_src.astype(np.int16)).max())
    sidecar = {
        "schema_version": 1,
        "max_abs_diff_255": max_diff,
        "max_abs_diff": max_diff / 255.0,
    }
    if epsilon is not None:
        allowed = int(round(epsilon * 255.0)) + 1
        sidecar["allowed_255"] = allowed
        sidecar["within_budget"] = max_diff <= allowed
    with open(budget_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path
