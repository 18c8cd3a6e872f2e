"""Dataset pairing: sequential sources matched with reverse-order targets."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from ..errors import ValidationError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class PairingPolicy(enum.Enum):
    REVERSE_ORDER = "reverse_order"
    EXPLICIT_MANIFEST = "explicit_manifest"


@dataclass(frozen=True)
class Pair:
    source_path: str
    target_path: str
    pair_id: str


@dataclass(frozen=True)
class PairingPlan:
    pairs: tuple[Pair, ...]
    policy: PairingPolicy
    skipped: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "skipped", tuple(self.skipped))
        if self.policy is PairingPolicy.REVERSE_ORDER:
            for p in self.pairs:
                if p.source_path == p.target_path:
                    raise ValidationError(
                        f"reverse_order pairing produced a self-pair: {p.source_path}"
                    )
        ids = [p.pair_id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValidationError("pair ids are not unique")

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.value,
            "pairs": [
                {"source": p.source_path, "target": p.target_path, "id": p.pair_id}
                for p in self.pairs
            ],
            "skipped": list(self.skipped),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PairingPlan":
        return cls(
            pairs=tuple(
                Pair(p["source"], p["target"], p["id"]) for p in raw.get("pairs", [])
            ),
            policy=PairingPolicy(raw["policy"]),
            skipped=tuple(raw.get("skipped", [])),
        )


def _readable_image(path: Path) -> bool:
    try:
        with Image.open(path) as im:
            im.verify()
        return True
    except (UnidentifiedImageError, OSError):
        return False


def build_pairing(
    image_dir: str | Path,
    policy: PairingPolicy = PairingPolicy.REVERSE_ORDER,
) -> PairingPlan:
    """Pair sorted images: source i attacks toward target n-1-i.

    For odd n the middle image would pair with itself and is skipped with
    a warning. Unreadable files are excluded and listed in the plan's
    skip report.
    """
    if policy is not PairingPolicy.REVERSE_ORDER:
        raise ValidationError(
            "build_pairing implements reverse_order; use load_pairing_manifest "
            "for explicit pairings"
        )
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise ValidationError(f"not a directory: {image_dir}")
    candidates = sorted(
        p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    files, skipped = [], []
    for p in candidates:
        if _readable_image(p):
            files.append(p)
        else:
            logger.warning("skipping unreadable image %s", p)
            skipped.append(str(p))
    n = len(files)
    if n < 2:
        raise ValidationError(f"need at least 2 readable images, found {n} in {image_dir}")
    pairs = []
    for i, src in enumerate(files):
        j = n - 1 - i
        if i == j:
            logger.warning(
                "odd image count %d: middle image %s has no reverse-order partner, skipped",
                n,
                src.name,
            )
            continue
        tgt = files[j]
        pairs.append(Pair(str(src), str(tgt), f"{i:04d}_{src.stem}_to_{tgt.stem}"))
    return PairingPlan(tuple(pairs), policy, tuple(skipped))


def load_pairing_manifest(path: str | Path) -> PairingPlan:
    """Explicit pairing from a JSON list of {source, target, id?} entries."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list) or not raw:
        raise ValidationError(f"pairing manifest {path} must be a nonempty JSON list")
    pairs = []
    for i, entry in enumerate(raw):
        try:
            src, tgt = entry["source"], entry["target"]
        except (TypeError, KeyError) as exc:
            raise ValidationError(
                f"pairing manifest entry {i} needs 'source' and 'target': {entry!r}"
            ) from exc
        pair_id = entry.get("id", f"{i:04d}_{Path(src).stem}_to_{Path(tgt).stem}")
        pairs.append(Pair(str(src), str(tgt), str(pair_id)))
    return PairingPlan(tuple(pairs), PairingPolicy.EXPLICIT_MANIFEST)
