"""Run manifests: everything a batch needs, serialized losslessly."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..core import AttackConfig, Paradigm
from ..errors import ValidationError
from ..evaluation import DESCRIBE_PROMPT
from .pairing import PairingPlan


def config_to_dict(cfg: AttackConfig) -> dict:
    raw = dataclasses.asdict(cfg)
    raw["enabled_paradigms"] = sorted(p.value for p in cfg.enabled_paradigms)
    return raw


def config_from_dict(raw: dict) -> AttackConfig:
    kwargs = dict(raw)
    if "enabled_paradigms" in kwargs:
        kwargs["enabled_paradigms"] = frozenset(
            Paradigm(p) for p in kwargs["enabled_paradigms"]
        )
    return AttackConfig(**kwargs)


@dataclass(frozen=True)
class EvalSettings:
    """How (and whether) a batch is judged after attack generation.

    backend holds endpoint/model/timeout for live judge or victim use;
    credentials are never stored here, only read from the environment.
    """

    enabled: bool = True
    judge: str = "mock"
    victim: str = "mock"
    ground_truth_captions: str | None = None
    judge_template_path: str | None = None
    victim_prompt: str = DESCRIBE_PROMPT
    backend: dict | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalSettings":
        return cls(**raw)


@dataclass(frozen=True)
class RunManifest:
    """Attack config, pairing plan, encoder suite selection, output location."""

    config: AttackConfig
    pairing: PairingPlan
    output_dir: str
    suite_config: dict
    evaluation: EvalSettings = field(default_factory=EvalSettings)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "config": config_to_dict(self.config),
            "pairing": self.pairing.to_dict(),
            "output_dir": str(self.output_dir),
            "suite": self.suite_config,
            "evaluation": self.evaluation.to_dict(),
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunManifest":
        return cls(
            config=config_from_dict(raw["config"]),
            pairing=PairingPlan.from_dict(raw["pairing"]),
            output_dir=raw["output_dir"],
            suite_config=raw["suite"],
            evaluation=EvalSettings.from_dict(raw.get("evaluation", {})),
            workers=int(raw.get("workers", 1)),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
