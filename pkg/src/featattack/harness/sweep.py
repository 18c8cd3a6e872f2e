"""Hyperparameter sweeps: one batch per value, metrics table, plot data."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from pathlib import Path

from ..errors import FeatAttackError, ValidationError
from ..registry import EncoderSuite
from .batch import run_batch
from .manifest import RunManifest, config_to_dict

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = {
    "lambda": "lambda_fusion",
    "tau": "tau",
    "omega": "omega",
}


def manifest_for_value(manifest: RunManifest, parameter: str, value: float) -> RunManifest:
    field = SWEEP_PARAMETERS[parameter]
    cfg = dataclasses.replace(manifest.config, **{field: value})
    out = str(Path(manifest.output_dir) / f"{parameter}_{value:g}")
    return dataclasses.replace(manifest, config=cfg, output_dir=out)


def sweep(
    manifest: RunManifest,
    parameter: str,
    values: list[float],
    suite: EncoderSuite | None = None,
) -> dict:
    """Run one batch per parameter value; per-value failures are isolated."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValidationError(
            f"parameter must be one of {sorted(SWEEP_PARAMETERS)}, got {parameter!r}"
        )
    if not values:
        raise ValidationError("sweep needs at least one value")
    rows = []
    for value in values:
        sub = manifest_for_value(manifest, parameter, value)
        row = {"parameter": parameter, "value": value}
        try:
            report = run_batch(sub, suite)
            row["output_dir"] = f"{parameter}_{value:g}"
            row["n_failures"] = len(report["failures"])
            metrics = report["metrics"]
            if metrics:
                for mode in ("targeted", "untargeted"):
                    row[f"{mode}_asr"] = metrics[mode]["asr"]
                    row[f"{mode}_avg_sim"] = metrics[mode]["avg_sim"]
        except FeatAttackError as exc:
            logger.warning("sweep value %s=%s failed: %s", parameter, value, exc)
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)

    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "schema_version": 1,
        "kind": "sweep",
        "parameter": parameter,
        "values": list(values),
        "base_config": config_to_dict(manifest.config),
        "rows": rows,
    }
    with open(out_dir / "sweep_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_sweep_csv(report, out_dir / "sweep_data.csv")
    return report


def write_sweep_csv(report: dict, path: str | Path) -> None:
    """Plot-ready CSV: one row per swept value."""
    columns = [
        "parameter",
        "value",
        "targeted_asr",
        "targeted_avg_sim",
        "untargeted_asr",
        "untargeted_avg_sim",
        "n_failures",
        "error",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in report["rows"]:
            writer.writerow([row.get(c, "") for c in columns])


def write_trajectory_csv(batch_report: dict, path: str | Path) -> None:
    """Long-format loss trajectories from a batch report, for plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "step", "loss"])
        for rec in batch_report["pairs"]:
            for step, loss in enumerate(rec["loss_trajectory"]):
                writer.writerow([rec["pair_id"], step, loss])
