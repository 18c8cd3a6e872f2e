"""Batch orchestration: attack every pair, persist artifacts, evaluate.

Each pair runs independently on an RNG stream derived from (seed,
pair_id), so worker count and scheduling never change results. The batch
report (and every file it references) is a pure function of the manifest:
paths inside reports are relative to the output directory and no
timestamps are recorded.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..aggregation import aggregate_adversarial
from ..attack import reference_features, run_attack
from ..core import EvalRecord, clamp_image
from ..errors import FeatAttackError, JudgeError, ValidationError
from ..evaluation import (
    Judge,
    MockJudge,
    MockVictim,
    Mode,
    PromptedJudge,
    VictimClient,
    aggregate_metrics,
    evaluate_pair,
    load_judge_template,
)
from ..objective import cosine_sim
from ..registry import EncoderSuite, build_suite
from .imagefile import load_image, write_adversarial_image
from .manifest import EvalSettings, RunManifest, config_to_dict
from .pairing import Pair

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def build_judge(settings: EvalSettings) -> Judge:
    if settings.judge == "mock":
        return MockJudge()
    if settings.judge == "live":
        from ..backends import HttpChatBackend

        backend_cfg = settings.backend or {}
        backend = HttpChatBackend(
            endpoint=backend_cfg["judge_endpoint"],
            model=backend_cfg["judge_model"],
            timeout=float(backend_cfg.get("timeout", 60.0)),
        )
        template = (
            load_judge_template(settings.judge_template_path)
            if settings.judge_template_path
            else None
        )
        if template is None:
            return PromptedJudge(backend)
        return PromptedJudge(backend, template)
    raise ValidationError(f"unknown judge kind {settings.judge!r}")


def build_victim(settings: EvalSettings) -> VictimClient:
    if settings.victim == "mock":
        return MockVictim(prompt=settings.victim_prompt)
    if settings.victim == "live":
        from ..backends import HttpChatBackend, HttpVictimClient

        backend_cfg = settings.backend or {}
        backend = HttpChatBackend(
            endpoint=backend_cfg["victim_endpoint"],
            model=backend_cfg["victim_model"],
            timeout=float(backend_cfg.get("timeout", 60.0)),
        )
        return HttpVictimClient(backend, prompt=settings.victim_prompt)
    raise ValidationError(f"unknown victim kind {settings.victim!r}")


def _load_ground_truth(settings: EvalSettings) -> dict | None:
    if not settings.ground_truth_captions:
        return None
    with open(settings.ground_truth_captions, encoding="utf-8") as fh:
        return json.load(fh)


def run_pair(
    pair: Pair,
    manifest: RunManifest,
    suite: EncoderSuite,
    judge: Judge | None,
    victim: VictimClient | None,
    ground_truth: dict | None,
) -> dict:
    """Attack one pair and assemble its record; raises on failure."""
    cfg = manifest.config
    out_dir = Path(manifest.output_dir)
    x_s = load_image(pair.source_path, suite.input_size)
    x_t = load_image(pair.target_path, suite.input_size)

    delta, state = run_attack(x_s, x_t, suite, cfg, pair.pair_id)
    x_adv = clamp_image(x_s.data + delta.data)

    rel_png = f"adv/{pair.pair_id}.png"
    write_adversarial_image(x_adv, out_dir / rel_png, source=x_s, epsilon=cfg.epsilon)

    z_s, z_t = reference_features(x_s, x_t, suite, cfg)
    z_adv = aggregate_adversarial(x_adv, suite, cfg.enabled_paradigms)
    record = {
        "pair_id": pair.pair_id,
        "source": pair.source_path,
        "target": pair.target_path,
        "adv_image": rel_png,
        "budget_linf": float(np.abs(delta.data).max()),
        "initial_loss": state.loss_trajectory[0] if state.loss_trajectory else None,
        "final_loss": state.loss_trajectory[-1] if state.loss_trajectory else None,
        "loss_trajectory": list(state.loss_trajectory),
        "feature_sim_target": cosine_sim(z_adv, z_t),
        "feature_sim_source": cosine_sim(z_adv, z_s),
        "eval": None,
        "excluded": False,
    }

    if manifest.evaluation.enabled and judge is not None and victim is not None:
        # the victim sees the persisted 8-bit image, not the float tensor
        x_adv_loaded = load_image(out_dir / rel_png, suite.input_size)
        adv_response = victim.respond(x_adv_loaded)
        if ground_truth is not None:
            source_ref = ground_truth[Path(pair.source_path).name]
            target_ref = ground_truth[Path(pair.target_path).name]
        else:
            source_ref = victim.respond(x_s)
            target_ref = victim.respond(x_t)
        record["responses"] = {
            "adv": adv_response,
            "target": target_ref,
            "source": source_ref,
        }
        try:
            ev = evaluate_pair(
                adv_response,
                target_ref,
                source_ref,
                judge,
                pair_id=pair.pair_id,
                final_loss=record["final_loss"] if record["final_loss"] is not None else float("nan"),
                loss_trajectory=state.loss_trajectory,
            )
            record["eval"] = {
                "sim_adv_target": ev.sim_adv_target,
                "sim_adv_source": ev.sim_adv_source,
                "targeted_success": ev.targeted_success,
                "untargeted_success": ev.untargeted_success,
            }
        except JudgeError as exc:
            logger.warning("pair %s excluded from metrics: %s", pair.pair_id, exc)
            record["excluded"] = True
            record["exclusion_reason"] = str(exc)
    return record


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _metrics_block(records: list[dict]) -> tuple[dict | None, int]:
    evaluated = []
    n_excluded = 0
    for r in records:
        if r.get("excluded"):
            n_excluded += 1
        elif r.get("eval") is not None:
            ev = r["eval"]
            evaluated.append(
                EvalRecord(
                    pair_id=r["pair_id"],
                    sim_adv_target=ev["sim_adv_target"],
                    sim_adv_source=ev["sim_adv_source"],
                    targeted_success=ev["targeted_success"],
                    untargeted_success=ev["untargeted_success"],
                )
            )
    if not evaluated:
        return None, n_excluded
    block = {}
    for mode in (Mode.TARGETED, Mode.UNTARGETED):
        m = aggregate_metrics(evaluated, mode)
        block[mode.value] = {"asr": m.asr, "avg_sim": m.avg_sim, "n_pairs": m.n_pairs}
    return block, n_excluded


def run_batch(manifest: RunManifest, suite: EncoderSuite | None = None) -> dict:
    """Run every pair in the manifest; returns (and persists) the batch report."""
    if suite is None:
        suite = build_suite(manifest.suite_config)
    out_dir = Path(manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    settings = manifest.evaluation
    judge = build_judge(settings) if settings.enabled else None
    victim = build_victim(settings) if settings.enabled else None
    ground_truth = _load_ground_truth(settings) if settings.enabled else None

    def job(pair: Pair):
        try:
            return pair.pair_id, run_pair(pair, manifest, suite, judge, victim, ground_truth), None
        except FeatAttackError as exc:
            logger.warning("pair %s failed: %s", pair.pair_id, exc)
            return pair.pair_id, None, f"{type(exc).__name__}: {exc}"

    pairs = manifest.pairing.pairs
    workers = manifest.workers if suite.thread_safe else 1
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, pairs))
    else:
        outcomes = [job(p) for p in pairs]
    outcomes.sort(key=lambda o: o[0])

    records = [rec for _, rec, err in outcomes if err is None]
    failures = [
        {"pair_id": pid, "error": err} for pid, _, err in outcomes if err is not None
    ]
    for rec in records:
        _write_json(out_dir / "records" / f"{rec['pair_id']}.json", rec)

    metrics, n_excluded = _metrics_block(records)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(manifest.config),
        "suite": manifest.suite_config,
        "pairing_policy": manifest.pairing.policy.value,
        "n_pairs": len(pairs),
        "pairs": records,
        "failures": failures,
        "metrics": metrics,
        "n_excluded": n_excluded,
    }
    _write_json(out_dir / "report.json", report)
    _write_summary_csv(out_dir / "summary.csv", records)
    return report


def _write_summary_csv(path: Path, records: list[dict]) -> None:
    columns = [
        "pair_id",
        "final_loss",
        "feature_sim_target",
        "feature_sim_source",
        "sim_adv_target",
        "sim_adv_source",
        "targeted_success",
        "untargeted_success",
        "excluded",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in records:
            ev = r.get("eval") or {}
            writer.writerow(
                [
                    r["pair_id"],
                    r["final_loss"],
                    r["feature_sim_target"],
                    r["feature_sim_source"],
                    ev.get("sim_adv_target", ""),
                    ev.get("sim_adv_source", ""),
                    ev.get("targeted_success", ""),
                    ev.get("untargeted_success", ""),
                    r["excluded"],
                ]
            )


def all_pairs_failed(report: dict) -> bool:
    return report["n_pairs"] > 0 and len(report["failures"]) == report["n_pairs"]
