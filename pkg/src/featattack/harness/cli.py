"""Command-line entry points: attack batches, evaluation, sweeps, plot data.

Configuration precedence is CLI flags over config-file values over the
built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..core import AttackConfig, Paradigm
from ..errors import FeatAttackError
from ..evaluation import Mode, aggregate_metrics, evaluate_pair
from ..registry import default_toy_suite_config, load_suite_config
from .batch import all_pairs_failed, build_judge, run_batch
from .manifest import EvalSettings, RunManifest, config_from_dict
from .pairing import PairingPolicy, build_pairing, load_pairing_manifest
from .sweep import SWEEP_PARAMETERS, sweep, write_sweep_csv, write_trajectory_csv

logger = logging.getLogger(__name__)

# CLI flag -> AttackConfig field
_CONFIG_FLAGS = {
    "epsilon": "epsilon",
    "alpha": "alpha",
    "steps": "iterations",
    "mu": "momentum_mu",
    "lambda_fusion": "lambda_fusion",
    "tau": "tau",
    "omega": "omega",
    "crop_min": "crop_min_ratio",
    "crop_max": "crop_max_ratio",
    "seed": "seed",
    "grad_norm": "grad_norm",
    "crops_per_iter": "crops_per_iter",
    "loss_variant": "loss_variant",
}


def _add_attack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--images", help="directory of source/target images")
    p.add_argument(
        "--pairing",
        default="reverse_order",
        help="'reverse_order' or path to an explicit pairing manifest (JSON)",
    )
    p.add_argument("--config", help="JSON config file (lower precedence than flags)")
    p.add_argument("--suite", help="encoder suite config (JSON); default: toy suite")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--lambda", dest="lambda_fusion", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--paradigms", help="comma list: cross_modal,multimodal,self_supervised")
    p.add_argument("--crop-min", dest="crop_min", type=float)
    p.add_argument("--crop-max", dest="crop_max", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--grad-norm", dest="grad_norm", choices=["l1", "l2"])
    p.add_argument("--crops-per-iter", dest="crops_per_iter", type=int)
    p.add_argument(
        "--loss-variant",
        dest="loss_variant",
        choices=["omega_scales_positive", "literal"],
    )
    p.add_argument(
        "--text-fusion",
        dest="text_fusion",
        action=argparse.BooleanOptionalAction,
        default=None,
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument(
        "--evaluate",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="judge the batch with the configured victim/judge",
    )
    p.add_argument("--judge", default="mock", choices=["mock", "live"])
    p.add_argument("--victim", default="mock", choices=["mock", "live"])
    p.add_argument("--judge-template", dest="judge_template")
    p.add_argument("--ground-truth-captions", dest="ground_truth_captions")


def _build_config(args: argparse.Namespace) -> AttackConfig:
    file_cfg: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        file_cfg = dict(raw.get("config", raw))
    merged = dict(file_cfg)
    for flag, field in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            merged[field] = value
    if args.paradigms is not None:
        merged["enabled_paradigms"] = [s.strip() for s in args.paradigms.split(",") if s.strip()]
    if args.text_fusion is not None:
        merged["text_fusion_enabled"] = args.text_fusion
    return config_from_dict(merged)


def _build_manifest(args: argparse.Namespace) -> RunManifest:
    cfg = _build_config(args)
    if args.pairing == PairingPolicy.REVERSE_ORDER.value:
        if not args.images:
            raise FeatAttackError("--images is required with reverse_order pairing")
        plan = build_pairing(args.images)
    else:
        plan = load_pairing_manifest(args.pairing)
    suite_cfg = load_suite_config(args.suite) if args.suite else default_toy_suite_config()
    evaluation = EvalSettings(
        enabled=args.evaluate,
        judge=args.judge,
        victim=args.victim,
        ground_truth_captions=args.ground_truth_captions,
        judge_template_path=args.judge_template,
    )
    return RunManifest(
        config=cfg,
        pairing=plan,
        output_dir=args.out,
        suite_config=suite_cfg,
        evaluation=evaluation,
        workers=args.workers,
    )


def _cmd_attack(args: argparse.Namespace) -> int:
    manifest = _build_manifest(args)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    manifest.save(Path(args.out) / "manifest.json")
    report = run_batch(manifest)
    ok = len(report["pairs"])
    print(f"attacked {report['n_pairs']} pairs: {ok} succeeded, {len(report['failures'])} failed")
    if report["metrics"]:
        for mode, m in report["metrics"].items():
            print(f"{mode}: ASR={m['asr']:.4f} AvgSim={m['avg_sim']:.4f} (n={m['n_pairs']})")
    print(f"report: {Path(args.out) / 'report.json'}")
    return 1 if all_pairs_failed(report) else 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    records_path = Path(args.records)
    if records_path.is_dir():
        files = sorted(records_path.glob("*.json"))
        raw_records = [json.loads(f.read_text(encoding="utf-8")) for f in files]
    else:
        report = json.loads(records_path.read_text(encoding="utf-8"))
        raw_records = report["pairs"]
    settings = EvalSettings(
        judge=args.judge, judge_template_path=args.judge_template, backend=None
    )
    judge = build_judge(settings)
    records = []
    n_excluded = 0
    for raw in raw_records:
        responses = raw.get("responses")
        if not responses:
            logger.warning("record %s has no responses; skipping", raw.get("pair_id"))
            n_excluded += 1
            continue
        try:
            records.append(
                evaluate_pair(
                    responses["adv"],
                    responses["target"],
                    responses["source"],
                    judge,
                    pair_id=raw.get("pair_id", ""),
                )
            )
        except FeatAttackError as exc:
            logger.warning("pair %s excluded: %s", raw.get("pair_id"), exc)
            n_excluded += 1
    if not records:
        print("no evaluable records")
        return 1
    mode = Mode(args.mode)
    m = aggregate_metrics(records, mode)
    print(f"{mode.value}: ASR={m.asr:.4f} AvgSim={m.avg_sim:.4f} (n={m.n_pairs}, excluded={n_excluded})")
    if args.out:
        payload = {
            "mode": mode.value,
            "asr": m.asr,
            "avg_sim": m.avg_sim,
            "n_pairs": m.n_pairs,
            "n_excluded": n_excluded,
        }
        Path(args.out).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    manifest = _build_manifest(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    report = sweep(manifest, args.param, values)
    for row in report["rows"]:
        if "error" in row:
            print(f"{args.param}={row['value']:g}: FAILED ({row['error']})")
        else:
            t = row.get("targeted_asr")
            u = row.get("untargeted_asr")
            t_txt = f"{t:.4f}" if t is not None else "n/a"
            u_txt = f"{u:.4f}" if u is not None else "n/a"
            print(f"{args.param}={row['value']:g}: targeted ASR={t_txt} untargeted ASR={u_txt}")
    all_failed = all("error" in row for row in report["rows"])
    return 1 if all_failed else 0


def _cmd_plot_data(args: argparse.Namespace) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    if report.get("kind") == "sweep":
        write_sweep_csv(report, args.out)
    else:
        write_trajectory_csv(report, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featattack",
        description="Transferable adversarial attacks via multi-paradigm feature matching",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="run an attack batch")
    _add_attack_flags(p_attack)
    p_attack.set_defaults(func=_cmd_attack)

    p_eval = sub.add_parser("evaluate", help="re-judge persisted responses")
    p_eval.add_argument("--records", required=True, help="records dir or report.json")
    p_eval.add_argument("--judge", default="mock", choices=["mock", "live"])
    p_eval.add_argument("--mode", default="targeted", choices=["targeted", "untargeted"])
    p_eval.add_argument("--judge-template", dest="judge_template")
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="sweep lambda, tau, or omega")
    _add_attack_flags(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMETERS))
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plot = sub.add_parser("plot-data", help="emit plot-ready CSV from a report")
    p_plot.add_argument("--report", required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=_cmd_plot_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FeatAttackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
