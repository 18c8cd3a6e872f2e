"""Batch harness: pairing, manifests, orchestration, sweeps, CLI."""

from .ablation import heldout_similarity, heldout_transfer_scores, paradigm_ablation
from .batch import all_pairs_failed, run_batch, run_pair
from .imagefile import load_image, quantize, write_adversarial_image
from .manifest import EvalSettings, RunManifest, config_from_dict, config_to_dict
from .pairing import Pair, PairingPlan, PairingPolicy, build_pairing, load_pairing_manifest
from .sweep import sweep, write_sweep_csv, write_trajectory_csv

__all__ = [
    "EvalSettings",
    "Pair",
    "PairingPlan",
    "PairingPolicy",
    "RunManifest",
    "all_pairs_failed",
    "build_pairing",
    "config_from_dict",
    "config_to_dict",
    "heldout_similarity",
    "heldout_transfer_scores",
    "load_image",
    "load_pairing_manifest",
    "paradigm_ablation",
    "quantize",
    "run_batch",
    "run_pair",
    "sweep",
    "write_adversarial_image",
    "write_sweep_csv",
    "write_trajectory_csv",
]
