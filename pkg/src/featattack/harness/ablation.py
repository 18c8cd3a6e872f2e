"""Paradigm ablations: single-paradigm attacks vs the full collaboration.

Transferability is measured on held-out encoders the attack never saw:
the held-out similarity of an image pair is the cosine of their
aggregated features under a separate suite.
"""

from __future__ import annotations

import dataclasses

from ..aggregation import aggregate_adversarial
from ..attack import AttackState, run_attack
from ..core import AttackConfig, ImageTensor, Paradigm, Perturbation, clamp_image
from ..objective import cosine_sim
from ..registry import EncoderSuite

ALL = "all"


def paradigm_ablation(
    x_s: ImageTensor,
    x_t: ImageTensor,
    suite: EncoderSuite,
    cfg: AttackConfig,
    pair_id: str = "",
) -> dict[str, tuple[Perturbation, AttackState]]:
    """Run the full attack plus one single-paradigm attack per enabled family.

    All runs share the (seed, pair_id) RNG stream, so they start from the
    same random perturbation and sample identical crop sequences.
    """
    enabled = sorted(
        cfg.enabled_paradigms & suite.paradigms, key=lambda p: p.value
    )
    runs: dict[str, tuple[Perturbation, AttackState]] = {
        ALL: run_attack(x_s, x_t, suite, cfg, pair_id)
    }
    for paradigm in enabled:
        solo = dataclasses.replace(cfg, enabled_paradigms=frozenset({paradigm}))
        runs[paradigm.value] = run_attack(x_s, x_t, suite, solo, pair_id)
    return runs


def heldout_similarity(
    img_a: ImageTensor,
    img_b: ImageTensor,
    heldout_suite: EncoderSuite,
    enabled: frozenset[Paradigm] | None = None,
) -> float:
    """Cosine of two images' aggregated features under a held-out suite."""
    if enabled is None:
        enabled = heldout_suite.paradigms
    za = aggregate_adversarial(img_a, heldout_suite, enabled)
    zb = aggregate_adversarial(img_b, heldout_suite, enabled)
    return cosine_sim(za, zb)


def heldout_transfer_scores(
    x_s: ImageTensor,
    x_t: ImageTensor,
    runs: dict[str, tuple[Perturbation, AttackState]],
    heldout_suite: EncoderSuite,
) -> dict[str, float]:
    """Held-out sim(x_adv, x_t) for each ablation run."""
    scores = {}
    for name, (delta, _) in runs.items():
        x_adv = clamp_image(x_s.data + delta.data)
        scores[name] = heldout_similarity(x_adv, x_t, heldout_suite)
    return scores
