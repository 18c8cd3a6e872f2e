"""Acceptance gate: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion. The whole module runs on toy encoders in well under
five minutes on one CPU core.
"""

import contextlib
import dataclasses
import json
import math
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from featattack import (
    AttackConfig,
    EvalRecord,
    ImageTensor,
    MockJudge,
    Paradigm,
    ParadigmTag,
    Perturbation,
    ToyConvEncoder,
    build_suite,
    clamp_image,
    cosine_sim,
    default_toy_suite_config,
    pair_rng,
    run_attack,
)
from featattack.aggregation import aggregate, aggregate_adversarial
from featattack.attack import CropTransform, attack_step, init_state, reference_features
from featattack.core import FeatureVector
from featattack.harness import (
    EvalSettings,
    RunManifest,
    build_pairing,
    paradigm_ablation,
    heldout_transfer_scores,
    quantize,
    run_batch,
    write_adversarial_image,
)
from featattack.harness.imagefile import budget_sidecar_path
from featattack.objective import LossParams, loss_from_sims, loss_gradient_wrt_perturbation
from featattack.registry import CrossModalPair, EncoderSuite, family_suite_config

from conftest import forward_loss, fd_gradient, rel_error, interior_image

SIZE = (8, 8)
EPS = 16 / 255


@contextlib.contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except Exception:
        print(f"FAIL criterion {number}: {description}")
        raise
    print(f"PASS criterion {number}: {description}")


def _linear_suite():
    return build_suite(default_toy_suite_config(seed=0, input_size=SIZE, output_dim=8))


def _conv_suite():
    enc = ToyConvEncoder(SIZE, 8, ParadigmTag.MULTIMODAL, seed=4)
    return EncoderSuite(SIZE, multimodal=(enc,))


def test_criterion_1_gradient_correctness():
    """Analytic perturbation gradient vs central finite differences."""
    with criterion(1, "gradient matches finite differences (rel err <= 1e-4, 52 instances)"):
        combos = []
        for suite, enabled in (
            (_linear_suite(), frozenset(Paradigm)),
            (_conv_suite(), frozenset({Paradigm.MULTIMODAL})),
        ):
            for with_crop in (False, True):
                combos.append((suite, enabled, with_crop))
        rng = np.random.default_rng(2024)
        crop = CropTransform(0.5, 1.0)
        checked = 0
        for suite, enabled, with_crop in combos:
            cfg = AttackConfig(enabled_paradigms=enabled)
            encoders = suite.adversarial_encoders(enabled)
            for _ in range(13):
                x_s = interior_image(rng, lo=0.3, hi=0.7)
                x_t = interior_image(rng, lo=0.3, hi=0.7)
                z_s, z_t = reference_features(x_s, x_t, suite, cfg)
                delta = Perturbation(rng.uniform(-EPS, EPS, x_s.shape), EPS)
                window = crop.sample(rng, *SIZE) if with_crop else None
                params = LossParams()
                analytic = loss_gradient_wrt_perturbation(
                    x_s, delta, z_t, z_s, encoders, params, window
                )

                def scalar_loss(d, x_s=x_s, encoders=encoders, z_t=z_t, z_s=z_s, window=window):
                    x = np.clip(x_s.data + d, 0.0, 1.0)
                    return forward_loss(x, encoders, z_t, z_s, LossParams(), window)

                fd = fd_gradient(scalar_loss, delta.data.copy(), h=1e-5)
                assert rel_error(analytic, fd) <= 1e-4
                checked += 1
        assert checked >= 50


def test_criterion_2_budget_invariant(fixture_suite, tmp_path):
    """L-inf budget after every iteration of a default 300-step run, and
    after 8-bit persistence."""
    with criterion(2, "budget <= eps + 1e-9 every iteration; quantized sidecar <= 17/255"):
        rng = np.random.default_rng(5)
        x_s = ImageTensor(rng.uniform(0, 1, (16, 16, 3)))
        x_t = ImageTensor(rng.uniform(0, 1, (16, 16, 3)))
        cfg = AttackConfig(seed=5)
        assert cfg.epsilon == pytest.approx(16 / 255) and cfg.alpha == pytest.approx(1 / 255)
        assert cfg.iterations == 300

        z_s, z_t = reference_features(x_s, x_t, fixture_suite, cfg)
        encoders = fixture_suite.adversarial_encoders(cfg.enabled_paradigms)
        g = pair_rng(cfg.seed, "budget")
        state = init_state(x_s, cfg, g)
        crop = CropTransform(cfg.crop_min_ratio, cfg.crop_max_ratio)
        for _ in range(cfg.iterations):
            state = attack_step(state, x_s, z_t, z_s, encoders, cfg, g, crop)
            assert float(np.abs(state.delta.data).max()) <= cfg.epsilon + 1e-9
        x_adv = clamp_image(x_s.data + state.delta.data)
        assert float(np.abs(x_adv.data - x_s.data).max()) <= cfg.epsilon + 1e-9

        path = tmp_path / "adv.png"
        write_adversarial_image(x_adv, path, source=x_s, epsilon=cfg.epsilon)
        sidecar = json.loads(budget_sidecar_path(path).read_text())
        assert sidecar["max_abs_diff_255"] <= 17
        assert sidecar["max_abs_diff"] <= 17 / 255 + 1e-12


def test_criterion_3_loss_anchors():
    """ln 2 at zero similarity across a 5x5 grid; high-precision oracle value."""
    with criterion(3, "ln2 anchor on 5x5 (tau, omega) grid; oracle value to 1e-10"):
        for tau in (0.05, 0.1, 0.2, 0.5, 1.0):
            for omega in (0.5, 1.0, 2.0, 3.0, 5.0):
                loss = loss_from_sims(0.0, 0.0, LossParams(tau=tau, omega=omega))
                assert abs(loss - math.log(2.0)) <= 1e-12
        # independently evaluated with 60-digit arithmetic:
        # -omega*sim_t/tau + log(exp(sim_t/tau) + exp(sim_s/tau)) at (1,-1,0.2,2)
        value = loss_from_sims(1.0, -1.0, LossParams(tau=0.2, omega=2.0))
        assert abs(value - (-4.999954601100783)) <= 1e-10


def test_criterion_4_aggregation_anchors():
    """Unit block norms, total norm, and positive-rescaling invariance."""
    with criterion(4, "block norms 1 +/- 1e-6; total sqrt(#blocks); rescale-invariant to 1e-12"):
        rng = np.random.default_rng(11)
        suite = _linear_suite()
        img = interior_image(rng)
        z = aggregate_adversarial(img, suite, frozenset(Paradigm))
        for b in z.blocks:
            assert abs(b.norm - 1.0) <= 1e-6
        assert abs(float(np.linalg.norm(z.vector)) - math.sqrt(len(z.blocks))) <= 1e-5

        tags = (ParadigmTag.CROSS_MODAL_IMAGE, ParadigmTag.MULTIMODAL, ParadigmTag.SELF_SUPERVISED)
        for _ in range(25):
            blocks = [FeatureVector(rng.standard_normal(6), t) for t in tags]
            base = aggregate(blocks).vector
            k = int(rng.integers(0, 3))
            factor = float(rng.uniform(0.05, 40.0))
            scaled = [
                FeatureVector(b.data * factor, b.paradigm_tag) if i == k else b
                for i, b in enumerate(blocks)
            ]
            assert float(np.abs(aggregate(scaled).vector - base).max()) <= 1e-12


def test_criterion_5_attack_efficacy(fixture_suite):
    """Committed seeded toy run: target similarity gain >= 0.3, loss decreases."""
    with criterion(5, "sim(z_adv, z_t) gain >= 0.3 and final loss < initial loss"):
        rng = np.random.default_rng(5)
        x_s = ImageTensor(rng.uniform(0, 1, (16, 16, 3)))
        x_t = ImageTensor(rng.uniform(0, 1, (16, 16, 3)))
        cfg = AttackConfig(seed=5)

        z_s, z_t = reference_features(x_s, x_t, fixture_suite, cfg)

        def target_sim(delta):
            x_adv = clamp_image(x_s.data + delta.data)
            z_adv = aggregate_adversarial(x_adv, fixture_suite, cfg.enabled_paradigms)
            return cosine_sim(z_adv, z_t)

        before = target_sim(init_state(x_s, cfg, pair_rng(cfg.seed, "fixture")).delta)
        delta, state = run_attack(x_s, x_t, fixture_suite, cfg, "fixture")
        after = target_sim(delta)
        assert after - before >= 0.3
        assert state.loss_trajectory[-1] < state.loss_trajectory[0]


def test_criterion_6_ablation_ordering():
    """Three-paradigm attack transfers to held-out encoders at least as well
    as every single-paradigm attack, strictly better on >= 15/20 instances."""
    with criterion(6, "held-out sim: full >= each solo on average; full > best solo on >= 15/20"):
        surrogate = build_suite(
            family_suite_config(member_seeds=(0,), input_size=(16, 16), output_dim=8)
        )
        heldout = build_suite(
            family_suite_config(member_seeds=(100, 101, 102), input_size=(16, 16), output_dim=8)
        )
        strict_wins = 0
        full_scores = []
        solo_scores = {p.value: [] for p in Paradigm}
        for k in range(20):
            rng = np.random.default_rng(7000 + k)
            x_s = ImageTensor(rng.uniform(0, 1, (16, 16, 3)))
            x_t = ImageTensor(rng.uniform(0, 1, (16, 16, 3)))
            cfg = AttackConfig(seed=1000 + k, text_fusion_enabled=False)
            runs = paradigm_ablation(x_s, x_t, surrogate, cfg, pair_id=f"abl{k}")
            scores = heldout_transfer_scores(x_s, x_t, runs, heldout)
            full_scores.append(scores["all"])
            best_solo = max(v for name, v in scores.items() if name != "all")
            if scores["all"] > best_solo:
                strict_wins += 1
            for p in Paradigm:
                solo_scores[p.value].append(scores[p.value])
        mean_full = float(np.mean(full_scores))
        for p, vals in solo_scores.items():
            assert mean_full >= float(np.mean(vals))
        assert strict_wins >= 15


def test_criterion_7_lambda_boundary_equivalence():
    """lambda = 1 is bit-identical to disabling text fusion."""
    with criterion(7, "lambda=1 run bit-identical to text-fusion-disabled run"):
        suite = _linear_suite()
        rng = np.random.default_rng(21)
        for pair_id in ("p0", "p1"):
            x_s, x_t = interior_image(rng), interior_image(rng)
            cfg_lam = AttackConfig(iterations=40, seed=9, lambda_fusion=1.0)
            cfg_off = AttackConfig(iterations=40, seed=9, text_fusion_enabled=False)
            d_lam, _ = run_attack(x_s, x_t, suite, cfg_lam, pair_id)
            d_off, _ = run_attack(x_s, x_t, suite, cfg_off, pair_id)
            assert np.array_equal(d_lam.data, d_off.data)


def test_criterion_8_batch_determinism(tmp_path):
    """Byte-identical artifacts from identical manifests at any worker count."""
    with criterion(8, "identical manifests give byte-identical PNGs and reports"):
        images = tmp_path / "images"
        images.mkdir()
        rng = np.random.default_rng(0)
        for i in range(4):
            arr = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
            Image.fromarray(arr, "RGB").save(images / f"{i:02d}.png")
        plan = build_pairing(images)

        def manifest(out, workers):
            return RunManifest(
                config=AttackConfig(iterations=40, seed=13),
                pairing=plan,
                output_dir=str(tmp_path / out),
                suite_config=default_toy_suite_config(seed=0, input_size=SIZE, output_dim=8),
                evaluation=EvalSettings(enabled=True),
                workers=workers,
            )

        run_batch(manifest("r1", 1))
        run_batch(manifest("r2", 1))
        run_batch(manifest("r3", 3))
        ref = (tmp_path / "r1" / "report.json").read_bytes()
        assert (tmp_path / "r2" / "report.json").read_bytes() == ref
        assert (tmp_path / "r3" / "report.json").read_bytes() == ref
        pngs = sorted(p.name for p in (tmp_path / "r1" / "adv").glob("*.png"))
        assert pngs
        for name in pngs:
            ref_png = (tmp_path / "r1" / "adv" / name).read_bytes()
            assert (tmp_path / "r2" / "adv" / name).read_bytes() == ref_png
            assert (tmp_path / "r3" / "adv" / name).read_bytes() == ref_png


def test_criterion_9_evaluation_semantics():
    """Strict 0.5 thresholds and the hand-computed mock-judge fixture."""
    with criterion(9, "strict > / < 0.5 thresholds; mock judge 2/3 on red car/truck"):
        boundary = EvalRecord.from_similarities("b", 0.5, 0.5)
        assert boundary.targeted_success is False
        assert boundary.untargeted_success is False
        just_over = EvalRecord.from_similarities("o", 0.5 + 1e-12, 0.5 - 1e-12)
        assert just_over.targeted_success is True
        assert just_over.untargeted_success is True
        assert EvalRecord.from_similarities("t", 0.51, 0.6).targeted_success is True
        assert EvalRecord.from_similarities("u", 0.4, 0.49).untargeted_success is True

        judge = MockJudge()
        assert judge.score("a red car", "a red truck") == pytest.approx(2 / 3, rel=1e-12)
        assert judge.score("same words here", "same words here") == pytest.approx(1.0)
        assert judge.score("alpha beta", "gamma delta") == 0.0
