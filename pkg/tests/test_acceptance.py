"""Acceptance gate: ten numbered criteria with pinned tolerances.

`pytest -v tests/test_acceptance.py` prints one pass/fail line per
criterion. The five-seed full-size benchmark behind criteria 6 to 8
runs once as a module-scoped fixture and is shared between them.
"""
from __future__ import annotations

import json
import math
from time import perf_counter

import numpy as np
import pytest

from micl.ablation import ARMS, median_over_seeds, modal_error, run_ablation
from micl.cli import main
from micl.curriculum import MiclConfig, micl_run
from micl.detector import (
    MscModel,
    PooledRois,
    _image_label_grads,
    branch_scores,
    feature_gradients,
    image_feature_gradients,
    image_score,
    pool_rois,
)
from micl.evaluation import ErrorType, GroundTruthObject, ScoredBox, average_precision, corloc
from micl.geometry import BoundingBox, LabeledMask, largest_component_box
from micl.saliency import LinearHead, aggregate_roi_saliency, cam_map, roi_saliency
from micl.synthdata import GenConfig, dataset_from_json, dataset_to_json, generate_dataset
from oracles import (
    aggregate_ref,
    ap_ref,
    cam_ref,
    central_diff,
    corloc_ref,
    largest_component_ref,
    random_box,
    rel_err,
    roi_saliency_ref,
)

GRAD_TOL = 1e-4
GRAD_STEP = 1e-3
ORACLE_TOL = 1e-12


def _random_model(rng, pool_size, n_channels, n_categories, scale=0.5):
    d = pool_size * pool_size * n_channels
    return MscModel(
        pool_size=pool_size,
        n_channels=n_channels,
        n_categories=n_categories,
        cls_w=scale * rng.standard_normal((n_categories, d)),
        cls_b=scale * rng.standard_normal(n_categories),
        sal_w=scale * rng.standard_normal((n_categories, d)),
    )


def test_criterion_01_analytic_gradients_match_finite_differences():
    t0 = perf_counter()
    rng = np.random.default_rng(2024)
    checked = 0
    worst = 0.0

    def note(analytic, numeric):
        nonlocal checked, worst
        checked += 1
        worst = max(worst, rel_err(float(analytic), float(numeric)))

    # image-label loss gradients for all three parameter blocks
    for _ in range(10):
        model = _random_model(rng, 2, 3, 2)
        flat = rng.standard_normal((4, 12))
        y = rng.integers(0, 2, size=2).astype(np.float64)
        _, g_w, g_b, g_u = _image_label_grads(model, flat, y)

        def loss_with(cls_w=None, cls_b=None, sal_w=None):
            m = MscModel(
                2, 3, 2,
                cls_w=model.cls_w if cls_w is None else cls_w,
                cls_b=model.cls_b if cls_b is None else cls_b,
                sal_w=model.sal_w if sal_w is None else sal_w,
            )
            return _image_label_grads(m, flat, y)[0]

        for _ in range(2):
            idx = (int(rng.integers(2)), int(rng.integers(12)))
            note(g_w[idx], central_diff(lambda w: loss_with(cls_w=w), model.cls_w, idx, GRAD_STEP))
            note(g_u[idx], central_diff(lambda w: loss_with(sal_w=w), model.sal_w, idx, GRAD_STEP))
        bi = (int(rng.integers(2)),)
        note(g_b[bi], central_diff(lambda b: loss_with(cls_b=b), model.cls_b, bi, GRAD_STEP))

    # per-RoI probability gradients with respect to pooled features
    for _ in range(10):
        model = _random_model(rng, 2, 3, 2)
        pooled = rng.standard_normal((3, 2, 2, 3))
        rois = PooledRois(
            boxes=tuple(BoundingBox(0, 0, 1, 1) for _ in range(3)),
            pooled=pooled,
            argmax_y=np.zeros(pooled.shape, dtype=np.intp),
            argmax_x=np.zeros(pooled.shape, dtype=np.intp),
        )
        c = int(rng.integers(2))
        grads = feature_gradients(model, rois, c)
        r = int(rng.integers(3))

        def prob(flat_r):
            stacked = rois.flat.copy()
            stacked[r] = flat_r
            return float(branch_scores(model, stacked)[0][r, c])

        for _ in range(4):
            j = int(rng.integers(12))
            note(grads[r].reshape(-1)[j], central_diff(prob, rois.flat[r].copy(), (j,), GRAD_STEP))

    # image-score gradients routed through the pooling provenance;
    # distinct cell values keep the pooling argmax stable under probes
    for _ in range(6):
        values = rng.permutation(8 * 8 * 3).astype(np.float64)
        features = 0.05 * values.reshape(8, 8, 3)
        boxes = [BoundingBox(0, 0, 6, 6), BoundingBox(2, 2, 8, 8), BoundingBox(1, 3, 7, 8)]
        model = _random_model(rng, 2, 3, 2, scale=0.3)
        rois = pool_rois(features, boxes, 2)
        c = int(rng.integers(2))
        grads = image_feature_gradients(model, rois, c, (8, 8))

        def score(flat_features):
            grid = flat_features.reshape(8, 8, 3)
            return image_score(model, pool_rois(grid, boxes, 2).flat, c)

        for _ in range(4):
            j = int(rng.integers(8 * 8 * 3))
            note(
                grads.reshape(-1)[j],
                central_diff(score, features.reshape(-1).copy(), (j,), GRAD_STEP),
            )

    elapsed = perf_counter() - t0
    assert checked >= 100, f"only {checked} gradient checks ran"
    assert worst <= GRAD_TOL, f"max rel err {worst:.3e} exceeds {GRAD_TOL}"
    assert elapsed < 10.0, f"gradient checks took {elapsed:.1f}s"
    print(f"criterion 1: {checked} checks, max rel err {worst:.2e}, {elapsed:.2f}s")


def test_criterion_02_selection_weights_sum_to_one():
    rng = np.random.default_rng(2)
    cases = 0
    worst = 0.0
    for _ in range(1000):
        pool_size = int(rng.integers(1, 3))
        n_channels = int(rng.integers(1, 5))
        n_categories = int(rng.integers(1, 4))
        n_rois = int(rng.integers(1, 13))
        scale = float(rng.uniform(0.1, 5.0))
        model = _random_model(rng, pool_size, n_channels, n_categories, scale=scale)
        flat = rng.uniform(-10.0, 10.0, size=(n_rois, pool_size * pool_size * n_channels))
        _, h = branch_scores(model, flat)
        worst = max(worst, float(np.abs(h.sum(axis=0) - 1.0).max()))
        cases += 1
    assert cases == 1000
    assert worst <= 1e-9, f"worst deviation {worst:.3e}"
    print(f"criterion 2: 1000 cases, worst |sum(h) - 1| = {worst:.2e}")


def test_criterion_03_uniform_gradients_reduce_to_the_activation_map():
    # with a global-average-pooling head the score gradient at every cell
    # is w[c] / (H * W), so the saliency plane must equal the channel-
    # weighted activation map scaled by that constant
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        height = int(rng.integers(2, 11))
        width = int(rng.integers(2, 11))
        k = int(rng.integers(1, 7))
        c_total = int(rng.integers(1, 5))
        c = int(rng.integers(c_total))
        head = LinearHead(weights=rng.standard_normal((c_total, k)))
        features = rng.standard_normal((height, width, k))
        grads = np.empty((height, width, k))
        grads[:] = head.weights[c] / (height * width)
        got = roi_saliency(features, grads)
        want = cam_map(features, head, c) / (height * width)
        worst = max(worst, float(np.abs(got - want).max()))
    assert worst <= 1e-9, f"worst deviation {worst:.3e}"
    print(f"criterion 3: 100 heads, worst deviation {worst:.2e}")


def test_criterion_04_oracle_equivalence():
    rng = np.random.default_rng(4)
    n = 500

    for _ in range(n):
        height, width = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        k = int(rng.integers(1, 5))
        c_total = int(rng.integers(1, 4))
        features = rng.standard_normal((height, width, k))
        head = LinearHead(weights=rng.standard_normal((c_total, k)))
        c = int(rng.integers(c_total))
        assert np.abs(cam_map(features, head, c) - cam_ref(features, head.weights, c)).max() <= ORACLE_TOL

    for _ in range(n):
        p = int(rng.integers(1, 9))
        k = int(rng.integers(1, 5))
        features = rng.standard_normal((p, p, k))
        grads = rng.standard_normal((p, p, k))
        assert np.abs(roi_saliency(features, grads) - roi_saliency_ref(features, grads)).max() <= ORACLE_TOL

    for _ in range(n):
        rois = []
        for _ in range(int(rng.integers(0, 4))):
            box = random_box(rng, 8, 8)
            plane = rng.standard_normal((int(rng.integers(1, 7)), int(rng.integers(1, 7))))
            rois.append((box, plane, float(rng.uniform(-2.0, 2.0))))
        got = aggregate_roi_saliency(rois, (8, 8))
        assert np.abs(got - aggregate_ref(rois, (8, 8))).max() <= ORACLE_TOL

    for _ in range(n):
        labels = rng.integers(-2, 3, size=(int(rng.integers(1, 9)), int(rng.integers(1, 9))))
        category = int(rng.integers(0, 3))
        got = largest_component_box(LabeledMask(labels.astype(np.int32)), category)
        want = largest_component_ref(labels == category)
        if want is None:
            assert got is None
        else:
            assert got == BoundingBox(want[2], want[1], want[4], want[3])

    for _ in range(n):
        gt = []
        pairs = []
        for image_id in ("a", "b"):
            for category in (0, 1):
                if rng.random() < 0.7:
                    pairs.append((image_id, category))
                    for _ in range(int(rng.integers(1, 3))):
                        gt.append(GroundTruthObject(image_id, category, random_box(rng, 8, 8)))
        if not pairs:
            continue
        preds = {
            pair: None if rng.random() < 0.2 else random_box(rng, 8, 8) for pair in pairs
        }
        assert abs(corloc(preds, gt) - corloc_ref(preds, gt)) <= ORACLE_TOL

    for _ in range(n):
        gt = [
            GroundTruthObject(str(rng.choice(["a", "b"])), int(rng.integers(2)), random_box(rng, 8, 8))
            for _ in range(int(rng.integers(1, 5)))
        ]
        det = [
            ScoredBox(str(rng.choice(["a", "b"])), random_box(rng, 8, 8), float(rng.integers(1, 4)) / 10.0)
            for _ in range(int(rng.integers(0, 9)))
        ]
        category = int(rng.integers(2))
        for variant in ("voc07", "area"):
            got = average_precision(det, gt, category, variant)
            want = ap_ref(det, gt, category, variant)
            if math.isnan(want):
                assert math.isnan(got)
            else:
                assert abs(got - want) <= ORACLE_TOL

    print(f"criterion 4: {n} instances per function, tolerance {ORACLE_TOL}")


def test_criterion_05_curriculum_invariants_over_twenty_seeds():
    t0 = perf_counter()
    for seed in range(20):
        scenes = generate_dataset(GenConfig(n_images=25, rng_seed=seed))
        config = MiclConfig(rng_seed=seed)
        result = micl_run(scenes, config, keep_round_models=True)
        counts = [m.n_selected for m in result.state.metrics]
        assert counts == sorted(counts), f"seed {seed}: selection shrank: {counts}"
        assert len(result.round_models) <= config.max_rounds + 1
        for key, rec in result.state.records.items():
            assert rec.selected, f"seed {seed}: {key} left unselected"
            if not rec.forced:
                assert rec.s_at_selection is not None
                assert rec.s_at_selection >= config.threshold_t, (
                    f"seed {seed}: {key} selected at S={rec.s_at_selection}"
                )
    elapsed = perf_counter() - t0
    assert elapsed < 120.0, f"twenty runs took {elapsed:.1f}s"
    print(f"criterion 5: 20 seeds clean, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def benchmark5():
    t0 = perf_counter()
    results = {}
    for seed in range(5):
        scenes = generate_dataset(GenConfig(rng_seed=seed))
        results[seed] = run_ablation(scenes, MiclConfig(rng_seed=seed))
    return results, perf_counter() - t0


def test_criterion_06_arm_ordering_at_defaults(benchmark5):
    results, elapsed = benchmark5
    medians = {
        arm: median_over_seeds([results[s].final_corloc[arm] for s in range(5)])
        for arm in ARMS
    }
    line = ", ".join(f"{arm} {medians[arm]:.1f}" for arm in ARMS)
    assert medians["msc"] < medians["ssg"], line
    assert medians["ssg"] <= medians["mil"], line
    assert medians["mil"] < medians["micl"], line
    assert medians["micl"] - medians["msc"] >= 10.0, line
    assert elapsed < 300.0, f"benchmark took {elapsed:.1f}s"
    print(f"criterion 6: medians {line}, gap {medians['micl'] - medians['msc']:.1f}, {elapsed:.1f}s")


def test_criterion_07_selected_subset_beats_both_routes(benchmark5):
    results, _ = benchmark5
    for seed, r in results.items():
        assert r.round0_corloc_subset > r.round0_corloc_ssg > r.round0_corloc_det, (
            f"seed {seed}: subset {r.round0_corloc_subset:.1f}, "
            f"ssg {r.round0_corloc_ssg:.1f}, det {r.round0_corloc_det:.1f}"
        )
    print("criterion 7: subset > ssg > det held on all 5 seeds")


def test_criterion_08_error_modes_split_by_route(benchmark5):
    results, _ = benchmark5
    too_large = sum(
        modal_error(r.ssg_error_counts) is ErrorType.TOO_LARGE for r in results.values()
    )
    too_small = sum(
        modal_error(r.det_error_counts) is ErrorType.TOO_SMALL for r in results.values()
    )
    assert too_large >= 4, f"segmenter route modal TOO_LARGE on {too_large}/5 seeds"
    assert too_small >= 4, f"detector route modal TOO_SMALL on {too_small}/5 seeds"
    print(f"criterion 8: TOO_LARGE {too_large}/5 (segmenter), TOO_SMALL {too_small}/5 (detector)")


def test_criterion_09_cli_runs_are_byte_identical(tmp_path):
    config = tmp_path / "settings.cfg"
    config.write_text(
        "n_images=16\nn_categories=2\nheight=24\nwidth=24\nn_channels=7\n"
        "body_size=5,8\npool_size=4\nepochs=60\nretrain_epochs=100\n"
        "max_rounds=2\nworkers=1\n"
    )
    dataset = tmp_path / "dataset.json"
    assert main(["generate", "--config", str(config), "--out", str(dataset)]) == 0
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        code = main([
            "run", "--config", str(config), "--dataset", str(dataset), "--out", str(out),
        ])
        assert code == 0
    metrics_a = (out_a / "metrics.csv").read_bytes()
    assert metrics_a == (out_b / "metrics.csv").read_bytes()
    assert (out_a / "model.json").read_bytes() == (out_b / "model.json").read_bytes()
    assert (out_a / "predictions.json").read_bytes() == (out_b / "predictions.json").read_bytes()
    print(f"criterion 9: {len(metrics_a)} metric bytes identical across runs")


def test_criterion_10_serialization_round_trips_are_byte_identical():
    rng = np.random.default_rng(10)
    for i in range(50):
        config = GenConfig(
            n_images=2,
            n_categories=1 + i % 2,
            height=12 + (i % 3) * 4,
            width=12 + (i % 2) * 4,
            n_channels=7,
            body_size=(4, 6),
            noise_sigma=float(rng.uniform(0.0, 0.2)),
            rng_seed=i,
        )
        text = dataset_to_json(generate_dataset(config))
        back = dataset_from_json(text)
        assert dataset_to_json(back) == text
    for i in range(50):
        pool_size = int(rng.integers(1, 4))
        n_channels = int(rng.integers(1, 5))
        n_categories = int(rng.integers(1, 4))
        model = _random_model(rng, pool_size, n_channels, n_categories, scale=2.0)
        text = model.to_json()
        back = MscModel.from_json(text)
        assert np.array_equal(back.cls_w, model.cls_w)
        assert np.array_equal(back.cls_b, model.cls_b)
        assert np.array_equal(back.sal_w, model.sal_w)
        assert back.to_json() == text
        assert json.loads(text)["pool_size"] == pool_size
    print("criterion 10: 50 dataset and 50 model round trips byte-identical")
