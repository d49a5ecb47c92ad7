"""Saliency map construction: CAM planes, gradient background, RoI aggregation."""
from __future__ import annotations

import numpy as np
import pytest

from micl.geometry import BoundingBox
from micl.saliency import (
    LinearHead,
    aggregate_roi_saliency,
    bilinear_resize,
    cam_map,
    grad_background_map,
    normalize_saliency,
    roi_saliency,
)
from oracles import aggregate_ref, bilinear_ref, cam_ref, random_box, roi_saliency_ref


class TestLinearHead:
    def test_rejects_non_2d_weights(self):
        with pytest.raises(ValueError):
            LinearHead(np.zeros(3))

    def test_rejects_non_finite_weights(self):
        with pytest.raises(ValueError):
            LinearHead(np.array([[1.0, np.inf]]))


class TestCamMap:
    def test_hand_value(self):
        features = np.array([[[1.0, 2.0]]])
        head = LinearHead(np.array([[3.0, -1.0], [0.5, 0.5]]))
        assert cam_map(features, head, 0)[0, 0] == 1.0
        assert cam_map(features, head, 1)[0, 0] == 1.5

    def test_linearity_in_features(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((5, 4, 3))
        b = rng.standard_normal((5, 4, 3))
        head = LinearHead(rng.standard_normal((2, 3)))
        np.testing.assert_allclose(
            cam_map(a + b, head, 1), cam_map(a, head, 1) + cam_map(b, head, 1), atol=1e-12
        )

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            h, w, k = (int(rng.integers(1, 7)) for _ in range(3))
            features = rng.standard_normal((h, w, k))
            head = LinearHead(rng.standard_normal((3, k)))
            c = int(rng.integers(3))
            np.testing.assert_allclose(
                cam_map(features, head, c), cam_ref(features, head.weights, c), atol=1e-12
            )

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            cam_map(np.zeros((2, 2, 3)), LinearHead(np.zeros((1, 4))), 0)

    def test_non_3d_features_rejected(self):
        with pytest.raises(ValueError):
            cam_map(np.zeros((2, 2)), LinearHead(np.zeros((1, 2))), 0)


class TestGradBackgroundMap:
    def test_single_category_normalized_complement(self):
        grads = {0: np.array([[[2.0], [-4.0]], [[0.0], [1.0]]])}
        got = grad_background_map(grads, [0])
        np.testing.assert_allclose(got, 1.0 - np.array([[0.5, 1.0], [0.0, 0.25]]))

    def test_max_over_channels_then_categories(self):
        g0 = np.zeros((1, 2, 2))
        g0[0, 0] = [1.0, 4.0]  # channel max 4, global max 4
        g1 = np.zeros((1, 2, 1))
        g1[0, 1] = [2.0]
        got = grad_background_map({0: g0, 1: g1}, [0, 1])
        np.testing.assert_allclose(got, np.array([[0.0, 0.0]]))

    def test_zero_gradient_category_contributes_nothing(self):
        grads = {0: np.zeros((2, 2, 1)), 1: np.ones((2, 2, 1))}
        np.testing.assert_allclose(grad_background_map(grads, [0, 1]), np.zeros((2, 2)))

    def test_all_degenerate_gives_all_ones(self):
        grads = {0: np.zeros((3, 2, 2))}
        np.testing.assert_allclose(grad_background_map(grads, [0]), np.ones((3, 2)))

    def test_output_range(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            grads = {c: rng.standard_normal((4, 5, 3)) for c in range(2)}
            got = grad_background_map(grads, [0, 1])
            assert got.min() >= 0.0 and got.max() <= 1.0

    def test_missing_category_rejected(self):
        with pytest.raises(ValueError):
            grad_background_map({0: np.zeros((2, 2, 1))}, [0, 1])

    def test_empty_category_set_rejected(self):
        with pytest.raises(ValueError):
            grad_background_map({}, [])


class TestRoiSaliency:
    def test_matches_oracle(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            p = int(rng.integers(1, 6))
            k = int(rng.integers(1, 5))
            features = rng.standard_normal((p, p, k))
            grads = rng.standard_normal((p, p, k))
            np.testing.assert_allclose(
                roi_saliency(features, grads), roi_saliency_ref(features, grads), atol=1e-12
            )

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            roi_saliency(np.zeros((2, 2, 3)), np.zeros((2, 2, 4)))


class TestBilinearResize:
    def test_same_size_is_identity(self):
        rng = np.random.default_rng(37)
        plane = rng.standard_normal((5, 7))
        assert np.array_equal(bilinear_resize(plane, 5, 7), plane)

    def test_constant_plane_stays_constant(self):
        plane = np.full((3, 4), 2.5)
        np.testing.assert_allclose(bilinear_resize(plane, 7, 9), 2.5, atol=1e-12)

    def test_single_cell_broadcasts(self):
        got = bilinear_resize(np.array([[3.0]]), 4, 2)
        assert np.array_equal(got, np.full((4, 2), 3.0))

    def test_upsample_hand_values(self):
        plane = np.array([[0.0, 1.0]])
        # output x centers map to -0.25, 0.25, 0.75, 1.25 before clamping
        got = bilinear_resize(plane, 1, 4)
        np.testing.assert_allclose(got, [[0.0, 0.25, 0.75, 1.0]], atol=1e-12)

    def test_matches_oracle(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            in_h, in_w = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            out_h, out_w = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            plane = rng.standard_normal((in_h, in_w))
            np.testing.assert_allclose(
                bilinear_resize(plane, out_h, out_w),
                bilinear_ref(plane, out_h, out_w),
                atol=1e-12,
            )

    def test_rejects_empty_output(self):
        with pytest.raises(ValueError):
            bilinear_resize(np.zeros((2, 2)), 0, 3)


class TestAggregateRoiSaliency:
    def test_empty_roi_list_gives_zero_plane(self):
        assert np.array_equal(aggregate_roi_saliency([], (3, 4)), np.zeros((3, 4)))

    def test_single_roi_pasted_and_scaled(self):
        plane = np.ones((2, 2))
        box = BoundingBox(1, 0, 3, 2)
        got = aggregate_roi_saliency([(box, plane, 0.5)], (3, 4))
        want = np.zeros((3, 4))
        want[0:2, 1:3] = 0.5
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_overlapping_rois_accumulate(self):
        plane = np.ones((1, 1))
        box = BoundingBox(0, 0, 1, 1)
        got = aggregate_roi_saliency([(box, plane, 1.0), (box, plane, 2.0)], (1, 1))
        assert got[0, 0] == 3.0

    def test_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(43)
        for _ in range(60):
            height, width = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            rois = []
            for _ in range(int(rng.integers(0, 5))):
                box = random_box(rng, width, height)
                plane = rng.standard_normal((int(rng.integers(1, 4)), int(rng.integers(1, 4))))
                rois.append((box, plane, float(rng.standard_normal())))
            np.testing.assert_allclose(
                aggregate_roi_saliency(rois, (height, width)),
                aggregate_ref(rois, (height, width)),
                atol=1e-12,
            )

    def test_roi_outside_canvas_rejected(self):
        with pytest.raises(ValueError):
            aggregate_roi_saliency(
                [(BoundingBox(0, 0, 5, 2), np.ones((1, 1)), 1.0)], (4, 4)
            )


class TestNormalizeSaliency:
    def test_min_max_to_unit_interval(self):
        got = normalize_saliency(np.array([[0.0, 2.0, 4.0]]))
        np.testing.assert_allclose(got, [[0.0, 0.5, 1.0]])

    def test_negatives_clamped_before_normalizing(self):
        got = normalize_saliency(np.array([[-5.0, 0.0, 1.0]]))
        np.testing.assert_allclose(got, [[0.0, 0.0, 1.0]])

    def test_all_zero_stays_zero(self):
        assert np.array_equal(normalize_saliency(np.zeros((2, 3))), np.zeros((2, 3)))

    def test_all_negative_collapses_to_zero(self):
        assert np.array_equal(normalize_saliency(np.full((2, 2), -1.0)), np.zeros((2, 2)))

    def test_positive_constant_maps_to_ones(self):
        assert np.array_equal(normalize_saliency(np.full((2, 2), 0.3)), np.ones((2, 2)))

    def test_output_range(self):
        rng = np.random.default_rng(47)
        for _ in range(50):
            plane = rng.standard_normal((4, 6)) * 10
            got = normalize_saliency(plane)
            assert got.min() >= 0.0 and got.max() <= 1.0
