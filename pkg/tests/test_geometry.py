"""Box arithmetic, IoU, fusion rounding, and mask-to-box extraction."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from micl.geometry import (
    BACKGROUND,
    UNLABELED,
    BoundingBox,
    LabeledMask,
    fuse_boxes,
    intersection_area,
    iou,
    largest_component_box,
)
from oracles import iou_ref, largest_component_ref, random_box


def boxes(max_extent: int = 12):
    def build(x0, y0, w, h):
        return BoundingBox(x0, y0, x0 + w, y0 + h)

    coord = st.integers(min_value=0, max_value=max_extent)
    side = st.integers(min_value=1, max_value=max_extent)
    return st.builds(build, coord, coord, side, side)


class TestBoundingBox:
    def test_basic_accessors(self):
        b = BoundingBox(1, 2, 4, 7)
        assert (b.width, b.height) == (3, 5)
        assert b.area() == 15
        assert b.as_tuple() == (1, 2, 4, 7)

    def test_within_uses_half_open_extent(self):
        assert BoundingBox(0, 0, 8, 8).within(8, 8)
        assert not BoundingBox(0, 0, 9, 8).within(8, 8)

    @pytest.mark.parametrize(
        "coords",
        [(2, 0, 2, 3), (0, 3, 4, 3), (3, 0, 2, 5), (-1, 0, 2, 2), (0, -4, 2, 2)],
    )
    def test_degenerate_or_negative_rejected(self, coords):
        with pytest.raises(ValueError):
            BoundingBox(*coords)

    def test_frozen(self):
        with pytest.raises(AttributeError):
            BoundingBox(0, 0, 1, 1).x_min = 3


class TestIou:
    def test_identical_boxes(self):
        b = BoundingBox(2, 3, 7, 9)
        assert iou(b, b) == 1.0

    def test_disjoint_is_zero(self):
        assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(5, 5, 8, 8)) == 0.0

    def test_touching_boxes_do_not_intersect(self):
        # half-open boxes sharing an edge have empty intersection
        assert intersection_area(BoundingBox(0, 0, 3, 3), BoundingBox(3, 0, 6, 3)) == 0
        assert iou(BoundingBox(0, 0, 3, 3), BoundingBox(3, 0, 6, 3)) == 0.0

    def test_hand_value(self):
        # 2x2 overlap of two 3x3 boxes: 4 / (9 + 9 - 4)
        assert iou(BoundingBox(0, 0, 3, 3), BoundingBox(1, 1, 4, 4)) == 4 / 14

    def test_matches_pixel_set_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            a = random_box(rng, 10, 10)
            b = random_box(rng, 10, 10)
            assert iou(a, b) == iou_ref(a, b)
            assert intersection_area(a, b) == len(
                {(y, x) for y in range(a.y_min, a.y_max) for x in range(a.x_min, a.x_max)}
                & {(y, x) for y in range(b.y_min, b.y_max) for x in range(b.x_min, b.x_max)}
            )

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0


class TestFuseBoxes:
    def test_self_fusion_is_identity(self):
        b = BoundingBox(3, 1, 9, 6)
        assert fuse_boxes(b, b) == b

    def test_exact_means(self):
        fused = fuse_boxes(BoundingBox(0, 0, 4, 4), BoundingBox(2, 0, 6, 4))
        assert fused == BoundingBox(1, 0, 5, 4)

    def test_half_ties_go_toward_first_argument(self):
        a = BoundingBox(0, 0, 2, 2)
        b = BoundingBox(1, 1, 3, 3)
        assert fuse_boxes(a, b) == a
        assert fuse_boxes(b, a) == b

    @given(boxes(), boxes())
    def test_fused_coordinates_lie_between_inputs(self, a, b):
        fused = fuse_boxes(a, b)
        for fc, ac, bc in zip(fused.as_tuple(), a.as_tuple(), b.as_tuple()):
            assert min(ac, bc) <= fc <= max(ac, bc)

    @given(boxes(), boxes())
    def test_order_only_matters_at_half_ties(self, a, b):
        ab = fuse_boxes(a, b)
        ba = fuse_boxes(b, a)
        for cab, cba, ca, cb in zip(ab.as_tuple(), ba.as_tuple(), a.as_tuple(), b.as_tuple()):
            if (ca + cb) % 2 == 0:
                assert cab == cba
            else:
                assert abs(cab - cba) == 1


class TestLabeledMask:
    def test_unlabeled_constructor(self):
        m = LabeledMask.unlabeled(3, 5)
        assert m.labels.shape == (3, 5)
        assert (m.labels == UNLABELED).all()
        assert (m.height, m.width) == (3, 5)

    def test_copy_is_independent(self):
        m = LabeledMask.unlabeled(2, 2)
        c = m.copy()
        c.labels[0, 0] = 4
        assert m.labels[0, 0] == UNLABELED

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            LabeledMask(np.zeros((2, 2, 2), dtype=np.int32))

    def test_coerces_dtype(self):
        m = LabeledMask(np.zeros((2, 2), dtype=np.int64))
        assert m.labels.dtype == np.int32


class TestLargestComponentBox:
    def test_absent_category_returns_none(self):
        assert largest_component_box(LabeledMask.unlabeled(4, 4), 0) is None

    def test_single_blob(self):
        labels = np.full((6, 6), BACKGROUND, dtype=np.int32)
        labels[1:3, 2:5] = 1
        assert largest_component_box(LabeledMask(labels), 1) == BoundingBox(2, 1, 5, 3)

    def test_larger_component_wins(self):
        labels = np.full((6, 8), BACKGROUND, dtype=np.int32)
        labels[0, 0:2] = 0
        labels[3:5, 4:7] = 0
        assert largest_component_box(LabeledMask(labels), 0) == BoundingBox(4, 3, 7, 5)

    def test_size_tie_breaks_to_lowest_origin(self):
        labels = np.full((5, 9), BACKGROUND, dtype=np.int32)
        labels[3, 6:8] = 2  # later in scan order
        labels[1, 2:4] = 2  # same size, smaller (y, x)
        assert largest_component_box(LabeledMask(labels), 2) == BoundingBox(2, 1, 4, 2)

    def test_diagonal_pixels_are_separate_components(self):
        labels = np.full((4, 4), BACKGROUND, dtype=np.int32)
        labels[0, 0] = 0
        labels[1, 1] = 0
        assert largest_component_box(LabeledMask(labels), 0) == BoundingBox(0, 0, 1, 1)

    def test_matches_flood_fill_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            h = int(rng.integers(1, 9))
            w = int(rng.integers(1, 9))
            labels = rng.integers(-2, 3, size=(h, w)).astype(np.int32)
            category = int(rng.integers(0, 3))
            got = largest_component_box(LabeledMask(labels), category)
            want = largest_component_ref(labels == category)
            if want is None:
                assert got is None
            else:
                _, y0, x0, y1, x1 = want
                assert got == BoundingBox(x0, y0, x1, y1)
