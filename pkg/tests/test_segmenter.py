"""Seeded region growing: adoption rules, barriers, and termination."""
from __future__ import annotations

import numpy as np
import pytest

from micl.geometry import BoundingBox, SeedMask
from micl.kernels import BACKGROUND, UNLABELED
from micl.segmenter import (
    RegionGrowConfig,
    RegionGrowSegmenter,
    grow_seeds,
    ssg_box,
)


def _row_features(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64).reshape(1, -1, 1)


def _row_seeds(labels) -> SeedMask:
    return SeedMask(np.asarray(labels, dtype=np.int32).reshape(1, -1))


class TestRegionGrowConfig:
    def test_negative_tolerance_rejected(self):
        with pytest.raises(ValueError):
            RegionGrowConfig(similarity_tolerance=-0.1)

    def test_negative_iteration_cap_rejected(self):
        with pytest.raises(ValueError):
            RegionGrowConfig(max_iterations=-1)


class TestGrowSeeds:
    def test_uniform_region_filled_from_single_seed(self):
        features = np.zeros((5, 5, 2))
        features[1:4, 1:4] = [1.0, 0.0]
        labels = np.full((5, 5), UNLABELED, dtype=np.int32)
        labels[2, 2] = 0
        got = grow_seeds(features, SeedMask(labels), RegionGrowConfig(0.5, 16))
        want = np.full((5, 5), BACKGROUND, dtype=np.int32)
        want[1:4, 1:4] = 0
        assert np.array_equal(got.labels, want)

    def test_zero_tolerance_adopts_exact_matches_only(self):
        features = _row_features([1.0, 1.0, 2.0])
        got = grow_seeds(features, _row_seeds([0, UNLABELED, UNLABELED]), RegionGrowConfig(0.0, 8))
        assert got.labels.tolist() == [[0, 0, BACKGROUND]]

    def test_zero_iterations_leave_seeds_untouched(self):
        features = _row_features([1.0, 1.0])
        got = grow_seeds(features, _row_seeds([0, UNLABELED]), RegionGrowConfig(5.0, 0))
        assert got.labels.tolist() == [[0, BACKGROUND]]

    def test_seed_pixels_are_never_relabeled(self):
        features = _row_features([0.0, 0.0, 0.0])
        got = grow_seeds(
            features, _row_seeds([0, 1, BACKGROUND]), RegionGrowConfig(5.0, 8)
        )
        assert got.labels.tolist() == [[0, 1, BACKGROUND]]

    def test_background_seeds_block_growth(self):
        features = _row_features([1.0, 1.0, 1.0, 1.0, 1.0])
        got = grow_seeds(
            features,
            _row_seeds([0, UNLABELED, BACKGROUND, UNLABELED, UNLABELED]),
            RegionGrowConfig(2.0, 16),
        )
        # growth cannot pass the background pixel in a one-row corridor
        assert got.labels.tolist() == [[0, 0, BACKGROUND, BACKGROUND, BACKGROUND]]

    def test_region_mean_adapts_as_pixels_join(self):
        features = _row_features([0.0, 0.5, 1.0])
        seeds = [0, UNLABELED, UNLABELED]
        tight = grow_seeds(features, _row_seeds(seeds), RegionGrowConfig(0.6, 8))
        # after absorbing 0.5 the region mean is 0.25, putting 1.0 out of reach
        assert tight.labels.tolist() == [[0, 0, BACKGROUND]]
        loose = grow_seeds(features, _row_seeds(seeds), RegionGrowConfig(0.8, 8))
        assert loose.labels.tolist() == [[0, 0, 0]]

    def test_leftover_pixels_become_background(self):
        features = _row_features([0.0, 9.0])
        got = grow_seeds(features, _row_seeds([0, UNLABELED]), RegionGrowConfig(0.5, 8))
        assert got.labels.tolist() == [[0, BACKGROUND]]

    def test_no_object_seeds_gives_all_background(self):
        features = np.zeros((2, 2, 1))
        got = grow_seeds(features, SeedMask(np.full((2, 2), UNLABELED, dtype=np.int32)))
        assert (got.labels == BACKGROUND).all()

    def test_deterministic(self):
        rng = np.random.default_rng(61)
        features = rng.standard_normal((8, 8, 3))
        labels = np.full((8, 8), UNLABELED, dtype=np.int32)
        labels[2, 2] = 0
        labels[5, 6] = 1
        labels[0, 7] = BACKGROUND
        config = RegionGrowConfig(1.5, 32)
        a = grow_seeds(features, SeedMask(labels.copy()), config)
        b = grow_seeds(features, SeedMask(labels.copy()), config)
        assert np.array_equal(a.labels, b.labels)

    def test_input_seed_mask_not_mutated(self):
        features = _row_features([0.0, 0.0])
        seeds = _row_seeds([0, UNLABELED])
        before = seeds.labels.copy()
        grow_seeds(features, seeds, RegionGrowConfig(1.0, 4))
        assert np.array_equal(seeds.labels, before)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            grow_seeds(np.zeros((3, 3, 1)), _row_seeds([0, UNLABELED]))

    def test_non_3d_features_rejected(self):
        with pytest.raises(ValueError):
            grow_seeds(np.zeros((3, 3)), SeedMask(np.full((3, 3), UNLABELED, dtype=np.int32)))


class TestSsgBox:
    def test_box_of_largest_grown_component(self):
        features = np.zeros((6, 6, 1))
        features[1:5, 1:4] = 1.0
        labels = np.full((6, 6), UNLABELED, dtype=np.int32)
        labels[2, 2] = 0
        mask = grow_seeds(features, SeedMask(labels), RegionGrowConfig(0.5, 16))
        assert ssg_box(mask, 0) == BoundingBox(1, 1, 4, 5)

    def test_absent_category_gives_none(self):
        mask = grow_seeds(np.zeros((3, 3, 1)), SeedMask(np.full((3, 3), UNLABELED, dtype=np.int32)))
        assert ssg_box(mask, 2) is None


class TestRegionGrowSegmenter:
    def test_segment_matches_grow_seeds(self):
        rng = np.random.default_rng(67)
        features = rng.standard_normal((6, 6, 2))
        labels = np.full((6, 6), UNLABELED, dtype=np.int32)
        labels[1, 1] = 0
        labels[4, 4] = BACKGROUND
        config = RegionGrowConfig(1.0, 16)
        direct = grow_seeds(features, SeedMask(labels.copy()), config)
        via = RegionGrowSegmenter(config).segment(features, SeedMask(labels.copy()))
        assert np.array_equal(direct.labels, via.labels)

    def test_default_config(self):
        seg = RegionGrowSegmenter()
        assert seg.config.similarity_tolerance == 0.6
        assert seg.config.max_iterations == 64
