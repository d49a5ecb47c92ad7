"""Seeded region growing over feature grids.

Seeds expand into unlabeled 4-neighbors whose feature vector lies
within a Euclidean tolerance of the owning region's current mean.
All adoptions within one iteration are decided against a snapshot of
the labels and the means, so the result does not depend on pixel
visit order. Leftover unlabeled pixels become background.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from micl import kernels
from micl.geometry import BoundingBox, LabeledMask, SeedMask, largest_component_box


@dataclass
class RegionGrowConfig:
    similarity_tolerance: float = 0.6
    max_iterations: int = 64

    def __post_init__(self) -> None:
        if self.similarity_tolerance < 0.0:
            raise ValueError("similarity_tolerance must be >= 0")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


class SegmenterBackend(Protocol):
    """Anything that turns (features, seeds) into a labeled mask."""

    def segment(self, features: np.ndarray, seeds: SeedMask) -> LabeledMask: ...


def grow_seeds(
    features: np.ndarray, seeds: SeedMask, config: Optional[RegionGrowConfig] = None
) -> LabeledMask:
    """Grow seed regions until no pixel is adopted or the iteration cap hits.

    Region means are recomputed from scratch each iteration, so growth
    adapts to what has been absorbed so far. Background seeds do not
    grow; they only deny pixels to object regions.
    """
    if config is None:
        config = RegionGrowConfig()
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ValueError("features must be (H, W, K)")
    if seeds.labels.shape != features.shape[:2]:
        raise ValueError(
            f"seed mask {seeds.labels.shape} does not match feature grid "
            f"{features.shape[:2]}"
        )
    labels = seeds.labels.copy()
    cats = np.unique(labels)
    cats = np.ascontiguousarray(cats[cats >= 0], dtype=np.int32)
    tau_sq = config.similarity_tolerance * config.similarity_tolerance
    if cats.size:
        flat = features.reshape(-1, features.shape[2])
        for _ in range(config.max_iterations):
            means = np.stack(
                [flat[labels.reshape(-1) == c].mean(axis=0) for c in cats]
            )
            means = np.ascontiguousarray(means)
            if kernels.grow_step(features, labels, cats, means, tau_sq) == 0:
                break
    labels[labels == kernels.UNLABELED] = kernels.BACKGROUND
    return LabeledMask(labels)


def ssg_box(mask: LabeledMask, category: int) -> Optional[BoundingBox]:
    """Tight box around the largest grown component of one category."""
    return largest_component_box(mask, category)


@dataclass
class RegionGrowSegmenter:
    """Default segmentation backend: seeded region growing."""

    config: RegionGrowConfig = field(default_factory=RegionGrowConfig)

    def segment(self, features: np.ndarray, seeds: SeedMask) -> LabeledMask:
        return grow_seeds(features, seeds, self.config)
