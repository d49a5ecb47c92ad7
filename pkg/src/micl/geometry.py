"""Axis-aligned box arithmetic, IoU, and mask-to-box extraction.

Boxes use the half-open convention [x_min, x_max) x [y_min, y_max) in
integer pixel coordinates, so adjacent boxes have IoU exactly 0 and the
area is (x_max - x_min) * (y_max - y_min) with no off-by-one terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from micl import kernels
from micl.kernels import BACKGROUND, UNLABELED  # noqa: F401  (canonical home)


@dataclass(frozen=True)
class BoundingBox:
    """Half-open integer pixel box. Zero-area boxes are rejected."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box: {self!r}")
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"negative coordinates: {self!r}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    def area(self) -> int:
        return self.width * self.height

    def within(self, width: int, height: int) -> bool:
        return self.x_max <= width and self.y_max <= height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass
class LabeledMask:
    """Per-pixel label grid: category id >= 0, BACKGROUND, or UNLABELED."""

    labels: np.ndarray  # (H, W) int32

    def __post_init__(self) -> None:
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 2:
            raise ValueError("mask labels must be a 2-D grid")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @classmethod
    def unlabeled(cls, height: int, width: int) -> "LabeledMask":
        return cls(np.full((height, width), UNLABELED, dtype=np.int32))

    def copy(self) -> "LabeledMask":
        return LabeledMask(self.labels.copy())


# Seeds are labeled masks where UNLABELED marks pixels no plane claimed;
# a BACKGROUND label records that the seed came from the background plane.
SeedMask = LabeledMask


def intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; symmetric, 0 when disjoint."""
    inter = intersection_area(a, b)
    union = a.area() + b.area() - inter
    return inter / union


def _mean_toward(a: int, b: int) -> int:
    # Nearest integer to (a + b) / 2; the half-integer tie goes to the
    # value closer to `a` (the detector coordinate by calling convention).
    q, r = divmod(a + b, 2)
    if r == 0:
        return q
    return q if a <= q else q + 1


def fuse_boxes(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Coordinate-wise mean of two boxes, rounded; ties go toward `a`."""
    return BoundingBox(
        _mean_toward(a.x_min, b.x_min),
        _mean_toward(a.y_min, b.y_min),
        _mean_toward(a.x_max, b.x_max),
        _mean_toward(a.y_max, b.y_max),
    )


def largest_component_box(mask: LabeledMask, category: int) -> Optional[BoundingBox]:
    """Tight box of the largest 4-connected component labeled `category`.

    Returns None when no pixel carries the label. Size ties are broken
    by the lowest (y_min, x_min) of the component's tight box.
    """
    binary = np.ascontiguousarray(mask.labels == category, dtype=np.uint8)
    hit = kernels.largest_component(binary)
    if hit is None:
        return None
    _, y0, x0, y1, x1 = hit
    return BoundingBox(x0, y0, x1, y1)
