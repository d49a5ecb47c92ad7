"""Seed pixel selection from saliency planes.

Object seeds come from thresholding normalized per-category saliency;
background seeds from an adaptive threshold on the background plane
that is lowered until a minimum fraction of the image qualifies.
"""
from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from micl.geometry import SeedMask
from micl.kernels import BACKGROUND, UNLABELED

OBJECT_THRESHOLD = 0.2
BACKGROUND_THRESHOLD = 0.9
MIN_BACKGROUND_FRACTION = 0.10
BACKGROUND_STEP = 0.05


def threshold_object_seeds(
    planes: Mapping[int, np.ndarray],
    existing: Iterable[int],
    threshold: float = OBJECT_THRESHOLD,
) -> SeedMask:
    """Seed pixels whose normalized saliency reaches the threshold.

    A pixel claimed by several categories goes to the one with the
    highest saliency there; exact ties go to the smaller category id.
    """
    cats = sorted(set(existing))
    if not cats:
        raise ValueError("existing category set is empty")
    shape = None
    for c in cats:
        if c not in planes:
            raise ValueError(f"missing saliency plane for category {c}")
        p = np.asarray(planes[c])
        if shape is None:
            shape = p.shape
        elif p.shape != shape:
            raise ValueError("saliency planes disagree on shape")
    assert shape is not None and len(shape) == 2
    labels = np.full(shape, UNLABELED, dtype=np.int32)
    best = np.full(shape, -np.inf)
    for c in cats:
        plane = np.asarray(planes[c], dtype=np.float64)
        take = (plane >= threshold) & (plane > best)  # strict: ties keep smaller id
        labels[take] = c
        best[take] = plane[take]
    return SeedMask(labels)


def adaptive_background_seeds(
    background: np.ndarray,
    threshold: float = BACKGROUND_THRESHOLD,
    min_fraction: float = MIN_BACKGROUND_FRACTION,
    step: float = BACKGROUND_STEP,
) -> SeedMask:
    """Background seeds with a coverage-driven threshold walk.

    Starts at the given threshold and lowers it in fixed steps until the
    qualifying pixels cover at least min_fraction of the image. If the
    threshold reaches zero every pixel qualifies.
    """
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2:
        raise ValueError("background plane must be 2-D")
    if not 0.0 < min_fraction <= 1.0:
        raise ValueError("min_fraction must be in (0, 1]")
    if step <= 0.0:
        raise ValueError("step must be positive")
    total = background.size
    k = 0
    while True:
        t = threshold - k * step
        if t <= 0.0:
            selected = np.ones(background.shape, dtype=bool)
            break
        selected = background >= t
        if int(selected.sum()) >= min_fraction * total:
            break
        k += 1
    labels = np.full(background.shape, UNLABELED, dtype=np.int32)
    labels[selected] = BACKGROUND
    return SeedMask(labels)


def pool_seeds(object_seeds: SeedMask, background_seeds: SeedMask) -> SeedMask:
    """Merge object and background seeds into one mask.

    Object labels win wherever both masks claim a pixel.
    """
    if object_seeds.labels.shape != background_seeds.labels.shape:
        raise ValueError("seed masks disagree on shape")
    out = object_seeds.labels.copy()
    take_bg = (out == UNLABELED) & (background_seeds.labels == BACKGROUND)
    out[take_bg] = BACKGROUND
    return SeedMask(out)
