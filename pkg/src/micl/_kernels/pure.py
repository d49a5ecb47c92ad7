"""Numpy/scipy fallback implementations of the hot kernels.

Must stay observably identical to micl._kernels._core: same adoption
rule, same tie-breaking, and the same ascending-channel accumulation
order for squared distances.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import ndimage

_UNLABELED = -2  # must match micl.kernels.UNLABELED

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def largest_component(binary: np.ndarray) -> Optional[tuple[int, int, int, int, int]]:
    labeled, n = ndimage.label(binary, structure=_FOUR_CONN)
    if n == 0:
        return None
    sizes = np.bincount(labeled.ravel())
    best_key = None
    best = None
    for i, sl in enumerate(ndimage.find_objects(labeled), start=1):
        ys, xs = sl
        key = (-int(sizes[i]), ys.start, xs.start)
        if best_key is None or key < best_key:
            best_key = key
            best = (int(sizes[i]), ys.start, xs.start, ys.stop, xs.stop)
    return best


def grow_step(
    features: np.ndarray,
    labels: np.ndarray,
    cats: np.ndarray,
    means: np.ndarray,
    tau_sq: float,
) -> int:
    height, width = labels.shape
    unlabeled = labels == _UNLABELED
    if not unlabeled.any():
        return 0

    best_d2 = np.full((height, width), np.inf)
    adopt = np.full((height, width), -1, dtype=np.int32)

    for i in range(len(cats)):
        c = int(cats[i])
        is_c = labels == c
        if not is_c.any():
            continue
        has_neighbor = np.zeros((height, width), dtype=bool)
        has_neighbor[1:, :] |= is_c[:-1, :]
        has_neighbor[:-1, :] |= is_c[1:, :]
        has_neighbor[:, 1:] |= is_c[:, :-1]
        has_neighbor[:, :-1] |= is_c[:, 1:]
        cand = has_neighbor & unlabeled
        if not cand.any():
            continue
        diff = features[cand] - means[i]
        # ascending-channel accumulation, matching the compiled loop exactly
        d2 = np.zeros(diff.shape[0])
        for k in range(diff.shape[1]):
            d2 += diff[:, k] * diff[:, k]
        ok = d2 <= tau_sq
        if not ok.any():
            continue
        rows, cols = np.nonzero(cand)
        rows, cols, d2 = rows[ok], cols[ok], d2[ok]
        better = d2 < best_d2[rows, cols]
        rows, cols = rows[better], cols[better]
        best_d2[rows, cols] = d2[better]
        adopt[rows, cols] = c

    chosen = adopt >= 0
    n = int(chosen.sum())
    if n:
        labels[chosen] = adopt[chosen]
    return n
