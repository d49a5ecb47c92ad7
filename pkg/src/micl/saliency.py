"""Per-category saliency maps from a trained classifier or detector.

Four map sources compose the seeding signal: channel-weighted activation
maps from a linear head (CAM style), gradient-derived background maps,
per-RoI gradient*feature maps, and score-weighted aggregation of RoI
maps into an image-sized plane.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from micl.geometry import BoundingBox


@dataclass
class LinearHead:
    """Per-category weight vectors over feature channels."""

    weights: np.ndarray  # (C, K)
    bias: Optional[np.ndarray] = None  # (C,)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("head weights must be (categories, channels)")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("head weights must be finite")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)


def cam_map(features: np.ndarray, head: LinearHead, category: int) -> np.ndarray:
    """Raw channel-weighted activation map for one category.

    features is (H, W, K); the result is the unnormalized (H, W) plane
    sum_k features[y, x, k] * w[category, k].
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ValueError("features must be (H, W, K)")
    if features.shape[2] != head.weights.shape[1]:
        raise ValueError(
            f"channel mismatch: features K={features.shape[2]}, "
            f"head K={head.weights.shape[1]}"
        )
    return features @ head.weights[category]


def grad_background_map(
    grads: Mapping[int, np.ndarray], existing: Iterable[int]
) -> np.ndarray:
    """Background plane from per-category input gradients.

    Each category's |gradient| grid is normalized by its global maximum,
    reduced over channels by max, and the background is one minus the
    max over categories. A category whose gradients are identically zero
    contributes nothing; if every category degenerates the background is
    all ones.
    """
    cats = sorted(set(existing))
    if not cats:
        raise ValueError("existing category set is empty")
    inner: Optional[np.ndarray] = None
    shape: Optional[tuple[int, int]] = None
    for c in cats:
        if c not in grads:
            raise ValueError(f"missing gradient grid for category {c}")
        g = np.abs(np.asarray(grads[c], dtype=np.float64))
        if g.ndim != 3:
            raise ValueError("gradient grids must be (H, W, K)")
        shape = g.shape[:2]
        z = g.max()
        if z == 0.0:
            continue  # normalization undefined; category contributes 0
        score = g.max(axis=2) / z
        inner = score if inner is None else np.maximum(inner, score)
    assert shape is not None
    if inner is None:
        return np.ones(shape)
    return 1.0 - inner


def roi_saliency(features: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Gradient-weighted activation plane inside one RoI.

    Both inputs are (P, P, K) grids of the pooled features and the
    gradients of the RoI's class score with respect to them; the result
    is their element-wise product summed over channels.
    """
    features = np.asarray(features, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if features.shape != grads.shape:
        raise ValueError(
            f"shape mismatch: features {features.shape} vs grads {grads.shape}"
        )
    return (features * grads).sum(axis=2)


def bilinear_resize(plane: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Resize a 2-D plane with bilinear sampling at cell centers.

    Sampling is align-corners-false: output cell centers map to input
    coordinates (i + 0.5) * in/out - 0.5, clamped at the edges, so a
    constant plane resizes to the same constant.
    """
    plane = np.asarray(plane, dtype=np.float64)
    in_h, in_w = plane.shape
    if out_height < 1 or out_width < 1:
        raise ValueError("output size must be positive")
    ys = np.clip((np.arange(out_height) + 0.5) * (in_h / out_height) - 0.5, 0, in_h - 1)
    xs = np.clip((np.arange(out_width) + 0.5) * (in_w / out_width) - 0.5, 0, in_w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = plane[y0][:, x0] * (1 - wx) + plane[y0][:, x1] * wx
    bot = plane[y1][:, x0] * (1 - wx) + plane[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def aggregate_roi_saliency(
    rois: Sequence[tuple[BoundingBox, np.ndarray, float]],
    image_size: tuple[int, int],
) -> np.ndarray:
    """Score-weighted sum of RoI saliency maps on the image canvas.

    Each (box, plane, score) entry is resized to its box extent,
    zero-padded to the image, scaled by the score, and accumulated.
    Returns the raw (unnormalized) plane; see normalize_saliency.
    """
    height, width = image_size
    out = np.zeros((height, width))
    for box, plane, score in rois:
        if not box.within(width, height):
            raise ValueError(f"RoI box {box} outside {width}x{height} image")
        resized = bilinear_resize(np.asarray(plane, dtype=np.float64), box.height, box.width)
        out[box.y_min : box.y_max, box.x_min : box.x_max] += score * resized
    return out


def normalize_saliency(plane: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero, then min-max normalize into [0, 1].

    An all-zero plane (after clamping) stays all-zero; a nonzero
    constant plane maps to all ones.
    """
    clamped = np.maximum(np.asarray(plane, dtype=np.float64), 0.0)
    lo = clamped.min()
    hi = clamped.max()
    if hi == lo:
        return np.zeros_like(clamped) if hi == 0.0 else np.ones_like(clamped)
    return (clamped - lo) / (hi - lo)
