"""Two-branch multiple-instance detector over RoI-pooled features.

Each RoI is max-pooled to a fixed grid and scored by two linear heads:
a classification branch producing a per-RoI, per-category probability
through a sigmoid, and a selection branch whose logits are softmaxed
across the RoIs of one image so the weights sum to one per category.
The image-level score for a category is the selection-weighted sum of
RoI probabilities. Training is full-batch gradient descent on a
multi-label cross entropy over image labels; analytic gradients for
both branches are exposed for saliency extraction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from micl.geometry import BoundingBox

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    category: int
    score: float


@dataclass
class PooledRois:
    """RoI-pooled features for one image, plus max-pool provenance.

    pooled is (N, P, P, K); flat is the same data as (N, P*P*K);
    argmax_y/argmax_x record, per pooled cell and channel, the image
    coordinates of the cell that won the max, which lets gradients be
    routed back onto the image grid.
    """

    boxes: tuple[BoundingBox, ...]
    pooled: np.ndarray
    argmax_y: np.ndarray
    argmax_x: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        n = self.pooled.shape[0]
        return self.pooled.reshape(n, -1)


def _cell_edges(extent: int, pool_size: int) -> list[tuple[int, int]]:
    # Empty cells (extent < pool_size) collapse onto the nearest valid row/col.
    edges = []
    for i in range(pool_size):
        lo = (i * extent) // pool_size
        hi = ((i + 1) * extent) // pool_size
        if hi <= lo:
            lo = min(lo, extent - 1)
            hi = lo + 1
        edges.append((lo, hi))
    return edges


def roi_pool(
    image_features: np.ndarray, box: BoundingBox, pool_size: int
) -> np.ndarray:
    """Max-pool the features under one box to a (P, P, K) grid."""
    pooled, _, _ = _roi_pool_with_argmax(image_features, box, pool_size)
    return pooled


def _roi_pool_with_argmax(
    image_features: np.ndarray, box: BoundingBox, pool_size: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    features = np.asarray(image_features, dtype=np.float64)
    if features.ndim != 3:
        raise ValueError("image features must be (H, W, K)")
    height, width, channels = features.shape
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    if not box.within(width, height):
        raise ValueError(f"box {box} outside {width}x{height} image")
    sub = features[box.y_min : box.y_max, box.x_min : box.x_max]
    h, w = sub.shape[:2]
    pooled = np.empty((pool_size, pool_size, channels))
    arg_y = np.empty((pool_size, pool_size, channels), dtype=np.intp)
    arg_x = np.empty((pool_size, pool_size, channels), dtype=np.intp)
    y_edges = _cell_edges(h, pool_size)
    x_edges = _cell_edges(w, pool_size)
    for i, (y0, y1) in enumerate(y_edges):
        for j, (x0, x1) in enumerate(x_edges):
            cell = sub[y0:y1, x0:x1].reshape(-1, channels)
            win = cell.argmax(axis=0)  # first max in row-major order
            pooled[i, j] = cell[win, np.arange(channels)]
            cw = x1 - x0
            arg_y[i, j] = box.y_min + y0 + win // cw
            arg_x[i, j] = box.x_min + x0 + win % cw
    return pooled, arg_y, arg_x


def pool_rois(
    image_features: np.ndarray, boxes: Sequence[BoundingBox], pool_size: int
) -> PooledRois:
    """Pool every proposal of one image; the result is cached by callers."""
    if not boxes:
        raise ValueError("at least one RoI is required")
    pooled = []
    ays = []
    axs = []
    for box in boxes:
        p, ay, ax = _roi_pool_with_argmax(image_features, box, pool_size)
        pooled.append(p)
        ays.append(ay)
        axs.append(ax)
    return PooledRois(
        boxes=tuple(boxes),
        pooled=np.stack(pooled),
        argmax_y=np.stack(ays),
        argmax_x=np.stack(axs),
    )


@dataclass
class MscModel:
    """Weights of both branches, stored flat over the pooled grid."""

    pool_size: int
    n_channels: int
    n_categories: int
    cls_w: np.ndarray  # (C, P*P*K)
    cls_b: np.ndarray  # (C,)
    sal_w: np.ndarray  # (C, P*P*K)

    def __post_init__(self) -> None:
        d = self.pool_size * self.pool_size * self.n_channels
        self.cls_w = np.ascontiguousarray(self.cls_w, dtype=np.float64)
        self.cls_b = np.ascontiguousarray(self.cls_b, dtype=np.float64)
        self.sal_w = np.ascontiguousarray(self.sal_w, dtype=np.float64)
        if self.cls_w.shape != (self.n_categories, d):
            raise ValueError(f"cls_w must be ({self.n_categories}, {d})")
        if self.cls_b.shape != (self.n_categories,):
            raise ValueError(f"cls_b must be ({self.n_categories},)")
        if self.sal_w.shape != (self.n_categories, d):
            raise ValueError(f"sal_w must be ({self.n_categories}, {d})")

    def to_json(self) -> str:
        payload = {
            "pool_size": self.pool_size,
            "n_channels": self.n_channels,
            "n_categories": self.n_categories,
            "cls_w": self.cls_w.tolist(),
            "cls_b": self.cls_b.tolist(),
            "sal_w": self.sal_w.tolist(),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MscModel":
        payload = json.loads(text)
        try:
            return cls(
                pool_size=int(payload["pool_size"]),
                n_channels=int(payload["n_channels"]),
                n_categories=int(payload["n_categories"]),
                cls_w=np.array(payload["cls_w"], dtype=np.float64),
                cls_b=np.array(payload["cls_b"], dtype=np.float64),
                sal_w=np.array(payload["sal_w"], dtype=np.float64),
            )
        except KeyError as exc:
            raise ValueError(f"model JSON missing field {exc}") from exc


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def branch_scores(model: MscModel, flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-RoI probabilities p and selection weights h, both (N, C).

    h is a softmax over the image's RoIs for each category, so each
    column sums to one. Adding a constant to all selection logits of a
    category leaves h unchanged.
    """
    flat = np.asarray(flat, dtype=np.float64)
    if flat.ndim != 2 or flat.shape[0] == 0:
        raise ValueError("flat pooled features must be (N, D) with N >= 1")
    p = _sigmoid(flat @ model.cls_w.T + model.cls_b)
    s = flat @ model.sal_w.T
    s = s - s.max(axis=0, keepdims=True)
    e = np.exp(s)
    h = e / e.sum(axis=0, keepdims=True)
    return p, h


def image_scores(model: MscModel, flat: np.ndarray) -> np.ndarray:
    """Image-level category scores: selection-weighted RoI probabilities."""
    p, h = branch_scores(model, flat)
    return (h * p).sum(axis=0)


def image_score(model: MscModel, flat: np.ndarray, category: int) -> float:
    return float(image_scores(model, flat)[category])


def top_detection(
    model: MscModel, rois: PooledRois, category: int
) -> Detection:
    """The RoI with the highest combined score for one category.

    Ties go to the lowest RoI index.
    """
    p, h = branch_scores(model, rois.flat)
    combined = h[:, category] * p[:, category]
    idx = int(np.argmax(combined))
    return Detection(box=rois.boxes[idx], category=category, score=float(combined[idx]))


def multilabel_ce_loss(scores: np.ndarray, positives: Iterable[int]) -> float:
    """Mean binary cross entropy over categories against a label set."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.zeros(scores.shape[0])
    for c in positives:
        if not 0 <= c < scores.shape[0]:
            raise ValueError(f"label {c} out of range")
        y[c] = 1.0
    s = np.clip(scores, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-(y * np.log(s) + (1.0 - y) * np.log(1.0 - s)).mean())


def _init_model(
    pool_size: int, n_channels: int, n_categories: int, rng_seed: int, *, zero_sal: bool
) -> MscModel:
    d = pool_size * pool_size * n_channels
    rng = np.random.default_rng(rng_seed)
    cls_w = 0.01 * rng.standard_normal((n_categories, d))
    sal_w = (
        np.zeros((n_categories, d))
        if zero_sal
        else 0.01 * rng.standard_normal((n_categories, d))
    )
    return MscModel(
        pool_size=pool_size,
        n_channels=n_channels,
        n_categories=n_categories,
        cls_w=cls_w,
        cls_b=np.zeros(n_categories),
        sal_w=sal_w,
    )


def _image_label_grads(
    model: MscModel, flat: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss and gradients of the image-label CE for one image."""
    p, h = branch_scores(model, flat)
    scores = (h * p).sum(axis=0)  # (C,)
    clamped = np.clip(scores, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(-(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped)).mean())
    dL_ds = (clamped - y) / (clamped * (1.0 - clamped)) / y.shape[0]  # (C,)
    # d score / d cls logit_r = h_r p_r (1 - p_r); d score / d sal logit_r = h_r (p_r - score)
    a = dL_ds[None, :] * h * p * (1.0 - p)  # (N, C)
    b = dL_ds[None, :] * h * (p - scores[None, :])  # (N, C)
    g_cls_w = a.T @ flat
    g_cls_b = a.sum(axis=0)
    g_sal_w = b.T @ flat
    return loss, g_cls_w, g_cls_b, g_sal_w


def train_msc(
    flats: Sequence[np.ndarray],
    label_sets: Sequence[Iterable[int]],
    pool_size: int,
    n_channels: int,
    n_categories: int,
    *,
    epochs: int = 60,
    lr: float = 0.1,
    rng_seed: int = 0,
) -> MscModel:
    """Train both branches on image-level labels by full-batch descent.

    flats[i] is the (N_i, D) pooled-feature matrix of image i and
    label_sets[i] its positive categories. Raises if the loss stops
    being finite.
    """
    if len(flats) != len(label_sets):
        raise ValueError("flats and label_sets must align")
    if not flats:
        raise ValueError("training set is empty")
    model = _init_model(pool_size, n_channels, n_categories, rng_seed, zero_sal=False)
    targets = []
    for labels in label_sets:
        y = np.zeros(n_categories)
        for c in labels:
            if not 0 <= c < n_categories:
                raise ValueError(f"label {c} out of range")
            y[c] = 1.0
        targets.append(y)
    n = len(flats)
    for epoch in range(epochs):
        g_w = np.zeros_like(model.cls_w)
        g_b = np.zeros_like(model.cls_b)
        g_u = np.zeros_like(model.sal_w)
        total = 0.0
        for flat, y in zip(flats, targets):
            loss, gw, gb, gu = _image_label_grads(model, flat, y)
            total += loss
            g_w += gw
            g_b += gb
            g_u += gu
        if not np.isfinite(total):
            raise RuntimeError(f"training diverged at epoch {epoch}: loss={total}")
        model.cls_w -= (lr / n) * g_w
        model.cls_b -= (lr / n) * g_b
        model.sal_w -= (lr / n) * g_u
    return model


def train_on_roi_labels(
    flats: Sequence[np.ndarray],
    targets: Sequence[np.ndarray],
    pool_size: int,
    n_channels: int,
    n_categories: int,
    *,
    epochs: int = 60,
    lr: float = 0.1,
    rng_seed: int = 0,
    weight_decay: float = 0.0,
) -> MscModel:
    """Train the classification branch on per-RoI targets.

    targets[i] is (N_i, C) with entries 1 (positive), 0 (negative), or
    NaN (ignored). The selection branch is zeroed, which makes its
    softmax uniform, so ranking RoIs by the combined score reduces to
    ranking by the classification probability. Training always starts
    from a fresh seeded initialization, so successive re-trainings
    carry no hidden state between rounds.

    weight_decay is essential here, not cosmetic: the targets are
    usually separable, so unpenalized logistic weights grow without
    bound along whatever directions the supervised RoIs never pin
    down, and unseen feature patterns then score arbitrarily. Decay
    (applied to weights, not biases) pulls unconstrained directions
    back to zero while data-supported ones settle at finite values.
    """
    if len(flats) != len(targets):
        raise ValueError("flats and targets must align")
    if not flats:
        raise ValueError("training set is empty")
    model = _init_model(pool_size, n_channels, n_categories, rng_seed, zero_sal=True)
    masks = []
    clean = []
    count = 0
    for t in targets:
        t = np.asarray(t, dtype=np.float64)
        m = ~np.isnan(t)
        masks.append(m)
        clean.append(np.where(m, t, 0.0))
        count += int(m.sum())
    if count == 0:
        raise ValueError("no supervised RoI targets")
    for epoch in range(epochs):
        g_w = np.zeros_like(model.cls_w)
        g_b = np.zeros_like(model.cls_b)
        total = 0.0
        for flat, y, m in zip(flats, clean, masks):
            p = _sigmoid(flat @ model.cls_w.T + model.cls_b)
            pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
            total += float(
                -(m * (y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))).sum()
            )
            d = np.where(m, p - y, 0.0)  # (N, C); BCE-through-sigmoid gradient
            g_w += d.T @ flat
            g_b += d.sum(axis=0)
        if not np.isfinite(total):
            raise RuntimeError(f"training diverged at epoch {epoch}: loss={total}")
        model.cls_w -= lr * (g_w / count + weight_decay * model.cls_w)
        model.cls_b -= (lr / count) * g_b
    return model


def feature_gradients(
    model: MscModel, rois: PooledRois, category: int
) -> np.ndarray:
    """d p(category; r) / d pooled features, shape (N, P, P, K).

    The classification branch is linear in the pooled features, so the
    gradient of each RoI's probability is p (1 - p) times the weight
    vector, independent of the other RoIs.
    """
    flat = rois.flat
    p = _sigmoid(flat @ model.cls_w[category] + model.cls_b[category])  # (N,)
    w = model.cls_w[category].reshape(model.pool_size, model.pool_size, model.n_channels)
    return p[:, None, None, None] * (1.0 - p)[:, None, None, None] * w[None]


def image_feature_gradients(
    model: MscModel,
    rois: PooledRois,
    category: int,
    image_shape: tuple[int, int],
) -> np.ndarray:
    """d image_score(category) / d image features, shape (H, W, K).

    The image score depends on the features through every RoI's pooled
    grid; the gradient through each pooled cell is routed back to the
    image pixel that won the max pool. Cells never selected by any max
    receive zero.
    """
    height, width = image_shape
    flat = rois.flat
    p, h = branch_scores(model, flat)
    score = float((h[:, category] * p[:, category]).sum())
    pc = p[:, category]
    hc = h[:, category]
    # (N, D): gradient of the image score w.r.t. each RoI's pooled vector
    g_flat = (
        (hc * pc * (1.0 - pc))[:, None] * model.cls_w[category][None, :]
        + (hc * (pc - score))[:, None] * model.sal_w[category][None, :]
    )
    k = model.n_channels
    out = np.zeros((height, width, k))
    n = flat.shape[0]
    g = g_flat.reshape(n, model.pool_size, model.pool_size, k)
    ch = np.arange(k)
    for r in range(n):
        np.add.at(out, (rois.argmax_y[r], rois.argmax_x[r], ch[None, None, :]), g[r])
    return out
