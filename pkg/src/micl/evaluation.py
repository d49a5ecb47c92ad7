"""Localization metrics: CorLoc, average precision, error taxonomy.

CorLoc scores one predicted box per (image, category) pair against any
ground-truth object of that category. Average precision follows the
greedy ranked-matching protocol at IoU 0.5, with either the 11-point
interpolation or the exact area under the precision-recall curve.
Mislocalized predictions are classified as too-large, too-small, or
other, based on how they cover (or are covered by) the best-matching
ground-truth box.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from micl.geometry import BoundingBox, intersection_area, iou

IOU_THRESHOLD = 0.5
COVER_THRESHOLD = 0.9


@dataclass(frozen=True)
class GroundTruthObject:
    image_id: str
    category: int
    box: BoundingBox


@dataclass(frozen=True)
class ScoredBox:
    """One ranked detection for a fixed category."""

    image_id: str
    box: BoundingBox
    score: float


class ErrorType(enum.Enum):
    CORRECT = "correct"
    TOO_LARGE = "too_large"
    TOO_SMALL = "too_small"
    OTHER = "other"


def _gt_index(
    gt: Sequence[GroundTruthObject],
) -> dict[tuple[str, int], list[BoundingBox]]:
    index: dict[tuple[str, int], list[BoundingBox]] = {}
    for obj in gt:
        index.setdefault((obj.image_id, obj.category), []).append(obj.box)
    return index


def corloc(
    predictions: Mapping[tuple[str, int], Optional[BoundingBox]],
    gt: Sequence[GroundTruthObject],
) -> float:
    """Percent of (image, category) pairs whose box hits a ground truth.

    A prediction hits when its IoU with some ground-truth box of the
    same category in the same image reaches 0.5. A None prediction is a
    miss. Predicting a pair absent from the ground truth is an error.
    """
    index = _gt_index(gt)
    if not predictions:
        raise ValueError("no predictions to score")
    hits = 0
    for key in predictions:
        if key not in index:
            raise ValueError(f"prediction for {key} has no ground-truth objects")
    for key, box in predictions.items():
        if box is None:
            continue
        if any(iou(box, g) >= IOU_THRESHOLD for g in index[key]):
            hits += 1
    return 100.0 * hits / len(predictions)


def _pr_curve(
    detections: Sequence[ScoredBox],
    gt_boxes: dict[str, list[BoundingBox]],
    n_gt: int,
) -> tuple[np.ndarray, np.ndarray]:
    order = sorted(
        range(len(detections)),
        key=lambda i: (-detections[i].score, detections[i].image_id, i),
    )
    matched: dict[str, list[bool]] = {k: [False] * len(v) for k, v in gt_boxes.items()}
    tp = np.zeros(len(order))
    for rank, i in enumerate(order):
        det = detections[i]
        boxes = gt_boxes.get(det.image_id, [])
        best_j = -1
        best_iou = 0.0
        for j, g in enumerate(boxes):
            v = iou(det.box, g)
            if v >= IOU_THRESHOLD and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0 and not matched[det.image_id][best_j]:
            matched[det.image_id][best_j] = True
            tp[rank] = 1.0
    cum_tp = np.cumsum(tp)
    precision = cum_tp / (np.arange(len(order)) + 1.0)
    recall = cum_tp / n_gt
    return precision, recall


def average_precision(
    detections: Sequence[ScoredBox],
    gt: Sequence[GroundTruthObject],
    category: int,
    variant: str = "voc07",
) -> float:
    """AP for one category under greedy IoU-0.5 matching.

    Detections are ranked by score (ties broken by image id, then input
    order); each ground-truth box matches at most one detection. With
    no ground truth for the category the value is undefined and NaN is
    returned. variant selects 11-point interpolation ("voc07") or the
    exact area under the curve ("area").
    """
    if variant not in ("voc07", "area"):
        raise ValueError(f"unknown AP variant {variant!r}")
    gt_boxes: dict[str, list[BoundingBox]] = {}
    for obj in gt:
        if obj.category == category:
            gt_boxes.setdefault(obj.image_id, []).append(obj.box)
    n_gt = sum(len(v) for v in gt_boxes.values())
    if n_gt == 0:
        return math.nan
    if not detections:
        return 0.0
    precision, recall = _pr_curve(detections, gt_boxes, n_gt)
    if variant == "voc07":
        total = 0.0
        for t in np.linspace(0.0, 1.0, 11):
            mask = recall >= t
            total += float(precision[mask].max()) if mask.any() else 0.0
        return total / 11.0
    # exact area: monotone precision envelope, summed over recall steps
    r = np.concatenate(([0.0], recall, [1.0]))
    p = np.concatenate(([0.0], precision, [0.0]))
    for i in range(p.size - 2, -1, -1):
        p[i] = max(p[i], p[i + 1])
    steps = np.nonzero(r[1:] != r[:-1])[0]
    return float(((r[steps + 1] - r[steps]) * p[steps + 1]).sum())


def mean_average_precision(aps: Sequence[float]) -> float:
    """Mean of the defined (non-NaN) per-category APs."""
    defined = [a for a in aps if not math.isnan(a)]
    if not defined:
        return math.nan
    return float(sum(defined) / len(defined))


def classify_error(
    pred: BoundingBox, gt_boxes: Sequence[BoundingBox]
) -> ErrorType:
    """Failure mode of one predicted box against same-category truth.

    CORRECT when IoU reaches 0.5 with some box. Otherwise the box with
    the highest IoU (ties to the earliest) is the reference: a
    prediction covering at least 90 percent of it while being larger is
    TOO_LARGE; a prediction at least 90 percent inside it while being
    smaller is TOO_SMALL; anything else is OTHER.
    """
    if not gt_boxes:
        return ErrorType.OTHER
    best = 0
    best_iou = -1.0
    for j, g in enumerate(gt_boxes):
        v = iou(pred, g)
        if v > best_iou:
            best_iou = v
            best = j
    if best_iou >= IOU_THRESHOLD:
        return ErrorType.CORRECT
    g = gt_boxes[best]
    inter = intersection_area(pred, g)
    if inter / g.area() >= COVER_THRESHOLD and pred.area() > g.area():
        return ErrorType.TOO_LARGE
    if inter / pred.area() >= COVER_THRESHOLD and pred.area() < g.area():
        return ErrorType.TOO_SMALL
    return ErrorType.OTHER


def error_histogram(
    predictions: Mapping[tuple[str, int], Optional[BoundingBox]],
    gt: Sequence[GroundTruthObject],
) -> dict[ErrorType, int]:
    """Counts of each error type over per-pair predictions.

    None predictions count as OTHER (nothing was localized).
    """
    index = _gt_index(gt)
    counts = {e: 0 for e in ErrorType}
    for (image_id, category), box in predictions.items():
        if box is None:
            counts[ErrorType.OTHER] += 1
            continue
        counts[classify_error(box, index.get((image_id, category), []))] += 1
    return counts
