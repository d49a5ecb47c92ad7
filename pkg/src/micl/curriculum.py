"""Consistency-gated curriculum over alternating localization and training.

Round zero trains the two-branch detector on image labels alone, then
localizes every (image, category) example twice: the detector's best
box and the box grown by the segmenter from that detector's saliency.
An example's consistency is the IoU of the two boxes; examples at or
above the threshold are selected, and their pseudo box is the fusion
(coordinate-wise mean) of the pair, frozen at selection time. Each
later round retrains the classification branch on the selected pseudo
boxes, re-localizes the detector route, and selects again; the
segmentation route stays pinned to its round-zero boxes so the two
routes remain independent witnesses. Selection never revokes: once
in, always in. When the round budget runs out every remaining example
is force-included with the detector box as its pseudo label.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from micl import seeding
from micl.detector import (
    MscModel,
    PooledRois,
    branch_scores,
    feature_gradients,
    image_feature_gradients,
    pool_rois,
    train_msc,
    train_on_roi_labels,
)
from micl.evaluation import GroundTruthObject, corloc
from micl.geometry import BoundingBox, fuse_boxes, iou
from micl.saliency import aggregate_roi_saliency, grad_background_map, normalize_saliency
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter, SegmenterBackend, ssg_box
from micl.synthdata import SyntheticScene

_TRAIN_TAG = 0x4D534331
_RETRAIN_TAG = 0x52545231
_RANDOM_TAG = 0x4D494C31

POSITIVE_IOU = 0.5
NEGATIVE_IOU = 0.3
NEGATIVE_IOU_LO = 0.1


@dataclass
class MiclConfig:
    pool_size: int = 8
    threshold_t: float = 0.5
    max_rounds: int = 5
    t_obj: float = 0.2
    t_bg: float = 0.9
    min_bg_fraction: float = 0.10
    similarity_tolerance: float = 0.6
    grow_max_iterations: int = 64
    epochs: int = 150
    retrain_epochs: int = 400
    lr: float = 0.3
    retrain_lr: float = 1.0
    retrain_weight_decay: float = 0.01
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold_t <= 1.0:
            raise ValueError("threshold_t must be in [0, 1]")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.retrain_weight_decay < 0.0:
            raise ValueError("retrain_weight_decay must be >= 0")


@dataclass
class ExampleRecord:
    """Curriculum bookkeeping for one (image, category) example."""

    image_id: str
    category: int
    b_det: Optional[BoundingBox] = None
    b_ssg: Optional[BoundingBox] = None
    consistency: Optional[float] = None
    selected: bool = False
    forced: bool = False
    pseudo_box: Optional[BoundingBox] = None
    selection_round: Optional[int] = None
    s_at_selection: Optional[float] = None


@dataclass(frozen=True)
class RoundMetrics:
    round_index: int
    n_selected: int
    corloc_selected: float
    corloc_all: float
    mean_s: float
    corloc_ssg_all: float  # informational; not part of the CSV contract


@dataclass
class CurriculumState:
    threshold: float
    max_rounds: int
    round_index: int = 0
    records: dict[tuple[str, int], ExampleRecord] = field(default_factory=dict)
    metrics: list[RoundMetrics] = field(default_factory=list)

    def sorted_keys(self) -> list[tuple[str, int]]:
        return sorted(self.records.keys())


@dataclass
class MiclResult:
    model: MscModel
    state: CurriculumState
    warnings: list[str]
    round_models: dict[int, MscModel] = field(default_factory=dict)


def consistency(record: ExampleRecord) -> Optional[float]:
    """IoU of the detector and segmenter boxes, when both exist."""
    if record.b_det is None or record.b_ssg is None:
        return None
    return iou(record.b_det, record.b_ssg)


def _refresh_pseudo(record: ExampleRecord) -> None:
    if record.b_det is not None and record.b_ssg is not None:
        record.pseudo_box = fuse_boxes(record.b_det, record.b_ssg)
    elif record.b_det is not None:
        record.pseudo_box = record.b_det
    elif record.b_ssg is not None:
        record.pseudo_box = record.b_ssg
    # both missing: keep whatever pseudo box the record already had


def select_easy(
    state: CurriculumState,
    *,
    quota_rng: Optional[np.random.Generator] = None,
) -> int:
    """Select newly consistent examples and refresh all pseudo boxes.

    Membership only ever grows, but the pseudo boxes of previously
    selected examples are rebuilt from the current localization boxes,
    so earlier selections benefit from later, better models. With
    quota_rng set, the consistency rule only sizes the selection: that
    many examples are drawn at random from the unselected ones with a
    defined consistency (the matched random-curriculum control).
    Returns the number of newly selected examples.
    """
    keys = state.sorted_keys()
    eligible = [
        k
        for k in keys
        if not state.records[k].selected and state.records[k].consistency is not None
    ]
    passing = [
        k for k in eligible if state.records[k].consistency >= state.threshold
    ]
    if quota_rng is None:
        chosen = passing
    else:
        quota = min(len(passing), len(eligible))
        idx = quota_rng.choice(len(eligible), size=quota, replace=False)
        chosen = [eligible[i] for i in sorted(idx)]
    for k in chosen:
        rec = state.records[k]
        rec.selected = True
        rec.selection_round = state.round_index
        rec.s_at_selection = rec.consistency
    for k in keys:
        rec = state.records[k]
        if rec.selected and not rec.forced:
            _refresh_pseudo(rec)
    return len(chosen)


def _relocalize_image(
    model: MscModel,
    scene: SyntheticScene,
    pooled: PooledRois,
    config: MiclConfig,
    segmenter: SegmenterBackend,
) -> dict[int, tuple[Optional[BoundingBox], Optional[BoundingBox]]]:
    height, width = scene.features.shape[:2]
    p, h = branch_scores(model, pooled.flat)
    det: dict[int, Optional[BoundingBox]] = {}
    planes: dict[int, np.ndarray] = {}
    grads: dict[int, np.ndarray] = {}
    for c in scene.labels:
        combined = h[:, c] * p[:, c]
        det[c] = pooled.boxes[int(np.argmax(combined))]
        roi_grads = feature_gradients(model, pooled, c)
        roi_planes = (roi_grads * pooled.pooled).sum(axis=3)
        raw = aggregate_roi_saliency(
            [
                (box, roi_planes[r], float(p[r, c]))
                for r, box in enumerate(pooled.boxes)
            ],
            (height, width),
        )
        planes[c] = normalize_saliency(raw)
        grads[c] = image_feature_gradients(model, pooled, c, (height, width))
    background = grad_background_map(grads, scene.labels)
    seeds = seeding.pool_seeds(
        seeding.threshold_object_seeds(planes, scene.labels, config.t_obj),
        seeding.adaptive_background_seeds(
            background, config.t_bg, config.min_bg_fraction
        ),
    )
    mask = segmenter.segment(np.asarray(scene.features, dtype=np.float64), seeds)
    return {c: (det[c], ssg_box(mask, c)) for c in scene.labels}


def _detect_image(
    model: MscModel, scene: SyntheticScene, pooled: PooledRois
) -> dict[int, Optional[BoundingBox]]:
    p, h = branch_scores(model, pooled.flat)
    return {
        c: pooled.boxes[int(np.argmax(h[:, c] * p[:, c]))] for c in scene.labels
    }


def relocalize(
    state: CurriculumState,
    model: MscModel,
    scenes: Sequence[SyntheticScene],
    pooled_cache: dict[str, PooledRois],
    config: MiclConfig,
    segmenter: SegmenterBackend,
    warnings: list[str],
    *,
    update_ssg: bool = True,
) -> None:
    """Recompute localization boxes for every example.

    The detector box always tracks the given model. The segmentation
    box is recomputed only when update_ssg is set: it belongs to the
    independent saliency-seeded route, which is driven by the
    image-label model once and then held fixed, so the two routes stay
    decoupled and their agreement remains meaningful. A per-image
    failure records empty boxes for that image's examples instead of
    aborting the round.
    """

    def work(scene: SyntheticScene):
        try:
            pooled = pooled_cache[scene.image_id]
            if update_ssg:
                return scene.image_id, _relocalize_image(
                    model, scene, pooled, config, segmenter
                )
            det = _detect_image(model, scene, pooled)
            return scene.image_id, {c: (det[c], "keep") for c in scene.labels}
        except Exception as exc:  # noqa: BLE001 - isolate per-image failures
            return scene.image_id, exc

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, scenes))
    else:
        results = [work(s) for s in scenes]
    for (image_id, outcome), scene in zip(results, scenes):
        if isinstance(outcome, Exception):
            warnings.append(f"relocalization failed on {image_id}: {outcome!r}")
            outcome = {c: (None, None) for c in scene.labels}
        for c, (b_det, b_ssg) in outcome.items():
            rec = state.records[(image_id, c)]
            rec.b_det = b_det
            if b_ssg != "keep":
                rec.b_ssg = b_ssg
            rec.consistency = consistency(rec)


def _record_metrics(
    state: CurriculumState, gt: Sequence[GroundTruthObject]
) -> RoundMetrics:
    keys = state.sorted_keys()
    det_preds = {k: state.records[k].b_det for k in keys}
    ssg_preds = {k: state.records[k].b_ssg for k in keys}
    selected = {
        k: state.records[k].pseudo_box for k in keys if state.records[k].selected
    }
    s_values = [
        state.records[k].consistency
        for k in keys
        if state.records[k].consistency is not None
    ]
    row = RoundMetrics(
        round_index=state.round_index,
        n_selected=len(selected),
        corloc_selected=corloc(selected, gt) if selected else 0.0,
        corloc_all=corloc(det_preds, gt),
        mean_s=float(np.mean(s_values)) if s_values else float("nan"),
        corloc_ssg_all=corloc(ssg_preds, gt),
    )
    state.metrics.append(row)
    return row


def build_pooled_cache(
    scenes: Sequence[SyntheticScene], pool_size: int
) -> dict[str, PooledRois]:
    """Pool every image's proposals once; reused across all rounds."""
    return {
        s.image_id: pool_rois(
            np.asarray(s.features, dtype=np.float64), list(s.proposals), pool_size
        )
        for s in scenes
    }


def roi_training_targets(
    scenes: Sequence[SyntheticScene],
    pooled_cache: dict[str, PooledRois],
    boxes: dict[tuple[str, int], BoundingBox],
    n_categories: int,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-RoI supervision from pseudo boxes.

    Images contributing at least one pseudo box are included. A RoI is
    positive for a category when its IoU with the pseudo box reaches
    0.5 and negative inside the background band [0.1, 0.3); everything
    else near the pseudo box is ignored. The band floor matters when an
    image holds several instances of one category: the single pseudo box
    marks one of them, and boxes far from it (IoU below the floor) may
    sit on a sibling instance, so labeling them negative would teach the
    scorer to reject its own category. Categories absent from the image
    label set are negative everywhere; present but unlabeled categories
    are ignored.
    """
    flats = []
    targets = []
    for scene in scenes:
        cats = [c for c in scene.labels if (scene.image_id, c) in boxes]
        if not cats:
            continue
        pooled = pooled_cache[scene.image_id]
        n = len(pooled.boxes)
        t = np.full((n, n_categories), np.nan)
        for c in range(n_categories):
            if c not in scene.labels:
                t[:, c] = 0.0
        for c in cats:
            pseudo = boxes[(scene.image_id, c)]
            overlaps = np.array([iou(b, pseudo) for b in pooled.boxes])
            t[(overlaps >= NEGATIVE_IOU_LO) & (overlaps < NEGATIVE_IOU), c] = 0.0
            t[overlaps >= POSITIVE_IOU, c] = 1.0
        flats.append(pooled.flat)
        targets.append(t)
    return flats, targets


def _n_categories(scenes: Sequence[SyntheticScene]) -> int:
    return max(max(s.labels) for s in scenes if s.labels) + 1


def micl_run(
    scenes: Sequence[SyntheticScene],
    config: Optional[MiclConfig] = None,
    *,
    segmenter: Optional[SegmenterBackend] = None,
    random_selection: bool = False,
    keep_round_models: bool = False,
    round_hook: Optional[Callable[[CurriculumState], None]] = None,
) -> MiclResult:
    """Full alternating curriculum; deterministic for a fixed config.

    random_selection swaps the consistency gate for the size-matched
    random control while keeping every other moving part identical.
    """
    if config is None:
        config = MiclConfig()
    if not scenes:
        raise ValueError("dataset is empty")
    if segmenter is None:
        segmenter = RegionGrowSegmenter(
            RegionGrowConfig(
                similarity_tolerance=config.similarity_tolerance,
                max_iterations=config.grow_max_iterations,
            )
        )
    n_categories = _n_categories(scenes)
    n_channels = int(scenes[0].features.shape[2])
    gt = [obj for s in scenes for obj in s.gt]
    state = CurriculumState(threshold=config.threshold_t, max_rounds=config.max_rounds)
    for s in scenes:
        for c in s.labels:
            state.records[(s.image_id, c)] = ExampleRecord(s.image_id, c)
    warnings: list[str] = []
    pooled_cache = build_pooled_cache(scenes, config.pool_size)

    model = train_msc(
        [pooled_cache[s.image_id].flat for s in scenes],
        [s.labels for s in scenes],
        config.pool_size,
        n_channels,
        n_categories,
        epochs=config.epochs,
        lr=config.lr,
        rng_seed=config.rng_seed ^ _TRAIN_TAG,
    )
    result = MiclResult(model=model, state=state, warnings=warnings)
    if keep_round_models:
        result.round_models[0] = model

    def quota_rng(round_index: int) -> Optional[np.random.Generator]:
        if not random_selection:
            return None
        return np.random.default_rng(
            np.random.SeedSequence((config.rng_seed, _RANDOM_TAG, round_index))
        )

    relocalize(state, model, scenes, pooled_cache, config, segmenter, warnings)
    select_easy(state, quota_rng=quota_rng(0))
    _record_metrics(state, gt)
    if round_hook is not None:
        round_hook(state)

    for round_index in range(1, config.max_rounds + 1):
        if all(rec.selected for rec in state.records.values()):
            break
        state.round_index = round_index
        pseudo = {
            k: rec.pseudo_box
            for k, rec in state.records.items()
            if rec.selected and rec.pseudo_box is not None
        }
        if pseudo:
            flats, targets = roi_training_targets(
                scenes, pooled_cache, pseudo, n_categories
            )
            model = train_on_roi_labels(
                flats,
                targets,
                config.pool_size,
                n_channels,
                n_categories,
                epochs=config.retrain_epochs,
                lr=config.retrain_lr,
                rng_seed=config.rng_seed ^ _RETRAIN_TAG ^ round_index,
                weight_decay=config.retrain_weight_decay,
            )
        result.model = model
        if keep_round_models:
            result.round_models[round_index] = model
        relocalize(
            state, model, scenes, pooled_cache, config, segmenter, warnings,
            update_ssg=False,
        )
        select_easy(state, quota_rng=quota_rng(round_index))
        _record_metrics(state, gt)
        if round_hook is not None:
            round_hook(state)

    for k in state.sorted_keys():
        rec = state.records[k]
        if not rec.selected:
            rec.selected = True
            rec.forced = True
            rec.selection_round = state.round_index
            rec.s_at_selection = rec.consistency
            rec.pseudo_box = rec.b_det
    return result


CSV_HEADER = "round,n_selected,corloc_selected,corloc_all,mean_S"


def metrics_to_csv(state: CurriculumState) -> str:
    """Per-round metrics in the fixed five-column layout."""
    lines = [CSV_HEADER]
    for m in state.metrics:
        lines.append(
            f"{m.round_index},{m.n_selected},{m.corloc_selected!r},"
            f"{m.corloc_all!r},{m.mean_s!r}"
        )
    return "\n".join(lines) + "\n"


def _box_json(box: Optional[BoundingBox]):
    return None if box is None else list(box.as_tuple())


def state_to_json(state: CurriculumState) -> str:
    """Canonical snapshot of the curriculum bookkeeping."""
    records = []
    for (image_id, c) in state.sorted_keys():
        rec = state.records[(image_id, c)]
        records.append(
            {
                "image": image_id,
                "c": c,
                "b_det": _box_json(rec.b_det),
                "b_ssg": _box_json(rec.b_ssg),
                "S": rec.consistency,
                "selected": rec.selected,
                "forced": rec.forced,
                "pseudo": _box_json(rec.pseudo_box),
                "selection_round": rec.selection_round,
                "S_at_selection": rec.s_at_selection,
            }
        )
    payload = {
        "round": state.round_index,
        "threshold": state.threshold,
        "max_rounds": state.max_rounds,
        "records": records,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
