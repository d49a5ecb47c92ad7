"""Controlled comparison of pseudo-label strategies.

Four arms share one round-zero detector and differ only in which boxes
supervise retraining: the detector's own best boxes (det one-shot), the
segmenter's grown boxes (ssg one-shot), a size-matched random curriculum
(random), and the consistency-gated curriculum (curriculum). Each arm's
final score is the CorLoc of its last model's best boxes over every
example, so the arms are directly comparable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from micl.curriculum import (
    _RETRAIN_TAG,
    _TRAIN_TAG,
    CurriculumState,
    ExampleRecord,
    MiclConfig,
    RoundMetrics,
    build_pooled_cache,
    micl_run,
    relocalize,
    roi_training_targets,
)
from micl.detector import MscModel, PooledRois, train_msc, train_on_roi_labels
from micl.evaluation import ErrorType, GroundTruthObject, corloc, error_histogram
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter, SegmenterBackend
from micl.synthdata import SyntheticScene

ARMS = ("msc", "ssg", "mil", "micl")


@dataclass
class AblationResult:
    final_corloc: dict[str, float]
    round0_corloc_det: float
    round0_corloc_ssg: float
    round0_corloc_subset: float
    det_error_counts: dict[ErrorType, int]
    ssg_error_counts: dict[ErrorType, int]
    metrics: dict[str, list[RoundMetrics]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _fresh_state(scenes: Sequence[SyntheticScene], config: MiclConfig) -> CurriculumState:
    state = CurriculumState(threshold=config.threshold_t, max_rounds=config.max_rounds)
    for s in scenes:
        for c in s.labels:
            state.records[(s.image_id, c)] = ExampleRecord(s.image_id, c)
    return state


def _round_zero(
    scenes: Sequence[SyntheticScene],
    config: MiclConfig,
    segmenter: SegmenterBackend,
    pooled_cache: dict[str, PooledRois],
    n_channels: int,
    n_categories: int,
    warnings: list[str],
) -> tuple[MscModel, CurriculumState]:
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
    state = _fresh_state(scenes, config)
    relocalize(state, model, scenes, pooled_cache, config, segmenter, warnings)
    return model, state


def _one_shot_arm(
    scenes: Sequence[SyntheticScene],
    state0: CurriculumState,
    source: str,
    config: MiclConfig,
    segmenter: SegmenterBackend,
    pooled_cache: dict[str, PooledRois],
    n_channels: int,
    n_categories: int,
    gt: Sequence[GroundTruthObject],
    warnings: list[str],
) -> float:
    boxes = {}
    for k, rec in state0.records.items():
        b = rec.b_det if source == "det" else rec.b_ssg
        if b is not None:
            boxes[k] = b
    if not boxes:
        return float("nan")
    flats, targets = roi_training_targets(scenes, pooled_cache, boxes, n_categories)
    model = train_on_roi_labels(
        flats,
        targets,
        config.pool_size,
        n_channels,
        n_categories,
        epochs=config.retrain_epochs,
        lr=config.retrain_lr,
        rng_seed=config.rng_seed ^ _RETRAIN_TAG ^ 1,
        weight_decay=config.retrain_weight_decay,
    )
    state = _fresh_state(scenes, config)
    relocalize(
        state, model, scenes, pooled_cache, config, segmenter, warnings,
        update_ssg=False,
    )
    preds = {k: rec.b_det for k, rec in state.records.items()}
    return corloc(preds, gt)


def run_ablation(
    scenes: Sequence[SyntheticScene], config: Optional[MiclConfig] = None
) -> AblationResult:
    """Run all four arms on one dataset under one config."""
    if config is None:
        config = MiclConfig()
    if not scenes:
        raise ValueError("dataset is empty")
    segmenter = RegionGrowSegmenter(
        RegionGrowConfig(
            similarity_tolerance=config.similarity_tolerance,
            max_iterations=config.grow_max_iterations,
        )
    )
    n_categories = max(max(s.labels) for s in scenes if s.labels) + 1
    n_channels = int(scenes[0].features.shape[2])
    gt = [obj for s in scenes for obj in s.gt]
    warnings: list[str] = []
    pooled_cache = build_pooled_cache(scenes, config.pool_size)

    _, state0 = _round_zero(
        scenes, config, segmenter, pooled_cache, n_channels, n_categories, warnings
    )
    det_preds = {k: r.b_det for k, r in state0.records.items()}
    ssg_preds = {k: r.b_ssg for k, r in state0.records.items()}

    final: dict[str, float] = {}
    final["msc"] = _one_shot_arm(
        scenes, state0, "det", config, segmenter, pooled_cache,
        n_channels, n_categories, gt, warnings,
    )
    final["ssg"] = _one_shot_arm(
        scenes, state0, "ssg", config, segmenter, pooled_cache,
        n_channels, n_categories, gt, warnings,
    )
    mil = micl_run(scenes, config, segmenter=segmenter, random_selection=True)
    micl = micl_run(scenes, config, segmenter=segmenter)
    final["mil"] = mil.state.metrics[-1].corloc_all
    final["micl"] = micl.state.metrics[-1].corloc_all
    warnings.extend(mil.warnings)
    warnings.extend(micl.warnings)

    round0 = micl.state.metrics[0]
    return AblationResult(
        final_corloc=final,
        round0_corloc_det=round0.corloc_all,
        round0_corloc_ssg=round0.corloc_ssg_all,
        round0_corloc_subset=round0.corloc_selected,
        det_error_counts=error_histogram(det_preds, gt),
        ssg_error_counts=error_histogram(ssg_preds, gt),
        metrics={"mil": mil.state.metrics, "micl": micl.state.metrics},
        warnings=warnings,
    )


def modal_error(counts: dict[ErrorType, int]) -> Optional[ErrorType]:
    """Most common failure mode among mislocalized examples.

    CORRECT entries are excluded; ties break toward the enum order
    (TOO_LARGE before TOO_SMALL before OTHER). None when nothing
    was mislocalized.
    """
    order = (ErrorType.TOO_LARGE, ErrorType.TOO_SMALL, ErrorType.OTHER)
    best: Optional[ErrorType] = None
    best_count = 0
    for e in order:
        if counts.get(e, 0) > best_count:
            best = e
            best_count = counts.get(e, 0)
    return best


def median_over_seeds(values: Sequence[float]) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))
