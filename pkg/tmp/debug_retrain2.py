"""Audit the retrained scorer: where does argmax-p land per record?"""
import sys

sys.path.insert(0, "src")

import numpy as np

from micl.curriculum import (
    MiclConfig,
    _RETRAIN_TAG,
    _TRAIN_TAG,
    build_pooled_cache,
    micl_run,
    roi_training_targets,
)
from micl.detector import branch_scores, train_on_roi_labels
from micl.geometry import iou
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter
from micl.synthdata import GenConfig, generate_dataset

gen = GenConfig(n_images=60, rng_seed=3)
scenes = generate_dataset(gen)
cfg = MiclConfig(max_rounds=0, rng_seed=3)
seg = RegionGrowSegmenter(RegionGrowConfig(similarity_tolerance=cfg.similarity_tolerance,
                                           max_iterations=cfg.grow_max_iterations))
res = micl_run(scenes, cfg, segmenter=seg)
state = res.state
cache = build_pooled_cache(scenes, cfg.pool_size)

pseudo = {k: r.pseudo_box for k, r in state.records.items()
          if r.selected and not r.forced and r.pseudo_box is not None}
print(f"pseudo set: {len(pseudo)}")
flats, targets = roi_training_targets(scenes, cache, pseudo, 3)
n_pos = sum(int(np.nansum(t == 1.0)) for t in targets)
n_neg = sum(int(np.nansum(t == 0.0)) for t in targets)
print(f"roi targets: pos={n_pos} neg={n_neg}")

model = train_on_roi_labels(flats, targets, cfg.pool_size,
                            int(scenes[0].features.shape[2]), 3,
                            epochs=cfg.retrain_epochs, lr=cfg.retrain_lr,
                            rng_seed=cfg.rng_seed ^ _RETRAIN_TAG ^ 1)

by_img = {s.image_id: s for s in scenes}
shown = 0
for (image_id, c), rec in state.records.items():
    if shown >= 6:
        break
    s = by_img[image_id]
    gt_boxes = [g.box for g in s.gt if g.category == c]
    pooled = cache[image_id]
    p, h = branch_scores(model, pooled.flat)
    score = p[:, c]
    order = np.argsort(-score)[:4]
    tag = "SEL" if rec.selected else "uns"
    print(f"{image_id} cat{c} [{tag}]: " + " | ".join(
        f"{pooled.boxes[i].as_tuple()} p={score[i]:.3f} "
        f"iou={max(iou(pooled.boxes[i], b) for b in gt_boxes):.2f}"
        for i in order))
    shown += 1
