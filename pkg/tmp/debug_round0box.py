"""Inspect round-0 winners for strict-easy records (no trapped object of that cat)."""
import sys

sys.path.insert(0, "src")

import numpy as np

from micl.curriculum import MiclConfig, _TRAIN_TAG, build_pooled_cache
from micl.detector import branch_scores, train_msc
from micl.geometry import iou
from micl.synthdata import GenConfig, generate_dataset

gen = GenConfig(n_images=60, rng_seed=3)
scenes = generate_dataset(gen)
cfg = MiclConfig(rng_seed=3)
cache = build_pooled_cache(scenes, cfg.pool_size)
model = train_msc(
    [cache[s.image_id].flat for s in scenes],
    [s.labels for s in scenes],
    cfg.pool_size,
    int(scenes[0].features.shape[2]),
    3,
    epochs=cfg.epochs,
    lr=cfg.lr,
    rng_seed=cfg.rng_seed ^ _TRAIN_TAG,
)


def trapped(scene, box):
    cells = np.linalg.norm(
        np.asarray(scene.features, float)[box.y_min : box.y_max, box.x_min : box.x_max],
        axis=2,
    )
    return cells.max() / np.median(cells) >= 2.0


shown = 0
for s in scenes:
    if shown >= 6:
        break
    for c in s.labels:
        gt_boxes = [g.box for g in s.gt if g.category == c]
        if any(trapped(s, b) for b in gt_boxes):
            continue  # not strict-easy
        pooled = cache[s.image_id]
        p, h = branch_scores(model, pooled.flat)
        score = h[:, c] * p[:, c]
        order = np.argsort(-score)[:4]
        print(f"{s.image_id} cat{c} (strict-easy): " + " | ".join(
            f"{pooled.boxes[i].as_tuple()} score={score[i]:.4f} "
            f"p={p[i, c]:.3f} h={h[i, c]:.4f} "
            f"iou={max(iou(pooled.boxes[i], b) for b in gt_boxes):.2f}"
            for i in order))
        shown += 1
        if shown >= 6:
            break
