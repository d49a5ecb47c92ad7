"""Round-0 ssg quality audit: error taxonomy, easy vs trapped split."""
import collections
import sys

sys.path.insert(0, "src")

import numpy as np

from micl.curriculum import MiclConfig, micl_run
from micl.evaluation import classify_error
from micl.geometry import iou
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter
from micl.synthdata import GenConfig, generate_dataset

gen = GenConfig(n_images=60, rng_seed=3)
scenes = generate_dataset(gen)
cfg = MiclConfig(max_rounds=0, rng_seed=3)
seg = RegionGrowSegmenter(RegionGrowConfig(similarity_tolerance=cfg.similarity_tolerance,
                                           max_iterations=cfg.grow_max_iterations))
res = micl_run(scenes, cfg, segmenter=seg)
by_img = {s.image_id: s for s in scenes}


def trapped_box(scene, box):
    cells = np.linalg.norm(
        np.asarray(scene.features, float)[box.y_min : box.y_max, box.x_min : box.x_max],
        axis=2,
    )
    return cells.max() / np.median(cells) >= 2.0


hist = collections.Counter()
det_hist = collections.Counter()
split = {True: [], False: []}
worst = []
for (image_id, c), rec in res.state.records.items():
    s = by_img[image_id]
    gts = [g for g in s.gt if g.category == c]
    best = max(gts, key=lambda g: iou(rec.b_ssg, g.box) if rec.b_ssg else 0.0)
    any_trapped = any(trapped_box(s, g.box) for g in gts)
    if rec.b_ssg is None:
        hist["NONE"] += 1
        split[any_trapped].append(0.0)
        continue
    err = classify_error(rec.b_ssg, [g.box for g in gts])
    hist[err.name] += 1
    best_iou = max(iou(rec.b_ssg, g.box) for g in gts)
    split[any_trapped].append(best_iou)
    if err.name != "CORRECT":
        worst.append((best_iou, image_id, c, rec.b_ssg.as_tuple(),
                      [g.box.as_tuple() for g in gts], err.name, any_trapped))
    derr = classify_error(rec.b_det, [g.box for g in gts]) if rec.b_det else None
    det_hist[derr.name if derr else "NONE"] += 1

print("ssg error histogram:", dict(hist))
print("det error histogram:", dict(det_hist))
print(f"ssg mean IoU | records w/ trapped obj: {np.mean(split[True]):.3f} "
      f"(n={len(split[True])}) | all-easy: {np.mean(split[False]):.3f} "
      f"(n={len(split[False])})")
worst.sort()
for w in worst[:12]:
    print(w)
