import numpy as np

from micl.curriculum import (
    MiclConfig,
    build_pooled_cache,
    micl_run,
    relocalize,
    roi_training_targets,
    _TRAIN_TAG,
    _RETRAIN_TAG,
    CurriculumState,
    ExampleRecord,
)
from micl.detector import branch_scores, train_msc, train_on_roi_labels
from micl.geometry import iou
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter
from micl.synthdata import GenConfig, generate_dataset

cfg = GenConfig(n_images=100, rng_seed=3)
scenes = generate_dataset(cfg)
mcfg = MiclConfig(max_rounds=1, rng_seed=5)
res = micl_run(scenes, mcfg, keep_round_models=True)
state = res.state
model1 = res.round_models[1]
pooled = build_pooled_cache(scenes, mcfg.pool_size)

shown = 0
for s in scenes:
    if len(s.gt) != 1 or shown >= 4:
        continue
    shown += 1
    c = s.labels[0]
    rec = state.records[(s.image_id, c)]
    p, h = branch_scores(model1, pooled[s.image_id].flat)
    order = np.argsort(-p[:, c])[:5]
    n_obj = len(s.gt)
    names = []
    for j in order:
        kind = ("pbo"[j % 3] + str(j // 3)) if j < 3 * n_obj else f"g{j}"
        names.append(f"{kind} {s.proposals[j].as_tuple()} p={p[j, c]:.3f}")
    print(f"{s.image_id} c={c} gt={s.gt[0].box.as_tuple()}")
    print("  top-p:", " | ".join(names))
    print(f"  b_det={rec.b_det.as_tuple() if rec.b_det else None} "
          f"b_ssg={rec.b_ssg.as_tuple() if rec.b_ssg else None} S={rec.consistency}")

w = model1.cls_w[0].reshape(4, 4, 8)
print("\ncls_w[0] per-cell norms:\n", np.linalg.norm(w, axis=2).round(2))
print("p range over all rois img0:", p.min(), p.max())
