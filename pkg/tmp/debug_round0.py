import numpy as np

from micl.curriculum import MiclConfig, build_pooled_cache, micl_run
from micl.detector import branch_scores, train_msc
from micl.geometry import iou
from micl.synthdata import GenConfig, generate_dataset

cfg = GenConfig(n_images=30, rng_seed=3)
scenes = generate_dataset(cfg)
mcfg = MiclConfig(max_rounds=0, rng_seed=5)
res = micl_run(scenes, mcfg)
state = res.state

# proposals per object: [part, body, oversized] * n_obj + grid
for s in scenes[:8]:
    cache = None
    for c in s.labels:
        rec = state.records[(s.image_id, c)]
        gt_boxes = [o.box for o in s.gt if o.category == c]
        det_kind = "?"
        if rec.b_det is not None:
            idx = s.proposals.index(rec.b_det)
            n_obj = len(s.gt)
            if idx < 3 * n_obj:
                det_kind = ["part", "body", "over"][idx % 3] + f"(obj{idx // 3})"
            else:
                det_kind = f"grid{idx}"
        i_det = max((iou(rec.b_det, g) for g in gt_boxes), default=-1) if rec.b_det else -1
        i_ssg = max((iou(rec.b_ssg, g) for g in gt_boxes), default=-1) if rec.b_ssg else -1
        print(
            f"{s.image_id} c={c} nobj={len(s.gt)} det={det_kind:12s} "
            f"iou_det={i_det:.2f} iou_ssg={i_ssg:.2f} S={rec.consistency}"
        )

# check p/h behaviour on one image
pooled = build_pooled_cache(scenes, mcfg.pool_size)
model = res.model
s = scenes[0]
p, h = branch_scores(model, pooled[s.image_id].flat)
c = s.labels[0]
comb = h[:, c] * p[:, c]
order = np.argsort(-comb)
print("\nimage", s.image_id, "cat", c, "gt", [o.box.as_tuple() for o in s.gt])
for r in order[:6]:
    print(f"  roi{r} {s.proposals[r].as_tuple()} p={p[r, c]:.3f} h={h[r, c]:.3f} comb={comb[r]:.4f}")
