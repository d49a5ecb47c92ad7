import numpy as np

from micl.curriculum import MiclConfig, build_pooled_cache, micl_run
from micl.detector import branch_scores
from micl.geometry import iou
from micl.synthdata import GenConfig, generate_dataset

cfg = GenConfig(n_images=40, rng_seed=3)
scenes = generate_dataset(cfg)
mcfg = MiclConfig(max_rounds=0, rng_seed=5)
res = micl_run(scenes, mcfg)
state = res.state
pooled = build_pooled_cache(scenes, mcfg.pool_size)


def trapped(scene, obj_idx):
    part = scene.proposals[3 * obj_idx]
    sub = np.asarray(scene.features, float)[part.y_min:part.y_max, part.x_min:part.x_max]
    return float(np.linalg.norm(sub, axis=2).max()) > 1.8


n_easy = n_easy_det_body = 0
for s in scenes:
    p, h = branch_scores(res.model, pooled[s.image_id].flat)
    for c in s.labels:
        objs = [i for i, o in enumerate(s.gt) if o.category == c]
        all_trapped = all(trapped(s, i) for i in objs)
        rec = state.records[(s.image_id, c)]
        idx = s.proposals.index(rec.b_det)
        n_obj = len(s.gt)
        kind = (["part", "body", "over"][idx % 3] + f"@{idx // 3}") if idx < 3 * n_obj else "grid"
        if not all_trapped:
            n_easy += 1
            hit = kind.startswith("body")
            n_easy_det_body += hit
            # show score detail for the easy object's own boxes
            i = [j for j in objs if not trapped(s, j)][0]
            pi, bi, oi = 3 * i, 3 * i + 1, 3 * i + 2
            print(
                f"{s.image_id} c={c} EASY det={kind:8s} S={rec.consistency:.2f} | "
                f"interior p={p[pi, c]:.3f} h={h[pi, c]:.3f} | "
                f"body p={p[bi, c]:.3f} h={h[bi, c]:.3f}"
            )
print(f"\neasy records: {n_easy}, det==body: {n_easy_det_body}")
sel = sum(1 for r in state.records.values() if r.selected and not r.forced)
print("selected at round0:", sel, "of", len(state.records))
