import numpy as np

from micl.curriculum import MiclConfig, build_pooled_cache, micl_run
from micl.detector import branch_scores
from micl.geometry import iou
from micl.synthdata import GenConfig, generate_dataset

cfg = GenConfig(n_images=60, rng_seed=3)
scenes = generate_dataset(cfg)
mcfg = MiclConfig(max_rounds=0, rng_seed=5)
res = micl_run(scenes, mcfg)
state = res.state
pooled = build_pooled_cache(scenes, mcfg.pool_size)


def trapped(scene, obj_idx):
    part = scene.proposals[3 * obj_idx]
    sub = np.asarray(scene.features, float)[part.y_min:part.y_max, part.x_min:part.x_max]
    return float(np.linalg.norm(sub, axis=2).max()) > 1.8


n_strict = n_body = 0
for s in scenes:
    p, h = branch_scores(res.model, pooled[s.image_id].flat)
    for c in s.labels:
        objs = [i for i, o in enumerate(s.gt) if o.category == c]
        if any(trapped(s, i) for i in objs):
            continue  # category is part-dominated in this image
        n_strict += 1
        rec = state.records[(s.image_id, c)]
        idx = s.proposals.index(rec.b_det)
        n_obj = len(s.gt)
        kind = (["part", "body", "over"][idx % 3] + f"@{idx // 3}") if idx < 3 * n_obj else f"grid{idx}"
        cats = [(i, s.gt[i].category, trapped(s, i)) for i in range(n_obj)]
        comb = h[:, c] * p[:, c]
        order = np.argsort(-comb)[:3]
        top = " ".join(
            f"[{('pbo'[j % 3] + str(j // 3)) if j < 3 * n_obj else 'g' + str(j)} {comb[j]:.3f}]"
            for j in order
        )
        n_body += kind.startswith("body")
        print(f"{s.image_id} c={c} objs={cats} det={kind:8s} S={rec.consistency:.2f} top: {top}")

print(f"\nstrict-easy records: {n_strict}, det==body: {n_body}")
print("selected:", sum(1 for r in state.records.values() if r.selected and not r.forced))
