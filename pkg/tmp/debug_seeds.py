import numpy as np

from micl.curriculum import MiclConfig, build_pooled_cache, micl_run
from micl.detector import branch_scores, feature_gradients, image_feature_gradients
from micl.kernels import BACKGROUND, UNLABELED
from micl.saliency import aggregate_roi_saliency, grad_background_map, normalize_saliency
from micl import seeding
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter, ssg_box
from micl.synthdata import GenConfig, generate_dataset

scenes = generate_dataset(GenConfig(n_images=100, rng_seed=3))
mcfg = MiclConfig(max_rounds=1, rng_seed=5, retrain_epochs=400, retrain_lr=1.0)
res = micl_run(scenes, mcfg, keep_round_models=True)
model = res.round_models[1]
pooled_cache = build_pooled_cache(scenes, mcfg.pool_size)

s = scenes[0]  # single trapped object, cat 2, gt (10,6,23,20), part (12,9,21,13)
c = s.labels[0]
gt = s.gt[0].box
part = s.proposals[0]
pooled = pooled_cache[s.image_id]
H, W = s.features.shape[:2]
p, h = branch_scores(model, pooled.flat)

roi_grads = feature_gradients(model, pooled, c)
roi_planes = (roi_grads * pooled.pooled).sum(axis=3)
raw = aggregate_roi_saliency(
    [(b, roi_planes[r], float(p[r, c])) for r, b in enumerate(pooled.boxes)], (H, W)
)
plane = normalize_saliency(raw)
grads = {cc: image_feature_gradients(model, pooled, cc, (H, W)) for cc in s.labels}
bg = grad_background_map(grads, s.labels)

def region(mask, name, arr):
    print(f"  {name}: min {arr[mask].min():.3f} med {np.median(arr[mask]):.3f} max {arr[mask].max():.3f}")

inside = np.zeros((H, W), bool)
inside[gt.y_min:gt.y_max, gt.x_min:gt.x_max] = True
interior = np.zeros((H, W), bool)
interior[gt.y_min+1:gt.y_max-1, gt.x_min+1:gt.x_max-1] = True
ring = inside & ~interior
partm = np.zeros((H, W), bool)
partm[part.y_min:part.y_max, part.x_min:part.x_max] = True
body_only = interior & ~partm
outside = ~inside

print("gt", gt.as_tuple(), "part", part.as_tuple(), "cat", c)
print("normalized saliency plane:")
for name, m in [("part", partm), ("body", body_only), ("ring", ring), ("bg", outside)]:
    region(m, name, plane)
print("background plane:")
for name, m in [("part", partm), ("body", body_only), ("ring", ring), ("bg", outside)]:
    region(m, name, bg)

obj_seeds = seeding.threshold_object_seeds({c: plane}, [c])
bg_seeds = seeding.adaptive_background_seeds(bg)
seeds = seeding.pool_seeds(obj_seeds, bg_seeds)
for name, m in [("part", partm), ("body", body_only), ("ring", ring), ("bg", outside)]:
    lab = seeds.labels[m]
    print(f"seeds {name}: obj {int((lab == c).sum())} bg {int((lab == BACKGROUND).sum())} "
          f"unlab {int((lab == UNLABELED).sum())} of {int(m.sum())}")

seg = RegionGrowSegmenter(RegionGrowConfig())
mask = seg.segment(np.asarray(s.features, float), seeds)
for name, m in [("part", partm), ("body", body_only), ("ring", ring), ("bg", outside)]:
    lab = mask.labels[m]
    print(f"mask {name}: obj {int((lab == c).sum())} of {int(m.sum())}")
bb = ssg_box(mask, c)
print("ssg box:", bb.as_tuple() if bb else None, " det:",
      pooled.boxes[int(np.argmax(h[:, c] * p[:, c]))].as_tuple())
