"""Per-category autopsy of the seed-2 round-1 training set and weight drift."""
import numpy as np

from micl.curriculum import (
    MiclConfig,
    _RETRAIN_TAG,
    build_pooled_cache,
    micl_run,
    roi_training_targets,
)
from micl.detector import branch_scores, train_on_roi_labels
from micl.geometry import BoundingBox, iou
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter
from micl.synthdata import GenConfig, _category_directions, generate_dataset

gen = GenConfig(n_images=200, rng_seed=2,
                easy_object_prob=0.95, adjacent_pair_prob=0.2, part_scale=2.2)
scenes = generate_dataset(gen)
cfg = MiclConfig(max_rounds=0, rng_seed=2)
seg = RegionGrowSegmenter(RegionGrowConfig(similarity_tolerance=cfg.similarity_tolerance,
                                           max_iterations=cfg.grow_max_iterations))
res = micl_run(scenes, cfg, segmenter=seg)
state = res.state
cache = build_pooled_cache(scenes, cfg.pool_size)
n_channels = int(scenes[0].features.shape[2])
by_img = {s.image_id: s for s in scenes}
dirs = _category_directions(gen)  # (3, C, K)


def mean_feat(s, b):
    return s.features[b.y_min:b.y_max, b.x_min:b.x_max].reshape(-1, n_channels).mean(axis=0)


def part_boxes(s, c):
    out = []
    for b in s.proposals:
        if mean_feat(s, b) @ dirs[2, c] >= 1.5:
            out.append(b)
    return out


pseudo = {k: r.pseudo_box for k, r in state.records.items()
          if r.selected and not r.forced and r.pseudo_box is not None}
print(f"pseudo set: {len(pseudo)}")

for c in range(3):
    n_rec = 0
    trapped_imgs = 0
    covers = 0
    n_part_neg_band = 0
    n_part_ignored = 0
    for (image_id, cc), box in pseudo.items():
        if cc != c:
            continue
        n_rec += 1
        s = by_img[image_id]
        pbs = part_boxes(s, c)
        if pbs:
            trapped_imgs += 1
        for pb in pbs:
            ov = iou(pb, box)
            if 0.1 <= ov < 0.3:
                n_part_neg_band += 1
            elif ov < 0.1 or (0.3 <= ov < 0.5):
                n_part_ignored += 1
            if (box.x_min <= pb.x_min and box.y_min <= pb.y_min
                    and box.x_max >= pb.x_max and box.y_max >= pb.y_max):
                covers += 1
    print(f"cat{c}: supervised={n_rec} imgs_with_cat{c}_part={trapped_imgs} "
          f"pseudo_covers_part={covers} part_neg_band={n_part_neg_band} "
          f"part_ignored={n_part_ignored}")

flats, targets = roi_training_targets(scenes, cache, pseudo, 3)
pool = cfg.pool_size


def proj(model, row, c):
    w = model.cls_w[c].reshape(pool * pool, n_channels)
    return float(w.sum(axis=0) @ dirs[row, c])


last = None
for total in (100, 200, 400, 800, 1600):
    model = train_on_roi_labels(flats, targets, pool, n_channels, 3,
                                epochs=total, lr=cfg.retrain_lr,
                                rng_seed=cfg.rng_seed ^ _RETRAIN_TAG ^ 1)
    print(f"epochs={total}: " + "  ".join(
        f"c{c} part={proj(model, 2, c):+.2f} body={proj(model, 0, c):+.2f} "
        f"ring={proj(model, 1, c):+.2f}" for c in range(3)))
    last = model

for c in range(3):
    own_ps = []
    for s in scenes:
        if (s.image_id, c) not in pseudo:
            continue
        p, _ = branch_scores(last, cache[s.image_id].flat)
        lookup = {b.as_tuple(): i for i, b in enumerate(cache[s.image_id].boxes)}
        for pb in part_boxes(s, c):
            i = lookup.get(pb.as_tuple())
            if i is not None:
                own_ps.append(p[i, c])
    arr = np.array(own_ps)
    if arr.size:
        print(f"cat{c}: part boxes in supervised cat{c} images: n={arr.size} "
              f"p median={np.median(arr):.3f} p90={np.quantile(arr, 0.9):.3f} "
              f"max={arr.max():.3f}")
    else:
        print(f"cat{c}: no part boxes in supervised cat{c} images")
