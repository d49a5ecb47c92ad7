"""Does any supervised cat-1/2 entry carry part-direction feature mass?"""
import numpy as np

from micl.curriculum import (
    MiclConfig,
    build_pooled_cache,
    micl_run,
    roi_training_targets,
)
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter
from micl.synthdata import GenConfig, _category_directions, generate_dataset

gen = GenConfig(n_images=200, rng_seed=2,
                easy_object_prob=0.95, adjacent_pair_prob=0.2, part_scale=2.2)
scenes = generate_dataset(gen)
cfg = MiclConfig(max_rounds=0, rng_seed=2)
seg = RegionGrowSegmenter(RegionGrowConfig(similarity_tolerance=cfg.similarity_tolerance,
                                           max_iterations=cfg.grow_max_iterations))
res = micl_run(scenes, cfg, segmenter=seg)
cache = build_pooled_cache(scenes, cfg.pool_size)
n_channels = int(scenes[0].features.shape[2])
dirs = _category_directions(gen)
pool = cfg.pool_size

pseudo = {k: r.pseudo_box for k, r in res.state.records.items()
          if r.selected and not r.forced and r.pseudo_box is not None}
flats, targets = roi_training_targets(scenes, cache, pseudo, 3)

for c in range(3):
    pos_u, neg_u, pos_b, neg_b = [], [], [], []
    for flat, t in zip(flats, targets):
        col = t[:, c]
        mask = ~np.isnan(col)
        if not mask.any():
            continue
        x = flat[mask].reshape(-1, pool * pool, n_channels)
        u = np.abs(x.mean(axis=1) @ dirs[2, c])          # uniform-pattern proj
        b = np.abs(x @ dirs[2, c]).max(axis=1)           # strongest single bin
        y = col[mask]
        pos_u.extend(u[y == 1.0]); neg_u.extend(u[y == 0.0])
        pos_b.extend(b[y == 1.0]); neg_b.extend(b[y == 0.0])
    print(f"cat{c}: pos n={len(pos_u)} uniform|proj| max={max(pos_u):.4f} "
          f"bin max={max(pos_b):.4f} | neg n={len(neg_u)} "
          f"uniform max={max(neg_u):.4f} bin max={max(neg_b):.4f}")
