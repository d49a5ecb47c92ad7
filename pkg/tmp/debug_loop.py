import time

import numpy as np

from micl.curriculum import MiclConfig, metrics_to_csv, micl_run
from micl.synthdata import GenConfig, generate_dataset

cfg = GenConfig(n_images=100, rng_seed=3)
scenes = generate_dataset(cfg)
n2 = sum(1 for s in scenes if len(s.gt) == 2)
npair = sum(1 for s in scenes if len(s.gt) == 2 and s.gt[0].category == s.gt[1].category
            and s.gt[0].box.x_max == s.gt[1].box.x_min)
print(f"{len(scenes)} images, two-object {n2}, touching pairs {npair}")

t0 = time.time()
res = micl_run(scenes, MiclConfig(max_rounds=5, rng_seed=5))
print(f"run {time.time() - t0:.1f}s")
print(metrics_to_csv(res.state))
forced = sum(1 for r in res.state.records.values() if r.forced)
print("records", len(res.state.records), "forced", forced)
for m in res.state.metrics:
    print(f"round {m.round_index}: ssg_all {m.corloc_ssg_all:.1f}")
