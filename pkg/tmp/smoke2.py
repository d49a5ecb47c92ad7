import time

import numpy as np

from micl.curriculum import MiclConfig, metrics_to_csv, micl_run
from micl.synthdata import GenConfig, dataset_from_json, dataset_to_json, generate_dataset, planted_bias_check

t0 = time.time()
cfg = GenConfig(n_images=30, rng_seed=3)
scenes = generate_dataset(cfg)
print("gen", time.time() - t0, "images", len(scenes))
print("labels[0]", scenes[0].labels, "gt", [(o.category, o.box.as_tuple()) for o in scenes[0].gt])
print("n proposals", len(scenes[0].proposals))

rep = planted_bias_check(scenes)
print("plant fraction", rep.fraction, "violations", rep.violations[:5])

text = dataset_to_json(scenes)
back = dataset_from_json(text)
print("roundtrip bytes equal:", dataset_to_json(back) == text)

t0 = time.time()
res = micl_run(scenes, MiclConfig(max_rounds=3, rng_seed=5))
print("run", time.time() - t0)
print(metrics_to_csv(res.state))
print("warnings", res.warnings[:3])
n_forced = sum(1 for r in res.state.records.values() if r.forced)
print("forced", n_forced, "of", len(res.state.records))
